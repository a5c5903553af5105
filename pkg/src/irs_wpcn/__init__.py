"""Robust beamforming, IRS phase design and time allocation for
IRS-assisted wireless-powered networks."""

__version__ = "0.1.0"

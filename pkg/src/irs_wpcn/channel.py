"""Geometry-driven channel generation for the HAP-user, HAP-IRS and IRS-user links.

Conventions
-----------
* ``ula_response`` returns the row response ``[1, e^{-j2pi d/l sin t}, ...]``.
* Row channels are stored as plain 1-d arrays holding the *row* vector, so
  ``hap_user[k]`` is ``h_{d,k}^H`` (length N) and ``irs_user[k]`` is
  ``h_{r,k}^H`` (length M).
* ``hap_irs`` is the M x N matrix ``H_{d,r}`` and ``cascades[k]`` is
  ``diag(h_{r,k}^H) H_{d,r}``.
* The effective row channel of user ``k`` under phase vector ``e`` is
  ``e^H G_k + h_{d,k}^H``; the covariance is its outer product ``r^H r``.

Every array is laid out along the global x axis; a link angle is the
horizontal azimuth of the displacement measured from broadside (the y axis).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, PhaseNotUnitModulus

#: stream identifiers of the per-link random number generators
LINK_HAP_USER = 0
LINK_HAP_IRS = 1
LINK_IRS_USER = 2
LINK_PLACEMENT = 3

UNIT_MODULUS_TOL = 1e-9


@dataclass(frozen=True)
class Geometry:
    hap_position: np.ndarray
    irs_position: np.ndarray
    user_positions: np.ndarray  # K x 3
    element_spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        for name in ("hap_position", "irs_position"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            object.__setattr__(self, name, v)
        u = np.asarray(self.user_positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "user_positions", u)
        if not self.element_spacing_over_wavelength > 0:
            raise DegenerateGeometry("element spacing must be positive")

    @property
    def users(self) -> int:
        return self.user_positions.shape[0]

    def distances(self):
        """Return ``(d_hap_user[K], d_hap_irs, d_irs_user[K])`` in metres."""
        d_du = np.linalg.norm(self.user_positions - self.hap_position, axis=1)
        d_dr = float(np.linalg.norm(self.irs_position - self.hap_position))
        d_ru = np.linalg.norm(self.user_positions - self.irs_position, axis=1)
        if np.any(d_du <= 0) or d_dr <= 0 or np.any(d_ru <= 0):
            raise DegenerateGeometry("a link has zero length")
        return d_du, d_dr, d_ru


@dataclass(frozen=True)
class ChannelParams:
    antennas: int = 6
    elements: int = 20
    users: int = 4
    pathloss_ref: float = 1e-3  # C0 at D0 = 1 m
    alpha: float = 3.0  # HAP-user
    beta: float = 2.2  # HAP-IRS
    o: float = 2.5  # IRS-user
    rician_hap_irs: float = 10 ** 0.3  # kappa
    rician_irs_user: float = 10 ** 0.3  # vartheta


@dataclass(frozen=True)
class ChannelSet:
    hap_irs: np.ndarray
    irs_user: np.ndarray  # K x M, rows h_{r,k}^H
    hap_user: np.ndarray  # K x N, rows h_{d,k}^H
    cascades: np.ndarray = field(default=None)  # K x M x N

    def __post_init__(self):
        if self.cascades is None:
            object.__setattr__(self, "cascades", cascade(self.irs_user, self.hap_irs))
        for name in ("hap_irs", "irs_user", "hap_user", "cascades"):
            arr = np.array(getattr(self, name), dtype=complex)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def users(self) -> int:
        return self.hap_user.shape[0]

    @property
    def antennas(self) -> int:
        return self.hap_user.shape[1]

    @property
    def elements(self) -> int:
        return self.hap_irs.shape[0]

    def without_irs(self) -> "ChannelSet":
        """Same direct links, reflected links removed."""
        return ChannelSet(
            np.zeros_like(self.hap_irs),
            np.zeros_like(self.irs_user),
            self.hap_user,
            np.zeros_like(self.cascades),
        )

    def effective_row(self, phase: np.ndarray, user: int) -> np.ndarray:
        """Row channel ``e^H G_k + h_{d,k}^H`` of one user."""
        phase = check_phase(phase, self.elements)
        return np.conj(phase) @ self.cascades[user] + self.hap_user[user]


def cascade(irs_user: np.ndarray, hap_irs: np.ndarray) -> np.ndarray:
    """``G_k = diag(h_{r,k}^H) H_{d,r}`` for every user."""
    return np.asarray(irs_user)[:, :, None] * np.asarray(hap_irs)[None, :, :]


def check_phase(phase, m: int) -> np.ndarray:
    phase = np.asarray(phase, dtype=complex).ravel()
    if phase.size != m:
        raise PhaseNotUnitModulus(f"phase vector has length {phase.size}, expected {m}")
    if m and np.max(np.abs(np.abs(phase) - 1.0)) > UNIT_MODULUS_TOL:
        raise PhaseNotUnitModulus("phase entries are not unit modulus")
    return phase


def ula_response(n: int, theta: float, spacing_ratio: float = 0.5) -> np.ndarray:
    """Row response of an ``n``-element uniform linear array at angle ``theta``."""
    i = np.arange(n)
    return np.exp(-2j * np.pi * i * spacing_ratio * np.sin(theta))


def azimuth(src: np.ndarray, dst: np.ndarray) -> float:
    """Angle from broadside of an x-axis array at ``src`` towards ``dst``."""
    dx, dy = (np.asarray(dst, dtype=float) - np.asarray(src, dtype=float))[:2]
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return float(np.arctan2(dx, dy))


def _stream(seed: int, link: int, user: int, row: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(link, user, row))
    return np.random.Generator(np.random.PCG64(ss))


def _cscg(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` unit-variance circular complex Gaussians, drawn pairwise so a
    longer draw extends a shorter one."""
    z = rng.standard_normal((n, 2))
    return (z[:, 0] + 1j * z[:, 1]) / np.sqrt(2.0)


def sample_channels(params: ChannelParams, geom: Geometry, seed: int) -> ChannelSet:
    """Draw one realisation of every channel of the scenario.

    Each link, user and matrix row has its own generator keyed by
    ``(seed, link, user, row)``, so scenarios that differ only in N, M
    or K share their common channel entries.
    """
    n, m = params.antennas, params.elements
    k_users = geom.users
    if k_users != params.users:
        raise DegenerateGeometry(f"geometry has {k_users} users, parameters expect {params.users}")
    d_du, d_dr, d_ru = geom.distances()
    c0 = params.pathloss_ref
    sp = geom.element_spacing_over_wavelength

    hap_user = np.empty((k_users, n), dtype=complex)
    for k in range(k_users):
        hap_user[k] = np.sqrt(c0 * d_du[k] ** (-params.alpha)) * _cscg(_stream(seed, LINK_HAP_USER, k, 0), n)

    kap = params.rician_hap_irs
    los = np.outer(
        np.conj(ula_response(m, azimuth(geom.irs_position, geom.hap_position), sp)),
        ula_response(n, azimuth(geom.hap_position, geom.irs_position), sp),
    )
    nlos = np.stack([_cscg(_stream(seed, LINK_HAP_IRS, 0, r), n) for r in range(m)]) if m else np.zeros((0, n))
    hbar = np.sqrt(kap / (1 + kap)) * los + np.sqrt(1 / (1 + kap)) * nlos
    hap_irs = np.sqrt(c0 * d_dr ** (-params.beta)) * hbar

    vt = params.rician_irs_user
    irs_user = np.empty((k_users, m), dtype=complex)
    for k in range(k_users):
        los_k = ula_response(m, azimuth(geom.irs_position, geom.user_positions[k]), sp)
        hbar_k = np.sqrt(vt / (1 + vt)) * los_k + np.sqrt(1 / (1 + vt)) * _cscg(_stream(seed, LINK_IRS_USER, k, 0), m)
        irs_user[k] = np.sqrt(c0 * d_ru[k] ** (-params.o)) * hbar_k

    return ChannelSet(hap_irs, irs_user, hap_user)


def sample_user_positions(center, radius: float, users: int, seed: int) -> np.ndarray:
    """Uniform positions in the horizontal disk of ``radius`` around ``center``."""
    center = np.asarray(center, dtype=float).reshape(3)
    out = np.empty((users, 3))
    for k in range(users):
        u = _stream(seed, LINK_PLACEMENT, k, 0).random(2)
        r = radius * np.sqrt(u[0])
        ang = 2 * np.pi * u[1]
        out[k] = center + np.array([r * np.cos(ang), r * np.sin(ang), 0.0])
    return out


def combined_covariance(ch: ChannelSet, phase: np.ndarray, user: int) -> np.ndarray:
    """Covariance ``r^H r`` of the effective row channel ``r = e^H G_k + h_{d,k}^H``."""
    r = ch.effective_row(phase, user)
    h = np.conj(r)
    return np.outer(h, np.conj(h))


def covariances(ch: ChannelSet, phase: np.ndarray) -> list[np.ndarray]:
    return [combined_covariance(ch, phase, k) for k in range(ch.users)]

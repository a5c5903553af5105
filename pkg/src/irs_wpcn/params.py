"""System parameters shared by the optimisation stages."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .robust import EhParams, UncertaintyRadii


@dataclass(frozen=True)
class SystemParams:
    """Scalar parameters of one scenario, all powers in watts.

    ``eps_mode = "relative"`` sets ``eps_k = eps_scale * ||h_{d,k}||^2`` for
    both links (a fraction of the direct-link covariance norm, which does
    not depend on the IRS phases); ``"absolute"`` uses ``eps_scale`` as the
    radius itself.
    """

    eh: EhParams = field(default_factory=EhParams)
    p_max: float = 10 ** 1.3  # 43 dBm
    noise: float = 1e-10  # -70 dBm
    gamma_th: float = 10.0  # 10 dB
    eps_mode: str = "relative"
    eps_scale: float = 0.01
    tau_init: float = 0.5
    tau_min: float = 1e-4
    tau_max: float = 1 - 1e-4
    threshold: float = 1e-3
    max_ao_iters: int = 100
    max_hap_iters: int = 50
    dc_eps_rel: float = 1e-6
    dc_max_iters: int = 50
    sdr_candidates: int = 1000
    solver_tol: float = 1e-8

    def with_(self, **kw) -> "SystemParams":
        return replace(self, **kw)


def uncertainty_radii(hap_user: np.ndarray, params: SystemParams, perfect: bool = False) -> UncertaintyRadii:
    """Radii for each user from the configured parametrisation."""
    k = hap_user.shape[0]
    if perfect or params.eps_scale == 0:
        return UncertaintyRadii.zeros(k)
    if params.eps_mode == "absolute":
        eps = np.full(k, float(params.eps_scale))
    elif params.eps_mode == "relative":
        eps = params.eps_scale * np.sum(np.abs(hap_user) ** 2, axis=1)
    else:
        raise ValueError(f"unknown eps_mode {params.eps_mode!r}")
    return UncertaintyRadii(eps, eps.copy())

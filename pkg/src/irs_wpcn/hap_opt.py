"""HAP-side sub-problem: energy covariance, receive beams and uplink powers.

For fixed time split and IRS phases the three blocks are solved in turn:

1. ``solve_energy_matrix`` -- minimum-trace energy covariance meeting every
   user's worst-case harvesting requirement (SDP).
2. ``solve_receive_beams`` -- per-user receive matrices maximising the
   normalised worst-case SINR slack (unit-trace SDPs, solved exactly by
   the top eigenvector).
3. ``solve_power_alloc`` -- minimum total uplink power meeting the SINR
   targets under the harvested-energy caps (LP).

``algorithm1`` cycles them until the trace of the energy covariance settles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import conic
from .channel import ChannelSet, covariances
from .errors import EhDomain, InfeasiblePower, NotPsd, NotRankOne, PowerInfeasible, SinrInfeasible
from .numkit import herm_eig, outer, psd_factors, rank_one_factor
from .params import SystemParams
from .robust import EhParams, UncertaintyRadii, eh_forward, eh_inverse

log = logging.getLogger(__name__)

RANK_TOL = 1e-6
#: normalised slack treated as zero when deciding SINR feasibility
SLACK_FLOOR = 1e-12
#: relative headroom granted to the energy caps against round-off
CAP_HEADROOM = 1e-9


def _eh_list(eh, k: int) -> list[EhParams]:
    return list(eh) if isinstance(eh, (list, tuple)) else [eh] * k


def energy_requirements(tau: float, p, eh) -> np.ndarray:
    """Worst-case received DL power each user needs, ``Xi^-1((1-tau)/tau p_k)``."""
    p = np.asarray(p, dtype=float)
    ehs = _eh_list(eh, p.size)
    demand = (1.0 - tau) / tau * p
    out = np.empty(p.size)
    for k, (d, e) in enumerate(zip(demand, ehs)):
        if d >= e.xi * (1.0 - 1e-12):
            raise EhDomain(f"user {k}: harvesting demand {d:.4g} W reaches saturation {e.xi:.4g} W")
        out[k] = eh_inverse(d, e)
    return out


def dl_gains(s: np.ndarray, phi: list, radii: UncertaintyRadii) -> np.ndarray:
    """Worst-case received powers ``c_k = tr((phi_k - eps_k I) S)``."""
    tr = float(np.real(np.trace(s)))
    return np.array([float(np.real(np.sum(ph * s.T))) - radii.dl[k] * tr for k, ph in enumerate(phi)])


def solve_energy_matrix(tau: float, p, phi: list, radii: UncertaintyRadii, eh, p_max: float, tol: float = 1e-8) -> np.ndarray:
    """Minimum-trace energy covariance meeting the worst-case EH demands.

    Raises
    ------
    EhDomain
        If some ``(1 - tau)/tau * p_k`` is at or above saturation.
    InfeasiblePower
        If the demands cannot be met within ``p_max``.
    """
    if not 0.0 < tau < 1.0:
        raise EhDomain(f"time split {tau} outside (0, 1)")
    req = energy_requirements(tau, p, eh)
    n = phi[0].shape[0]
    if not np.any(req > 0):
        return np.zeros((n, n), dtype=complex)
    eff = [ph - radii.dl[k] * np.eye(n) for k, ph in enumerate(phi)]
    tops = np.array([herm_eig(e).values[0] for e in eff])
    for k in np.flatnonzero(req > 0):
        if tops[k] <= 0:
            raise InfeasiblePower(f"user {k}: uncertainty radius swamps the channel")
    # cheapest single-user bound already exceeding the budget
    if np.max(req / np.where(tops > 0, tops, np.inf)) > p_max * (1 + 1e-9):
        raise InfeasiblePower(f"demand needs more than p_max = {p_max:.4g} W")

    # S = sigma S' with sigma the best single-user bound keeps the data O(1)
    # so the solver's absolute tolerances act as relative ones
    sigma = float(np.max(req / np.where(tops > 0, tops, np.inf)))
    prob = conic.ConicProblem()
    prob.add_block("S", n)
    for k in np.flatnonzero(req > 0):
        prob.add_constraint({"S": eff[k] * (sigma / req[k])}, ">=", 1.0)
    prob.add_constraint({"S": np.eye(n)}, "<=", p_max / sigma)
    prob.set_objective({"S": np.eye(n)})
    sol = conic.solve(prob, tol=tol)
    if sol.status is conic.Status.INFEASIBLE:
        raise InfeasiblePower(f"demand needs more than p_max = {p_max:.4g} W")
    if not sol.optimal:
        raise InfeasiblePower(f"energy covariance solve ended with {sol.status.value}")
    s = sigma * _psd_part(sol.block_values["S"])
    # rescale so every demand holds exactly despite solver round-off
    gains = np.array([float(np.real(np.sum(e * s.T))) for e in eff])
    act = req > 0
    short = float(np.max(req[act] / np.maximum(gains[act], 1e-300)))
    if short > 1.0:
        s = s * short
    if np.real(np.trace(s)) > p_max * (1 + 1e-9):
        raise InfeasiblePower("energy covariance exceeds p_max after repair")
    return s


def _psd_part(a: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(0.5 * (a + a.conj().T))
    w = np.maximum(w, 0.0)
    return (u * w) @ u.conj().T


def extract_beams(s: np.ndarray, rel_tol: float = RANK_TOL) -> list[np.ndarray]:
    """Energy beams ``v_l = sqrt(l_l) u_l`` for every eigenvalue above ``rel_tol * l_1``."""
    if not np.any(s):
        return []
    return psd_factors(s, rel_tol)


def sinr_matrix(k: int, p, psi: list, radii: UncertaintyRadii, gamma_th: float, noise: float) -> np.ndarray:
    """``A_k`` with ``tr(A_k W_k) >= 0`` equivalent to the worst-case SINR target."""
    n = psi[0].shape[0]
    eye = np.eye(n)
    a = p[k] * (psi[k] - radii.ul[k] * eye) - gamma_th * noise * eye
    for i in range(len(psi)):
        if i != k:
            a = a - gamma_th * p[i] * (psi[i] + radii.ul[i] * eye)
    return 0.5 * (a + a.conj().T)


@dataclass
class ReceiveBeams:
    matrices: list
    vectors: list
    slacks: np.ndarray
    fallback: list


def solve_receive_beams(
    p, psi: list, radii: UncertaintyRadii, gamma_th: float, noise: float, tol: float = 1e-8, method: str = "eig"
) -> ReceiveBeams:
    """Receive matrices meeting each user's worst-case SINR target.

    Each user's matrix is chosen on its own by maximising the normalised
    slack of ``tr(A_k W_k) >= 0`` over ``W_k`` PSD with unit trace.  That
    maximum is ``lambda_max(A_k)``, attained at the top eigenvector, which
    ``method="eig"`` returns directly.  ``method="sdp"`` solves the same
    problem with the conic solver and keeps the rank-one projection of its
    output (polished onto the eigenvector when they agree).
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.any(p > 0):
        raise SinrInfeasible("powers must be non-negative with one positive entry")
    if method not in ("eig", "sdp"):
        raise ValueError(f"unknown method {method!r}")
    n = psi[0].shape[0]
    mats, vecs, slacks, fallback = [], [], [], []
    for k in range(len(psi)):
        a = sinr_matrix(k, p, psi, radii, gamma_th, noise)
        anorm = float(np.linalg.norm(a))
        lam, vec = herm_eig(a)
        if lam[0] < -SLACK_FLOOR * anorm:
            raise SinrInfeasible(f"user {k}: worst-case SINR target unattainable (slack {lam[0] / anorm:.3e})")
        flag = False
        w = vec[:, 0]
        if method == "sdp":
            prob = conic.ConicProblem()
            prob.add_block("W", n)
            prob.add_constraint({"W": a}, ">=", 0.0)
            prob.add_constraint({"W": np.eye(n)}, "==", 1.0)
            _, sol = conic.solve_feasibility(prob, tol=tol, slack_cap=2.0)
            wmat = sol.block_values["W"]
            try:
                w = rank_one_factor(wmat, RANK_TOL)
            except (NotRankOne, NotPsd):
                flag = True
                w = herm_eig(wmat).vectors[:, 0]
            w = w / np.linalg.norm(w)
            # polish onto the exact maximiser when the solver found the top eigendirection
            if lam.size == 1 or lam[0] - lam[1] > 1e-9 * anorm:
                if abs(np.vdot(vec[:, 0], w)) > 1 - 1e-6 or float(np.real(np.vdot(w, a @ w))) < 0:
                    w = vec[:, 0]
            elif float(np.real(np.vdot(w, a @ w))) < 0:
                w = vec[:, 0]
                flag = True
        slack = float(np.real(np.vdot(w, a @ w))) / anorm
        vecs.append(w)
        mats.append(outer(w))
        slacks.append(slack)
        fallback.append(flag)
    return ReceiveBeams(mats, vecs, np.asarray(slacks), fallback)


def sinr_coefficients(w: list, psi: list, radii: UncertaintyRadii):
    """Worst-case gains ``own[k] = tr((psi_k - eps_k I) W_k)`` and
    ``cross[k, i] = tr((psi_i + eps_i I) W_k)``."""
    k_users = len(w)
    own = np.empty(k_users)
    cross = np.empty((k_users, k_users))
    trw = np.empty(k_users)
    for k in range(k_users):
        trw[k] = float(np.real(np.trace(w[k])))
        for i in range(k_users):
            g = float(np.real(np.sum(psi[i] * w[k].T)))
            cross[k, i] = g + radii.ul[i] * trw[k]
        own[k] = cross[k, k] - 2 * radii.ul[k] * trw[k]
    return own, cross, trw


def energy_caps(tau: float, s: np.ndarray, phi: list, radii: UncertaintyRadii, eh) -> np.ndarray:
    """Largest uplink power each user can afford, ``tau Xi(c_k) / (1 - tau)``."""
    c = dl_gains(s, phi, radii)
    ehs = _eh_list(eh, len(phi))
    return np.array([tau * eh_forward(max(ck, 0.0), e) / (1 - tau) for ck, e in zip(c, ehs)])


def solve_power_alloc(
    tau: float, s, w: list, phi: list, psi: list, radii: UncertaintyRadii, gamma_th: float, noise: float, eh, caps=None, method: str = "exact"
) -> np.ndarray:
    """Minimum total uplink power meeting the SINR targets within the energy caps.

    The SINR constraints read ``(I - F) p >= u`` with ``F >= 0`` entrywise.
    When the spectral radius of ``F`` is below one, every feasible ``p``
    dominates ``p* = (I - F)^-1 u`` componentwise, so ``p*`` is the optimum
    of the LP for any increasing objective and the caps only decide
    feasibility.  ``method="lp"`` solves the LP with the interior-point
    solver instead.
    """
    k_users = len(w)
    own, cross, trw = sinr_coefficients(w, psi, radii)
    if caps is None:
        caps = energy_caps(tau, s, phi, radii, eh)
    caps = np.asarray(caps, dtype=float) * (1 + CAP_HEADROOM)
    if gamma_th == 0:
        return np.zeros(k_users)
    if np.any(own <= 0):
        raise PowerInfeasible("a worst-case desired-signal gain is not positive")
    if method == "exact":
        p = min_power_for_beams(w, psi, radii, gamma_th, noise)
        if p is None:
            raise PowerInfeasible("SINR targets are not jointly attainable with these receive beams")
        if np.any(p > caps):
            raise PowerInfeasible("SINR targets exceed the harvested-energy caps")
        return p
    # work in units of each user's interference-free power so the LP data is O(1)
    unit = gamma_th * noise * trw / own
    # -(own_k p_k - gamma sum_{i != k} cross_ki p_i) <= -gamma noise tr W_k, divided by gamma noise tr W_k
    a_ub = cross / (noise * trw[:, None]) * unit[None, :]
    a_ub[np.diag_indices(k_users)] = -1.0
    b_ub = -np.ones(k_users)
    bounds = [(0.0, float(c / u)) for c, u in zip(caps, unit)]
    res = conic.solve_lp(unit, a_ub=a_ub, b_ub=b_ub, bounds=bounds)
    if res.status is not conic.Status.OPTIMAL:
        raise PowerInfeasible(f"SINR targets exceed the harvested-energy caps ({res.status.value})")
    return np.clip(res.x * unit, 0.0, caps)


def min_power_for_beams(w: list, psi: list, radii: UncertaintyRadii, gamma_th: float, noise: float) -> np.ndarray | None:
    """Componentwise-smallest powers meeting every SINR target, or None when
    the targets are not jointly attainable with these receive beams."""
    k_users = len(w)
    own, cross, trw = sinr_coefficients(w, psi, radii)
    if np.any(own <= 0):
        return None
    f = gamma_th * cross / own[:, None]
    f[np.diag_indices(k_users)] = 0.0
    if np.max(np.abs(np.linalg.eigvals(f))) >= 1:
        return None
    u = gamma_th * noise * trw / own
    p = np.linalg.solve(np.eye(k_users) - f, u)
    # one refinement step keeps the SINR constraints tight to round-off
    p = p + np.linalg.solve(np.eye(k_users) - f, u - (p - f @ p))
    return np.maximum(p, 0.0)


def mmse_beams(p, psi: list, radii: UncertaintyRadii, noise: float) -> list[np.ndarray]:
    """Receive vectors maximising each user's worst-case SINR for powers ``p``."""
    n = psi[0].shape[0]
    eye = np.eye(n)
    out = []
    for k in range(len(psi)):
        num = p[k] * (psi[k] - radii.ul[k] * eye)
        den = noise * eye + sum(p[i] * (psi[i] + radii.ul[i] * eye) for i in range(len(psi)) if i != k)
        _, vec = sla.eigh(0.5 * (num + num.conj().T), 0.5 * (den + den.conj().T))
        w = vec[:, -1]
        out.append(w / np.linalg.norm(w))
    return out


@dataclass
class HapSolution:
    energy_matrix: np.ndarray
    beams: list
    receive_matrices: list
    receive_vectors: list
    powers: np.ndarray
    feasible: bool = True
    objective: float = 0.0
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list)
    rank_fallback: bool = False


def algorithm1(tau: float, e, q, ch: ChannelSet, params: SystemParams, radii: UncertaintyRadii, p_init) -> HapSolution:
    """Alternate energy covariance, receive beams and powers until ``tr S`` settles.

    The cycle keeps the previous triple feasible at every step, so the
    trace sequence never increases.  The returned triple is consistent:
    the powers satisfy the energy caps of the returned covariance and the
    SINR targets of the returned receive beams.
    """
    phi = covariances(ch, e)
    psi = covariances(ch, q)
    p = np.asarray(p_init, dtype=float)
    tol = params.solver_tol
    history = []
    best = None
    converged = False
    it = 0
    for it in range(1, params.max_hap_iters + 1):
        s = solve_energy_matrix(tau, p, phi, radii, params.eh, params.p_max, tol)
        rb = solve_receive_beams(p, psi, radii, params.gamma_th, params.noise, tol)
        p_new = solve_power_alloc(tau, s, rb.matrices, phi, psi, radii, params.gamma_th, params.noise, params.eh)
        obj = float(np.real(np.trace(s)))
        history.append(obj)
        best = HapSolution(s, extract_beams(s), rb.matrices, rb.vectors, p_new, True, obj, it, False, list(history), any(rb.fallback))
        p = p_new
        if len(history) > 1 and abs(history[-2] - obj) <= params.threshold * max(history[-2], 1e-300):
            converged = True
            break
    best.converged = converged
    best.iterations = it
    best.history = history
    return best


__all__ = [
    "HapSolution",
    "ReceiveBeams",
    "algorithm1",
    "dl_gains",
    "energy_caps",
    "energy_requirements",
    "extract_beams",
    "min_power_for_beams",
    "mmse_beams",
    "sinr_coefficients",
    "sinr_matrix",
    "solve_energy_matrix",
    "solve_power_alloc",
    "solve_receive_beams",
]

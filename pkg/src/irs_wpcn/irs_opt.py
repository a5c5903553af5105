"""IRS-side sub-problem: phase design by DC programming and the SDR baseline.

A quadratic form ``|e^H a + b|^2`` in the phase vector becomes linear in the
lifted matrix ``X = [e; 1][e; 1]^H``.  The unit-modulus constraint turns into
``diag(X) = 1`` and the rank-one requirement is handled through the exact
penalty ``tr(X) - ||X||_2 = 0``, whose concave part is linearised at the
previous iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .channel import ChannelSet, check_phase, covariances
from .errors import DimensionMismatch, LiftInfeasible
from .hap_opt import energy_requirements
from .numkit import herm_eig, outer
from .params import SystemParams
from .robust import UncertaintyRadii

log = logging.getLogger(__name__)

DOWNLINK = "DownlinkEnergy"
UPLINK = "UplinkInformation"


@dataclass
class QuadraticLift:
    """``e_bar^H matrix e_bar + offset`` equals the quadratic form at ``e_bar = [e; 1]``."""

    matrix: np.ndarray
    offset: float

    def value(self, phase: np.ndarray) -> float:
        eb = np.append(np.asarray(phase, dtype=complex), 1.0)
        return float(np.real(np.vdot(eb, self.matrix @ eb))) + self.offset

    def __add__(self, other: "QuadraticLift") -> "QuadraticLift":
        return QuadraticLift(self.matrix + other.matrix, self.offset + other.offset)

    def scaled(self, c: float) -> "QuadraticLift":
        return QuadraticLift(c * self.matrix, c * self.offset)


def build_quadratic_lift(g: np.ndarray, h_direct: np.ndarray, x: np.ndarray) -> QuadraticLift:
    """Lift of ``|e^H G x + h_direct^H x|^2`` (``G`` is M x N, ``h_direct`` and ``x`` length N)."""
    g = np.asarray(g, dtype=complex)
    h_direct = np.asarray(h_direct, dtype=complex).ravel()
    x = np.asarray(x, dtype=complex).ravel()
    if g.ndim != 2 or g.shape[1] != x.size or h_direct.size != x.size:
        raise DimensionMismatch(f"G {g.shape}, h {h_direct.shape}, x {x.shape}")
    m = g.shape[0]
    a = g @ x
    b = np.vdot(h_direct, x)
    r = np.zeros((m + 1, m + 1), dtype=complex)
    r[:m, :m] = np.outer(a, a.conj())
    r[:m, m] = a * np.conj(b)
    r[m, :m] = b * a.conj()
    return QuadraticLift(r, float(abs(b) ** 2))


def combine_lifts(lifts, weights) -> QuadraticLift:
    out = None
    for lift, w in zip(lifts, weights):
        term = lift.scaled(float(w))
        out = term if out is None else out + term
    return out


def extract_phase(x: np.ndarray) -> np.ndarray:
    """Phase vector from a (near) rank-one diag-one lifted matrix.

    The dominant eigenvector is divided by its last entry, which removes
    the global phase, and every entry is then projected to unit modulus.
    """
    u = herm_eig(x).vectors[:, 0]
    ref = u[-1] if abs(u[-1]) > 0 else 1.0
    v = u[:-1] / ref
    mag = np.abs(v)
    v = np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), 1.0)
    return v.astype(complex)


def _row_scale(lift: QuadraticLift) -> float:
    return max(float(np.linalg.norm(lift.matrix)), 1e-300)


def lift_margins(lifts, rhs, phase: np.ndarray) -> np.ndarray:
    """Normalised margins ``(value - rhs) / ||matrix||_F`` (all constraints are ``>=``)."""
    out = np.empty(len(lifts))
    for j, (lift, r) in enumerate(zip(lifts, rhs)):
        out[j] = (lift.value(phase) - r) / _row_scale(lift)
    return out


def _lifted_problem(lifts, rhs, m: int, senses=None, margins=None) -> conic.ConicProblem:
    # rows are scaled to unit Frobenius norm: channel gains are ~1e-12 and
    # would otherwise vanish under the solver's absolute tolerances
    prob = conic.ConicProblem()
    prob.add_block("X", m + 1)
    for j, (lift, r) in enumerate(zip(lifts, rhs)):
        sense = ">=" if senses is None else senses[j]
        extra = 0.0 if margins is None else margins[j]
        nrm = _row_scale(lift)
        if sense == ">=":
            prob.add_constraint({"X": lift.matrix / nrm}, ">=", (r - lift.offset) / nrm + extra)
        else:
            prob.add_constraint({"X": lift.matrix / nrm}, "<=", (r - lift.offset) / nrm - extra)
    for i in range(m + 1):
        prob.fix_entry("X", i, i, 1.0)
    return prob


def relaxed_solve(lifts, rhs, m: int, senses=None, tol: float = 1e-8):
    """Maximise the common normalised slack of the lifted constraints with
    ``diag(X) = 1``, rank dropped.  Returns ``(X, slack)``."""
    prob = _lifted_problem(lifts, rhs, m, senses)
    feasible, sol = conic.solve_feasibility(prob, tol=tol, slack_cap=float(m + 1))
    if not feasible:
        raise LiftInfeasible(f"lifted phase problem infeasible (slack {sol.scalar_values.get('slack', np.nan):.3e})")
    return sol.block_values["X"], float(sol.scalar_values["slack"])


@dataclass
class DcCertificate:
    gap: float  # tr(X) - ||X||_2 at termination
    trace: float
    iterations: int
    converged: bool
    objective: list = field(default_factory=list)
    feasible: bool = True
    max_violation: float = 0.0


def dc_phase_solve(
    lifts,
    rhs,
    m: int,
    senses=None,
    init: np.ndarray | None = None,
    eps_stop: float = 1e-6,
    max_iters: int = 50,
    margins=None,
    tol: float = 1e-8,
    slack_weight: float = 0.0,
    slack_decay: float = 0.5,
):
    """Rank-one lifted point by difference-of-convex iterations.

    Each step solves ``min tr(X) - <u u^H, X>`` over the lifted constraints,
    ``X`` PSD and ``diag(X) = 1``, with ``u`` the dominant unit eigenvector of
    the previous iterate, and stops once ``tr(X) - ||X||_2 <= eps_stop *
    tr(X)``.

    Parameters
    ----------
    lifts, rhs
        Constraint ``e_bar^H R_j e_bar + offset_j  (sense_j)  rhs_j``.
    m : int
        Number of phases.
    senses : list of str, optional
        ``">="`` (default) or ``"<="`` per constraint.
    init : ndarray, optional
        Starting lifted matrix; by default the relaxed max-slack point.
    eps_stop : float
        Relative stopping threshold on ``tr - ||.||_2``.
    margins : array_like, optional
        Extra normalised margin (in units of ``||R_j||_F``) each constraint
        must keep.
    slack_weight : float
        When positive, a common normalised slack ``t >= 0`` is added to
        every constraint and ``slack_weight * slack_decay**i`` times ``t`` is
        subtracted from the objective of step ``i``.  Early steps then trade
        rank for margin and later ones are plain DC steps.

    Returns
    -------
    phase : ndarray
        Unit-modulus phase vector of length ``m``.
    cert : DcCertificate
    """
    if len(lifts) != len(rhs):
        raise DimensionMismatch("lifts and rhs differ in length")
    for lift in lifts:
        if lift.matrix.shape != (m + 1, m + 1):
            raise DimensionMismatch(f"lift of shape {lift.matrix.shape} for {m} phases")
    if init is None:
        init, _ = relaxed_solve(lifts, rhs, m, senses, tol)
    prob = _lifted_problem(lifts, rhs, m, senses, margins)
    if slack_weight > 0:
        prob.add_scalar("t", 0.0, float(m + 1))
        for con in prob.constraints:
            if con.sense != "==":
                con.coeffs["t"] = -1.0 if con.sense == ">=" else 1.0
    x = np.asarray(init, dtype=complex)
    trace = float(m + 1)
    history = []
    gap = trace - herm_eig(x).values[0]
    it = 0
    # a rank-one start is final only in the plain form and when it is feasible;
    # with the slack reward at least one step is taken to widen the margins
    converged = gap <= eps_stop * trace and slack_weight <= 0
    if converged:
        marg0 = _signed_margins(lifts, rhs, senses or [">="] * len(lifts), extract_phase(x))
        need = np.zeros(len(lifts)) if margins is None else np.asarray(margins, dtype=float)
        converged = bool(np.all(marg0 >= need))
    while not converged and it < max_iters:
        u = herm_eig(x).vectors[:, 0]
        obj = {"X": np.eye(m + 1) - outer(u)}
        if slack_weight > 0:
            obj["t"] = -slack_weight * slack_decay**it
        prob.set_objective(obj)
        it += 1
        sol = conic.solve(prob, tol=tol, certify=False)
        if sol.status is conic.Status.INFEASIBLE:
            raise LiftInfeasible("lifted phase problem infeasible during DC iterations")
        if not sol.optimal and sol.kkt_residuals.primal > 1e-6:
            break
        x = sol.block_values["X"]
        history.append(sol.objective_value)
        gap = trace - herm_eig(x).values[0]
        converged = gap <= eps_stop * trace
        if not sol.optimal:
            break
    phase = extract_phase(x)
    marg = lift_margins(lifts, rhs, phase) if senses is None else _signed_margins(lifts, rhs, senses, phase)
    worst = float(-np.min(marg)) if marg.size else 0.0
    cert = DcCertificate(float(gap), trace, it, bool(converged), history, bool(worst <= 1e-6), max(worst, 0.0))
    return phase, cert


def _signed_margins(lifts, rhs, senses, phase):
    m = lift_margins(lifts, rhs, phase)
    return np.array([v if s == ">=" else -v for v, s in zip(m, senses)])


def sdr_randomize(lifts, rhs, m: int, num_candidates: int = 1000, seed: int = 0, senses=None, tol: float = 1e-8):
    """Semidefinite relaxation followed by Gaussian randomisation.

    Solves the relaxed max-slack problem; a numerically rank-one solution
    gives its phases directly.  Otherwise ``num_candidates`` vectors drawn
    from ``CN(0, X)`` are projected to unit modulus (relative to their last
    entry) and the feasible candidate with the largest worst-case margin is
    returned.

    Returns
    -------
    phase : ndarray
    feasible : bool
        False if no candidate meets every constraint; the best candidate by
        margin is returned anyway.
    """
    x, _ = relaxed_solve(lifts, rhs, m, senses, tol)
    w = herm_eig(x).values
    if w.size == 1 or w[1] <= 1e-6 * w[0]:
        phase = extract_phase(x)
        marg = _signed_margins(lifts, rhs, senses or [">="] * len(lifts), phase)
        return phase, bool(np.all(marg >= -1e-9))
    cand, worst = gaussian_candidates(x, lifts, rhs, m, num_candidates, seed, senses)
    return cand[0], bool(worst[0] >= 0.0)


def gaussian_candidates(x: np.ndarray, lifts, rhs, m: int, num_candidates: int, seed: int, senses=None):
    """Unit-modulus candidates drawn from ``CN(0, X)``, best worst-case margin first.

    Returns the candidates (rows) and their worst normalised margins.
    """
    w, u = herm_eig(x)
    rng = np.random.default_rng(seed)
    root = u * np.sqrt(np.maximum(w, 0.0))
    z = (rng.standard_normal((num_candidates, m + 1)) + 1j * rng.standard_normal((num_candidates, m + 1))) / np.sqrt(2)
    cand = z @ root.T  # rows ~ CN(0, X)
    cand = cand[:, :m] / cand[:, m:]
    cand = np.exp(1j * np.angle(cand))
    ebar = np.concatenate([cand, np.ones((num_candidates, 1))], axis=1)
    margins = np.empty((num_candidates, len(lifts)))
    for j, (lift, r) in enumerate(zip(lifts, rhs)):
        vals = np.real(np.einsum("ci,ij,cj->c", ebar.conj(), lift.matrix, ebar)) + lift.offset
        marg = (vals - r) / max(float(np.linalg.norm(lift.matrix)), 1e-300)
        if senses is not None and senses[j] == "<=":
            marg = -marg
        margins[:, j] = marg
    worst = margins.min(axis=1)
    order = np.argsort(-worst, kind="stable")
    return cand[order].astype(complex), worst[order]


# ---------------------------------------------------------------------------
# constraint systems of the phase sub-problem
# ---------------------------------------------------------------------------
def downlink_system(tau: float, beams: list, p, ch: ChannelSet, radii: UncertaintyRadii, eh):
    """Lifts and right-hand sides of the worst-case energy constraints in ``e``."""
    req = energy_requirements(tau, p, eh)
    trs = float(sum(np.real(np.vdot(v, v)) for v in beams))
    lifts, rhs = [], []
    for k in range(ch.users):
        hd = np.conj(ch.hap_user[k])
        parts = [build_quadratic_lift(ch.cascades[k], hd, v) for v in beams]
        lift = combine_lifts(parts, np.ones(len(parts))) if parts else QuadraticLift(np.zeros((ch.elements + 1,) * 2, dtype=complex), 0.0)
        lifts.append(lift)
        rhs.append(req[k] + radii.dl[k] * trs)
    return lifts, np.asarray(rhs)


def uplink_system(w: list, p, ch: ChannelSet, radii: UncertaintyRadii, gamma_th: float, noise: float):
    """Lifts and right-hand sides of the worst-case SINR constraints in ``q``."""
    p = np.asarray(p, dtype=float)
    lifts, rhs = [], []
    for k in range(ch.users):
        wk = w[k]
        nw = float(np.real(np.vdot(wk, wk)))
        terms = [build_quadratic_lift(ch.cascades[i], np.conj(ch.hap_user[i]), wk) for i in range(ch.users)]
        weights = [p[k] if i == k else -gamma_th * p[i] for i in range(ch.users)]
        lifts.append(combine_lifts(terms, weights))
        interf_eps = sum(p[i] * radii.ul[i] for i in range(ch.users) if i != k)
        rhs.append(gamma_th * (interf_eps + noise) * nw + p[k] * radii.ul[k] * nw)
    return lifts, np.asarray(rhs)


@dataclass
class PhaseUpdate:
    e: np.ndarray
    q: np.ndarray
    e_changed: bool
    q_changed: bool
    e_cert: DcCertificate | None = None
    q_cert: DcCertificate | None = None
    flags: list = field(default_factory=list)


#: fractions of the relaxed max slack demanded from the rank-one point
MARGIN_LADDER = (0.5, 0.25, 0.0)
#: normalised margin kept on the last ladder rung against extraction round-off
MARGIN_FLOOR = 1e-7
#: initial reward on the common slack in the rewarded DC attempts
DC_SLACK_WEIGHT = 10.0
#: Gaussian-randomisation candidates used as extra DC starting points
DC_RESTARTS = 4


def dc_design(
    lifts,
    rhs,
    m: int,
    prev: np.ndarray | None = None,
    seed: int = 0,
    restarts: int = DC_RESTARTS,
    eps_stop: float = 1e-6,
    max_iters: int = 50,
    tol: float = 1e-8,
    num_candidates: int = 1000,
):
    """Phase vector meeting every lifted constraint, by DC programming.

    DC iterations stop at stationary points of the rank penalty, so one
    start may end on a rank-two face.  Starts are tried in turn until one
    certifies (rank-one gap below ``eps_stop`` and every margin
    non-negative):

    1. the relaxed max-slack point with the decaying slack reward;
    2. the ``restarts`` best Gaussian-randomisation candidates, same reward;
    3. the relaxed point demanding shares of its slack (``MARGIN_LADDER``);
    4. ``prev``, a feasible phase vector, with the slack reward.

    Returns
    -------
    phase : ndarray or None
        None when no start certifies.
    cert : DcCertificate or None

    Raises
    ------
    LiftInfeasible
        If even the relaxed problem is infeasible.
    """
    x0, slack = relaxed_solve(lifts, rhs, m, tol=tol)
    common = dict(eps_stop=eps_stop, max_iters=max_iters, tol=tol)
    rewarded = dict(slack_weight=DC_SLACK_WEIGHT)

    def attempt(init, **kw):
        try:
            phase, cert = dc_phase_solve(lifts, rhs, m, init=init, **common, **kw)
        except LiftInfeasible:
            return None
        if cert.converged and float(np.min(lift_margins(lifts, rhs, phase))) >= 0.0:
            return phase, cert
        return None

    def lifted(phase):
        return outer(np.append(phase, 1.0))

    def starts():
        yield x0, rewarded
        if restarts > 0:
            cand, _ = gaussian_candidates(x0, lifts, rhs, m, num_candidates, seed)
            for c in cand[:restarts]:
                yield lifted(c), rewarded
        for frac in MARGIN_LADDER:
            yield x0, dict(margins=np.full(len(lifts), max(frac * max(slack, 0.0), MARGIN_FLOOR)))
        if prev is not None:
            yield lifted(prev), rewarded

    for init, kw in starts():
        out = attempt(init, **kw)
        if out is not None:
            return out
    return None, None


def _phase_step(lifts, rhs, m, prev, params: SystemParams, mode: str, seed: int, flags: list, tag: str):
    """One phase design; returns ``(phase, changed, cert)``."""
    if mode == "sdr":
        try:
            phase, ok = sdr_randomize(lifts, rhs, m, params.sdr_candidates, seed, tol=params.solver_tol)
        except LiftInfeasible:
            flags.append(f"{tag}:lift_infeasible")
            return prev, False, None
        marg = float(np.min(lift_margins(lifts, rhs, phase)))
        if ok and marg >= 0.0:
            return phase, True, None
        flags.append(f"{tag}:randomization_failed")
        return prev, False, None
    try:
        phase, cert = dc_design(
            lifts, rhs, m, prev, seed, eps_stop=params.dc_eps_rel, max_iters=params.dc_max_iters, tol=params.solver_tol, num_candidates=params.sdr_candidates
        )
    except LiftInfeasible:
        flags.append(f"{tag}:lift_infeasible")
        return prev, False, None
    if phase is None:
        flags.append(f"{tag}:dc_not_certified")
        return prev, False, None
    return phase, True, cert


def algorithm2(
    tau: float,
    beams: list,
    w: list,
    p,
    ch: ChannelSet,
    radii: UncertaintyRadii,
    params: SystemParams,
    e_prev: np.ndarray,
    q_prev: np.ndarray,
    mode: str = "dc",
    seed: int = 0,
) -> PhaseUpdate:
    """Update the energy phases ``e`` and then the information phases ``q``.

    ``mode="dc"`` runs :func:`dc_design` with the previous phases as the
    last-resort start; ``mode="sdr"`` uses semidefinite relaxation with Gaussian randomisation.
    A new phase vector is accepted only when every constraint of the
    current HAP solution still holds; otherwise the previous one is kept.
    """
    m = ch.elements
    flags: list = []
    e_prev = check_phase(e_prev, m)
    q_prev = check_phase(q_prev, m)
    dl_lifts, dl_rhs = downlink_system(tau, beams, p, ch, radii, params.eh)
    e, e_changed, e_cert = _phase_step(dl_lifts, dl_rhs, m, e_prev, params, mode, seed, flags, "e")
    ul_lifts, ul_rhs = uplink_system(w, p, ch, radii, params.gamma_th, params.noise)
    q, q_changed, q_cert = _phase_step(ul_lifts, ul_rhs, m, q_prev, params, mode, seed + 1, flags, "q")
    return PhaseUpdate(e, q, e_changed, q_changed, e_cert, q_cert, flags)


__all__ = [
    "DcCertificate",
    "PhaseUpdate",
    "QuadraticLift",
    "algorithm2",
    "build_quadratic_lift",
    "combine_lifts",
    "dc_design",
    "dc_phase_solve",
    "downlink_system",
    "extract_phase",
    "gaussian_candidates",
    "lift_margins",
    "relaxed_solve",
    "sdr_randomize",
    "uplink_system",
]

"""Time allocation and the alternating-optimisation driver.

One AO iteration runs the HAP sub-problem, the IRS phase update and the
time split in turn.  Each stage keeps the incoming point feasible, so the
transmit energy ``tau * tr(S)`` never increases.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .channel import ChannelSet, check_phase, covariances
from .errors import IrsWpcnError, ScenarioInfeasible, StageInfeasible, TimeInfeasible
from .hap_opt import (
    HapSolution,
    algorithm1,
    dl_gains,
    energy_requirements,
    min_power_for_beams,
    mmse_beams,
    solve_energy_matrix,
)
from .irs_opt import algorithm2
from .numkit import outer
from .params import SystemParams, uncertainty_radii
from .robust import UncertaintyRadii, dl_adversary, eh_forward, ul_adversary

log = logging.getLogger(__name__)


class Variant(str, enum.Enum):
    PROPOSED = "Proposed"
    WITHOUT_IRS = "WithoutIrs"
    RANDOM_PHASE = "RandomPhase"
    SDR_PHASE = "SdrPhase"
    PERFECT_CSI = "PerfectCsi"


VARIANT_IDS = {v: i for i, v in enumerate(Variant)}

#: seed-stream tag for the initial phase draw
_PHASE_STREAM = 7


def time_allocation(s, p, phi, radii: UncertaintyRadii, eh, tau_min: float = 1e-4, tau_max: float = 1 - 1e-4, method: str = "closed") -> float:
    """Shortest energy phase meeting every user's harvesting need.

    The constraint ``Xi^-1((1-tau)/tau p_k) <= c_k`` is linear in ``tau``
    as ``(1 - tau) p_k <= tau Xi(c_k)``, so the optimum is
    ``max_k p_k / (p_k + Xi(c_k))`` clamped to ``[tau_min, tau_max]``.
    ``method="lp"`` solves the same LP numerically.
    """
    p = np.asarray(p, dtype=float)
    c = dl_gains(s, phi, radii)
    ehs = list(eh) if isinstance(eh, (list, tuple)) else [eh] * p.size
    harvest = np.array([eh_forward(max(ck, 0.0), e) for ck, e in zip(c, ehs)])
    if np.any((p > 0) & (harvest <= 0)):
        k = int(np.flatnonzero((p > 0) & (harvest <= 0))[0])
        raise TimeInfeasible(f"user {k} transmits but harvests nothing")
    if method == "lp":
        act = p > 0
        if not np.any(act):
            return tau_min
        a_ub = -(p[act] + harvest[act])[:, None]
        b_ub = -p[act]
        res = conic.solve_lp([1.0], a_ub=a_ub, b_ub=b_ub, bounds=[(tau_min, tau_max)])
        if res.status is not conic.Status.OPTIMAL:
            raise TimeInfeasible(f"time split LP ended with {res.status.value}")
        return float(res.x[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(p > 0, p / (p + harvest), 0.0)
    tau = float(np.max(ratio)) if ratio.size else 0.0
    return float(min(max(tau, tau_min), tau_max))


@dataclass
class BeamformingState:
    tau: float
    energy_matrix: np.ndarray
    beams: list
    receive_vectors: list
    receive_matrices: list
    powers: np.ndarray
    e: np.ndarray
    q: np.ndarray
    objective: float


@dataclass
class AoIterate:
    iteration: int
    objective: float
    tau: float
    trace_s: float
    flags: list = field(default_factory=list)


@dataclass
class AoTrace:
    iterates: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    infeasible_stage: str = ""
    audit: dict = field(default_factory=dict)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([it.objective for it in self.iterates])

    @property
    def iterations(self) -> int:
        return len(self.iterates)


def initial_phases(m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random unit-modulus ``e`` and ``q`` shared by every variant of a trial."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_PHASE_STREAM,))
    rng = np.random.Generator(np.random.PCG64(ss))
    ang = rng.uniform(0.0, 2 * np.pi, size=(2, m))
    return np.exp(1j * ang[0]), np.exp(1j * ang[1])


#: SINR over-provisioning factors tried by the power bootstrap
BOOTSTRAP_MARGINS = (2.0, 10 ** 0.1, 1.001)


def bootstrap_powers(tau: float, ch: ChannelSet, e, q, radii: UncertaintyRadii, params: SystemParams) -> np.ndarray:
    """Feasible starting powers for the first HAP solve.

    Receive vectors maximising each SINR at equal powers fix the beams;
    the smallest powers meeting ``margin * gamma_th`` follow in closed form.
    The first margin whose energy demand stays below ``0.9 xi`` and within
    the power budget is used.
    """
    psi = covariances(ch, q)
    phi = covariances(ch, e)
    k_users = ch.users
    gains = np.array([np.real(np.trace(m)) for m in psi])
    level = params.gamma_th * params.noise / max(float(np.min(gains)), 1e-300)
    w = mmse_beams(np.full(k_users, level), psi, radii, params.noise)
    wm = [outer(x) for x in w]
    last = "receive_beams"
    for margin in BOOTSTRAP_MARGINS:
        p = min_power_for_beams(wm, psi, radii, margin * params.gamma_th, params.noise)
        if p is None:
            last = "receive_beams"
            continue
        demand = (1 - tau) / tau * p
        if np.any(demand >= 0.9 * params.eh.xi):
            last = "energy_matrix"
            continue
        try:
            solve_energy_matrix(tau, p, phi, radii, params.eh, params.p_max, params.solver_tol)
        except StageInfeasible as exc:
            last = exc.stage
            continue
        return p
    raise ScenarioInfeasible(last, "no bootstrap power vector is feasible")


def audit_state(state: BeamformingState, ch: ChannelSet, params: SystemParams, radii: UncertaintyRadii) -> dict:
    """Re-check every constraint at the analytic adversaries.

    Downlink: covariances shifted by ``-eps I``; uplink: own covariance
    shifted by ``-eps I`` and interferers by ``+eps I``.  Returns the worst
    relative energy shortfall, the worst SINR shortfall and the budget
    excess (all should be <= 0 up to round-off).
    """
    tau = state.tau
    s = state.energy_matrix
    phi = dl_adversary(covariances(ch, state.e), radii)
    psi = covariances(ch, state.q)
    energy_short = []
    for k in range(ch.users):
        rx = float(np.real(np.sum(phi[k] * s.T)))
        harvested = tau * eh_forward(max(rx, 0.0), params.eh)
        need = (1 - tau) * state.powers[k]
        energy_short.append((need - harvested) / max(need, 1e-300) if need > 0 else 0.0)
    sinr_short = []
    for k in range(ch.users):
        pert = ul_adversary(psi, radii, k)
        w = state.receive_vectors[k]
        g = [float(np.real(np.vdot(w, m @ w))) for m in pert]
        sig = state.powers[k] * g[k]
        interf = sum(state.powers[i] * g[i] for i in range(ch.users) if i != k)
        sinr = sig / (interf + params.noise * float(np.real(np.vdot(w, w))))
        sinr_short.append(params.gamma_th - sinr)
    return {
        "energy": float(np.max(energy_short)),
        "sinr": float(np.max(sinr_short)),
        "budget": float(np.real(np.trace(s)) - params.p_max),
    }


def run_ao(ch: ChannelSet, params: SystemParams, variant: Variant | str = Variant.PROPOSED, seed: int = 0, threshold: float | None = None):
    """Alternate the three sub-problems until the energy settles.

    Returns
    -------
    state : BeamformingState
        Best (last) feasible iterate.
    trace : AoTrace

    Raises
    ------
    ScenarioInfeasible
        When the start-up stages fail; ``stage`` names the failing one.
    """
    variant = Variant(variant)
    threshold = params.threshold if threshold is None else threshold
    t0 = time.perf_counter()
    if variant is Variant.WITHOUT_IRS:
        ch = ch.without_irs()
    radii = uncertainty_radii(ch.hap_user, params, perfect=variant is Variant.PERFECT_CSI)
    e, q = initial_phases(ch.elements, seed)
    tau = float(params.tau_init)
    trace = AoTrace()

    p = bootstrap_powers(tau, ch, e, q, radii, params)
    try:
        hap = algorithm1(tau, e, q, ch, params, radii, p)
    except StageInfeasible as exc:
        raise ScenarioInfeasible(exc.stage, str(exc)) from exc

    state = None
    prev_obj = np.inf
    for it in range(1, params.max_ao_iters + 1):
        flags = []
        if it > 1:
            try:
                hap = algorithm1(tau, e, q, ch, params, radii, state.powers)
            except IrsWpcnError as exc:
                # the previous point is feasible; stop on it
                flags.append(f"hap:{type(exc).__name__}")
                trace.iterates.append(AoIterate(it, state.objective, tau, float(np.real(np.trace(state.energy_matrix))), flags))
                break
        if variant in (Variant.PROPOSED, Variant.SDR_PHASE, Variant.PERFECT_CSI):
            mode = "sdr" if variant is Variant.SDR_PHASE else "dc"
            upd = algorithm2(tau, hap.beams, hap.receive_vectors, hap.powers, ch, radii, params, e, q, mode=mode, seed=seed * 1000 + it)
            e, q = upd.e, upd.q
            flags.extend(upd.flags)
        phi = covariances(ch, e)
        try:
            tau_new = time_allocation(hap.energy_matrix, hap.powers, phi, radii, params.eh, params.tau_min, params.tau_max)
        except TimeInfeasible as exc:
            flags.append(f"time:{exc}")
            tau_new = tau
        tau = min(tau, tau_new)
        trs = float(np.real(np.trace(hap.energy_matrix)))
        obj = tau * trs
        state = BeamformingState(tau, hap.energy_matrix, hap.beams, hap.receive_vectors, hap.receive_matrices, hap.powers, e, q, obj)
        trace.iterates.append(AoIterate(it, obj, tau, trs, flags))
        if np.isfinite(prev_obj) and (prev_obj - obj) <= threshold * prev_obj:
            trace.converged = True
            break
        prev_obj = obj
    trace.audit = audit_state(state, ch, params, radii)
    trace.wall_time = time.perf_counter() - t0
    return state, trace


@dataclass
class SuiteResult:
    """Per-variant statistics of a benchmark run.

    ``means``/``stderr``/``counts`` use every feasible run of a variant;
    ``paired_means`` use only the seeds every variant solved, and
    ``ordering`` compares those.
    """

    rows: list  # dicts: variant, seed, objective, iterations, converged, infeasible_stage
    means: dict
    stderr: dict
    counts: dict
    ordering: dict
    paired_means: dict = field(default_factory=dict)
    paired_count: int = 0


def run_benchmark_suite(channels, params: SystemParams, seeds, variants=tuple(Variant)) -> SuiteResult:
    """Run every variant on every seed and aggregate the final energies.

    ``channels`` is either a fixed :class:`ChannelSet` or a callable mapping
    a seed to one.  Infeasible runs are recorded with their stage and left
    out of the means.
    """
    rows = []
    for seed in seeds:
        ch = channels(seed) if callable(channels) else channels
        for v in variants:
            v = Variant(v)
            try:
                st, tr = run_ao(ch, params, v, seed)
                rows.append(dict(variant=v.value, seed=seed, objective=st.objective, iterations=tr.iterations, converged=tr.converged, infeasible_stage=""))
            except ScenarioInfeasible as exc:
                rows.append(dict(variant=v.value, seed=seed, objective=np.nan, iterations=0, converged=False, infeasible_stage=exc.stage))
    means, stderr, counts = {}, {}, {}
    for v in variants:
        v = Variant(v).value
        vals = np.array([r["objective"] for r in rows if r["variant"] == v and not r["infeasible_stage"]])
        counts[v] = int(vals.size)
        means[v] = float(np.mean(vals)) if vals.size else np.nan
        stderr[v] = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else np.nan
    names = [Variant(v).value for v in variants]
    solved = {(r["variant"], r["seed"]) for r in rows if not r["infeasible_stage"]}
    common = [sd for sd in dict.fromkeys(r["seed"] for r in rows) if all((v, sd) in solved for v in names)]
    paired = {}
    for v in names:
        vals = [r["objective"] for r in rows if r["variant"] == v and r["seed"] in common]
        paired[v] = float(np.mean(vals)) if vals else np.nan
    order = [Variant.PERFECT_CSI.value, Variant.PROPOSED.value, Variant.SDR_PHASE.value, Variant.RANDOM_PHASE.value, Variant.WITHOUT_IRS.value]
    ordering = {}
    for a, b in zip(order, order[1:]):
        if a in paired and b in paired:
            ordering[f"{a}<={b}"] = bool(paired[a] <= paired[b])
    return SuiteResult(rows, means, stderr, counts, ordering, paired, len(common))


__all__ = [
    "AoIterate",
    "AoTrace",
    "BeamformingState",
    "SuiteResult",
    "Variant",
    "audit_state",
    "bootstrap_powers",
    "initial_phases",
    "run_ao",
    "run_benchmark_suite",
    "time_allocation",
]

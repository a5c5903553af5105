"""User-facing entry points of the conic solver: ``solve``,
``solve_feasibility`` and ``solve_lp``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MalformedProblem
from .ipm import solve_standard
from .problem import Compiled, ConicProblem, ConicSolution, KktResiduals, Status, compile_problem

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 100
SLACK = "__slack__"


def _assemble(problem: ConicProblem, comp: Compiled, res) -> ConicSolution:
    blocks = {name: 0.5 * (x + x.conj().T) for name, x in zip(comp.block_names, res.xs)}
    scalars = {}
    for name, sm in comp.scalar_maps.items():
        scalars[name] = sm.offset + sum(t * res.x_lp[j] for j, t in sm.terms)
    obj = 0.0
    for name, coef in problem.objective.items():
        if name in blocks:
            obj += float(np.real(np.sum(np.asarray(coef) * blocks[name].T)))
        else:
            obj += float(coef) * scalars[name]
    duals = comp.obj_sign * res.y[: comp.user_rows] / comp.row_scale[: comp.user_rows]
    dual_blocks = {name: comp.obj_sign * z for name, z in zip(comp.block_names, res.zs)}
    return ConicSolution(
        status=res.status,
        block_values=blocks,
        scalar_values=scalars,
        objective_value=obj,
        kkt_residuals=KktResiduals(res.primal_res, res.dual_res, res.gap),
        iterations=res.iterations,
        duals=duals,
        dual_blocks=dual_blocks,
    )


def _trivial(problem: ConicProblem, comp: Compiled) -> ConicSolution:
    """No constraints at all: zero is optimal unless the cost has a descent ray."""
    sf = comp.sf
    unbounded = bool(np.any(sf.c_lp < 0)) or any(np.linalg.eigvalsh(c)[0] < 0 for c in sf.c_blocks)
    blocks = {name: np.zeros((n, n), dtype=complex) for name, n in zip(comp.block_names, sf.dims)}
    scalars = {name: sm.offset for name, sm in comp.scalar_maps.items()}
    obj = sum(float(coef) * scalars[n] for n, coef in problem.objective.items() if n in scalars)
    status = Status.UNBOUNDED if unbounded else Status.OPTIMAL
    return ConicSolution(status, blocks, scalars, obj, KktResiduals(0.0, 0.0, 0.0))


def solve(
    problem: ConicProblem,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    certify: bool = True,
    callback=None,
    start=None,
) -> ConicSolution:
    """Minimise (or maximise) the problem's linear objective.

    Parameters
    ----------
    problem : ConicProblem
    tol : float
        Relative tolerance on primal residual, dual residual and duality gap.
    max_iters : int
    certify : bool
        When the interior-point run neither converges nor detects a ray,
        decide infeasibility by maximising a common constraint slack.
    callback : callable, optional
        Receives an :class:`~irs_wpcn.conic.ipm.Iterate` per iteration.
    start : tuple, optional
        Standard-form warm point ``(xs, x_lp, y, zs, z_lp)``.
    """
    comp = compile_problem(problem)
    if comp.sf.m == 0:
        return _trivial(problem, comp)
    res = solve_standard(comp.sf, tol=tol, max_iters=max_iters, start=start, callback=callback)
    sol = _assemble(problem, comp, res)
    if certify and sol.status is Status.MAX_ITERATIONS:
        feasible, _ = solve_feasibility(problem, tol=max(tol, 1e-7), max_iters=max_iters)
        if not feasible:
            sol.status = Status.INFEASIBLE
    return sol


def solve_feasibility(problem: ConicProblem, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS, slack_cap=None):
    """Decide feasibility by maximising one slack shared by all inequalities.

    Every inequality ``a(X) >= r`` becomes ``a(X) - |a| t >= r`` (``<=``
    analogously), with ``|a|`` the Euclidean norm of its coefficients, and
    ``t`` is maximised up to ``slack_cap``.  The problem is declared
    feasible when ``t* >= -tol``.

    Returns
    -------
    feasible : bool
    point : ConicSolution
        The slack-maximising point; ``scalar_values`` carries the optimal
        slack under the key ``"slack"``.
    """
    work = problem.copy()
    work.objective = {}
    norms = []
    for con in work.constraints:
        if con.sense == "==":
            continue
        nrm = problem.constraint_norm(con)
        if nrm == 0.0:
            raise MalformedProblem("inequality without coefficients")
        norms.append((con, nrm))
    if not norms:
        sol = solve(work, tol=tol, max_iters=max_iters, certify=False)
        sol.scalar_values["slack"] = np.inf if sol.optimal else -np.inf
        return sol.optimal, sol
    if slack_cap is None:
        slack_cap = 10.0 * (1.0 + max(abs(c.rhs) / n for c, n in norms))
    work.add_scalar(SLACK, -np.inf, float(slack_cap))
    for con, nrm in norms:
        con.coeffs[SLACK] = -nrm if con.sense == ">=" else nrm
    work.set_objective({SLACK: 1.0}, maximize=True)
    sol = solve(work, tol=tol, max_iters=max_iters, certify=False)
    t = sol.scalar_values.pop(SLACK)
    sol.scalar_values["slack"] = t
    if sol.status is Status.INFEASIBLE:
        return False, sol
    if sol.status is Status.UNBOUNDED:
        # cannot happen with a capped slack unless the equalities are degenerate
        return False, sol
    feasible = t >= -tol
    if not feasible:
        sol.status = Status.INFEASIBLE
    return feasible, sol


# ---------------------------------------------------------------------------
# linear programs
# ---------------------------------------------------------------------------
@dataclass
class LpResult:
    status: Status
    x: np.ndarray
    objective_value: float


def _polish_vertex(sf, x, z, y):
    """Try to snap an interior-point LP solution onto an exact optimal vertex."""
    a, b, c = sf.a_lp, sf.b, sf.c_lp
    m, n = a.shape
    if m == 0 or m > n:
        return None
    order = np.argsort(-(x / np.maximum(z, 1e-300)))
    basis = np.sort(order[:m])
    bmat = a[:, basis]
    try:
        xb = np.linalg.solve(bmat, b)
        yb = np.linalg.solve(bmat.T, c[basis])
    except np.linalg.LinAlgError:
        return None
    scale_x = 1.0 + float(np.max(np.abs(x)))
    scale_z = 1.0 + float(np.max(np.abs(z)))
    zb = c - a.T @ yb
    if np.min(xb) < -1e-12 * scale_x or np.min(zb) < -1e-10 * scale_z:
        return None
    xv = np.zeros(n)
    xv[basis] = np.maximum(xb, 0.0)
    if np.linalg.norm(a @ xv - b) > 1e-12 * (1.0 + np.linalg.norm(b)):
        return None
    return xv


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, bounds=None, tol: float = 1e-10, max_iters: int = 100) -> LpResult:
    """Minimise ``c^T x`` subject to ``a_ub x <= b_ub``, ``a_eq x = b_eq``
    and per-variable ``bounds`` (``(lo, hi)`` pairs, ``None`` meaning
    unbounded; the default is ``x >= 0``).

    The interior-point answer is snapped to an exact vertex when the
    identified basis is primal and dual feasible.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    if not np.all(np.isfinite(c)):
        raise MalformedProblem("non-finite objective")
    if bounds is None:
        bounds = [(0.0, None)] * n
    elif isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
        bounds = [bounds] * n
    prob = ConicProblem()
    names = [f"x{i}" for i in range(n)]
    for name, (lo, hi) in zip(names, bounds):
        prob.add_scalar(name, -np.inf if lo is None else lo, np.inf if hi is None else hi)
    for mat, vec, sense in ((a_ub, b_ub, "<="), (a_eq, b_eq, "==")):
        if mat is None:
            continue
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        vec = np.asarray(vec, dtype=float).ravel()
        if mat.shape != (vec.size, n):
            raise MalformedProblem(f"constraint matrix shape {mat.shape} does not match ({vec.size}, {n})")
        if not (np.all(np.isfinite(mat)) and np.all(np.isfinite(vec))):
            raise MalformedProblem("non-finite constraint data")
        for row, r in zip(mat, vec):
            coeffs = {names[j]: row[j] for j in np.flatnonzero(row)}
            if not coeffs:
                if (sense == "<=" and r < 0) or (sense == "==" and r != 0):
                    return LpResult(Status.INFEASIBLE, np.full(n, np.nan), np.nan)
                continue
            prob.add_constraint(coeffs, sense, r)
    prob.set_objective({names[j]: c[j] for j in range(n)})

    comp = compile_problem(prob)
    if comp.sf.m == 0:
        sol = _trivial(prob, comp)
        x = np.array([sol.scalar_values[nm] for nm in names])
        return LpResult(sol.status, x, float(c @ x) if sol.optimal else np.nan)
    res = solve_standard(comp.sf, tol=tol, max_iters=max_iters)
    status = res.status
    x_lp = res.x_lp
    if status is Status.MAX_ITERATIONS:
        sol = _assemble(prob, comp, res)
        if sol.kkt_residuals.primal < 1e-7 and sol.kkt_residuals.dual < 1e-7 and sol.kkt_residuals.gap < 1e-7:
            status = Status.OPTIMAL
        else:
            feasible, _ = solve_feasibility(prob, tol=1e-8, max_iters=max_iters)
            if not feasible:
                status = Status.INFEASIBLE
            elif sol.kkt_residuals.primal < 1e-7:
                status = Status.UNBOUNDED
    if status is Status.OPTIMAL:
        pol = _polish_vertex(comp.sf, res.x_lp, res.z_lp, res.y)
        if pol is not None:
            x_lp = pol
    x = np.array([comp.scalar_maps[nm].offset + sum(t * x_lp[j] for j, t in comp.scalar_maps[nm].terms) for nm in names])
    if status is not Status.OPTIMAL:
        return LpResult(status, x, np.nan)
    return LpResult(status, x, float(c @ x))

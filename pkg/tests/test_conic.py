import itertools

import numpy as np
import pytest

from irs_wpcn import conic
from irs_wpcn.conic import ConicProblem, Status, solve, solve_feasibility, solve_lp
from irs_wpcn.errors import MalformedProblem
from irs_wpcn.numkit import herm_eig, inner, random_hermitian, random_psd


def random_feasible_sdp(n, m, rng):
    """Equality SDP with a strictly feasible primal (identity) and dual."""
    a_list = [random_hermitian(n, rng) for _ in range(m)]
    x0 = random_psd(n, rng) + np.eye(n)
    b = [inner(a, x0) for a in a_list]
    y0 = rng.standard_normal(m)
    c = sum(y * a for y, a in zip(y0, a_list)) + random_psd(n, rng) + np.eye(n)
    prob = ConicProblem()
    prob.add_block("X", n)
    for a, bb in zip(a_list, b):
        prob.add_constraint({"X": a}, "==", bb)
    prob.set_objective({"X": c})
    return prob, a_list, np.array(b), c


def kkt_residuals(sol, a_list, b, c):
    """Independent relative KKT residuals of an equality-form SDP."""
    x = sol.block_values["X"]
    y = sol.duals[: len(a_list)]
    z = c - sum(yi * a for yi, a in zip(y, a_list))
    rp = np.linalg.norm([inner(a, x) - bi for a, bi in zip(a_list, b)]) / (1 + np.linalg.norm(b))
    gap = abs(inner(c, x) - b @ y) / (1 + abs(inner(c, x)) + abs(b @ y))
    dual_psd = -min(herm_eig(z).values[-1], 0.0) / (1 + np.linalg.norm(c))
    primal_psd = -min(herm_eig(x).values[-1], 0.0) / (1 + np.linalg.norm(x))
    return rp, gap, dual_psd, primal_psd


def test_pinned_diagonal_entry():
    prob = ConicProblem()
    prob.add_block("X", 2)
    prob.fix_entry("X", 0, 0, 1.0)
    prob.set_objective({"X": np.eye(2)})
    sol = solve(prob)
    assert sol.status is Status.OPTIMAL
    assert sol.objective_value == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(sol.block_values["X"], np.diag([1.0, 0.0]), atol=1e-7)


def test_unit_trace_gives_min_eigenvalue(rng):
    c = random_hermitian(5, rng)
    prob = ConicProblem()
    prob.add_block("X", 5)
    prob.add_constraint({"X": np.eye(5)}, "==", 1.0)
    prob.set_objective({"X": c})
    sol = solve(prob)
    w, u = herm_eig(c)
    assert sol.objective_value == pytest.approx(w[-1], abs=1e-8)
    proj = np.outer(u[:, -1], u[:, -1].conj())
    assert np.linalg.norm(sol.block_values["X"] - proj) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_random_sdp_kkt(seed):
    rng = np.random.default_rng(seed)
    prob, a_list, b, c = random_feasible_sdp(6, 8, rng)
    sol = solve(prob)
    assert sol.status is Status.OPTIMAL
    assert max(kkt_residuals(sol, a_list, b, c)) <= 1e-8


def test_weak_duality_along_iterates(rng):
    prob, *_ = random_feasible_sdp(5, 6, rng)
    seen = []
    solve(prob, callback=seen.append)
    assert seen
    # infeasible-start iterates only satisfy weak duality once feasible
    feas = [it for it in seen if it.primal_res <= 1e-9 and it.dual_res <= 1e-9]
    for it in feas:
        assert it.pobj >= it.dobj - 1e-9 * (1 + abs(it.pobj))


def test_optimal_solutions_recheck(rng):
    prob = ConicProblem()
    prob.add_block("X", 4)
    prob.add_scalar("t", 0.0, 2.0)
    a = random_psd(4, rng)
    prob.add_constraint({"X": a, "t": 1.0}, ">=", 1.0)
    prob.add_constraint({"X": np.eye(4)}, "<=", 3.0)
    prob.set_objective({"X": np.eye(4), "t": 0.5})
    sol = solve(prob)
    assert sol.optimal
    x, t = sol.block_values["X"], sol.scalar_values["t"]
    tol = 10 * 1e-8
    assert inner(a, x) + t >= 1.0 - tol
    assert np.real(np.trace(x)) <= 3.0 + tol
    assert -tol <= t <= 2.0 + tol
    assert herm_eig(x).values[-1] >= -tol
    # optimum: min(tr X + t/2) puts everything on the top eigenvector of a
    lam = herm_eig(a).values[0]
    assert sol.objective_value == pytest.approx(min(1 / lam, 0.5), abs=1e-7)


def test_feasibility_examples():
    def build(level):
        prob = ConicProblem()
        prob.add_block("X", 2)
        prob.add_constraint({"X": np.eye(2)}, "==", 1.0)
        prob.add_constraint({"X": np.diag([3.0, 0.0])}, ">=", level)
        return prob

    ok, sol = solve_feasibility(build(2.0))
    assert ok and sol.scalar_values["slack"] >= 0
    x = sol.block_values["X"]
    assert 3 * np.real(x[0, 0]) >= 2.0 - 1e-8
    ok, sol = solve_feasibility(build(4.0))
    assert not ok and sol.status is Status.INFEASIBLE


@pytest.mark.parametrize("seed", range(8))
def test_feasibility_verdict_matches_construction(seed):
    # feasible: rhs below the value at a known PSD point; infeasible: rhs
    # above the spectral bound for unit-trace X
    rng = np.random.default_rng(seed)
    n, m = 4, 3
    mats = [random_hermitian(n, rng) for _ in range(m)]
    x0 = random_psd(n, rng)
    x0 /= np.trace(x0).real
    feasible = seed % 2 == 0
    prob = ConicProblem()
    prob.add_block("X", n)
    prob.add_constraint({"X": np.eye(n)}, "==", 1.0)
    for j, a in enumerate(mats):
        rhs = inner(a, x0) - 0.01
        if not feasible and j == 0:
            rhs = herm_eig(a).values[0] + 0.1
        prob.add_constraint({"X": a}, ">=", rhs)
    ok, _ = solve_feasibility(prob)
    assert ok == feasible


def test_scalar_infeasible_and_unbounded():
    prob = ConicProblem()
    prob.add_scalar("t")
    prob.add_constraint({"t": 1.0}, "<=", 0.0)
    prob.add_constraint({"t": 1.0}, ">=", 1.0)
    prob.set_objective({"t": 1.0})
    assert solve(prob).status is Status.INFEASIBLE
    prob = ConicProblem()
    prob.add_scalar("t", 0.0)
    prob.add_constraint({"t": 1.0}, ">=", 0.0)
    prob.set_objective({"t": -1.0})
    assert solve(prob).status is Status.UNBOUNDED


def test_malformed_problems():
    prob = ConicProblem()
    prob.add_block("X", 2)
    with pytest.raises(MalformedProblem):
        prob.add_constraint({"X": np.eye(2)}, "~", 1.0)
    with pytest.raises(MalformedProblem):
        prob.add_block("X", 3)
    with pytest.raises(MalformedProblem):
        prob.add_scalar("s", 1.0, 0.0)


def test_lp_examples():
    res = solve_lp([1.0], a_ub=[[-2.0]], b_ub=[-1.0], bounds=[(0.0, 1.0)])
    assert res.status is Status.OPTIMAL
    assert res.x[0] == pytest.approx(0.5, abs=1e-9)
    res = solve_lp([1.0], a_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0], bounds=[(None, None)])
    assert res.status is Status.INFEASIBLE
    res = solve_lp([-1.0], a_ub=[[-1.0]], b_ub=[0.0])
    assert res.status is Status.UNBOUNDED


def vertex_enumeration(c, a_ub, b_ub):
    """Optimum of min c.x, A x <= b, x >= 0 by brute force over active sets."""
    n = len(c)
    a = np.vstack([a_ub, -np.eye(n)])
    b = np.concatenate([b_ub, np.zeros(n)])
    best = np.inf
    for rows in itertools.combinations(range(a.shape[0]), n):
        sub = a[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(a @ x <= b + 1e-9):
            best = min(best, float(c @ x))
    return best


@pytest.mark.parametrize("seed", range(10))
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 7))
    m = int(rng.integers(n, n + 4))
    a = rng.standard_normal((m, n))
    a = np.vstack([a, np.ones((1, n))])  # keeps the region bounded
    b = np.concatenate([rng.uniform(0.5, 2.0, m), [5.0]])
    c = rng.standard_normal(n)
    res = solve_lp(c, a_ub=a, b_ub=b)
    assert res.status is Status.OPTIMAL
    assert res.objective_value == pytest.approx(vertex_enumeration(c, a, b), abs=1e-9)
    assert np.all(a @ res.x <= b + 1e-9 * (1 + np.linalg.norm(b)))
    assert np.all(res.x >= -1e-9)


def test_lp_equalities():
    res = solve_lp([1.0, 2.0], a_eq=[[1.0, 1.0]], b_eq=[1.0])
    assert res.status is Status.OPTIMAL
    assert np.allclose(res.x, [1.0, 0.0], atol=1e-9)


def test_exports():
    assert conic.DEFAULT_TOL == 1e-8

"""Problem model for the dense conic solver.

A :class:`ConicProblem` holds Hermitian PSD matrix blocks, bounded real
scalars, a linear objective and linear constraints written as trace
pairings ``Re tr(A X)``.  :func:`compile_problem` rewrites it in the standard
primal form consumed by the interior-point core::

    minimize    sum_b <C_b, X_b> + c^T x
    subject to  sum_b <A_ib, X_b> + a_i^T x = b_i,   i = 1..m
                X_b PSD,  x >= 0
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import MalformedProblem
from ..numkit import HERMITIAN_RTOL, herm

SENSES = ("<=", ">=", "==")


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class Constraint:
    coeffs: dict
    sense: str
    rhs: float


@dataclass
class KktResiduals:
    primal: float
    dual: float
    gap: float


@dataclass
class ConicSolution:
    status: Status
    block_values: dict
    scalar_values: dict
    objective_value: float
    kkt_residuals: KktResiduals
    iterations: int = 0
    #: multipliers of the user constraints in insertion order (fixed entries last)
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    #: dual slack matrices per block
    dual_blocks: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class ConicProblem:
    """Builder for small dense SDP/LP instances.

    Examples
    --------
    >>> P = ConicProblem()
    >>> P.add_block("X", 2)
    >>> P.fix_entry("X", 0, 0, 1.0)
    >>> P.set_objective({"X": np.eye(2)})
    """

    def __init__(self):
        self.blocks: dict[str, int] = {}
        self.scalars: dict[str, tuple[float, float]] = {}
        self.objective: dict = {}
        self.maximize = False
        self.constraints: list[Constraint] = []
        self.fixed_entries: list[tuple[str, int, int, complex]] = []

    # -- construction -------------------------------------------------
    def add_block(self, name: str, dim: int) -> str:
        if name in self.blocks or name in self.scalars:
            raise MalformedProblem(f"duplicate variable name {name!r}")
        if int(dim) < 1:
            raise MalformedProblem(f"block {name!r} needs dimension >= 1")
        self.blocks[name] = int(dim)
        return name

    def add_scalar(self, name: str, lower: float = -np.inf, upper: float = np.inf) -> str:
        if name in self.blocks or name in self.scalars:
            raise MalformedProblem(f"duplicate variable name {name!r}")
        if lower > upper:
            raise MalformedProblem(f"scalar {name!r} has lower bound above upper bound")
        self.scalars[name] = (float(lower), float(upper))
        return name

    def set_objective(self, coeffs: dict, maximize: bool = False) -> None:
        self.objective = dict(coeffs)
        self.maximize = bool(maximize)

    def add_constraint(self, coeffs: dict, sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise MalformedProblem(f"unknown sense {sense!r}")
        self.constraints.append(Constraint(dict(coeffs), sense, float(rhs)))
        return len(self.constraints) - 1

    def fix_entry(self, block: str, i: int, j: int, value: complex) -> None:
        self.fixed_entries.append((block, int(i), int(j), complex(value)))

    def copy(self) -> "ConicProblem":
        other = ConicProblem()
        other.blocks = dict(self.blocks)
        other.scalars = dict(self.scalars)
        other.objective = dict(self.objective)
        other.maximize = self.maximize
        other.constraints = [Constraint(dict(c.coeffs), c.sense, c.rhs) for c in self.constraints]
        other.fixed_entries = list(self.fixed_entries)
        return other

    # -- checks -------------------------------------------------------
    def _check_coeffs(self, coeffs: dict, where: str) -> None:
        for name, coef in coeffs.items():
            if name in self.blocks:
                n = self.blocks[name]
                a = np.asarray(coef)
                if a.shape != (n, n):
                    raise MalformedProblem(f"{where}: coefficient of {name!r} has shape {a.shape}, block is {n}x{n}")
                scale = max(float(np.max(np.abs(a))), 1e-300)
                if np.max(np.abs(a - herm(a))) > HERMITIAN_RTOL * scale:
                    raise MalformedProblem(f"{where}: coefficient of {name!r} is not Hermitian")
                if not np.all(np.isfinite(a)):
                    raise MalformedProblem(f"{where}: non-finite coefficient for {name!r}")
            elif name in self.scalars:
                if not np.isfinite(float(coef)):
                    raise MalformedProblem(f"{where}: non-finite coefficient for {name!r}")
            else:
                raise MalformedProblem(f"{where}: unknown variable {name!r}")

    def validate(self) -> None:
        self._check_coeffs(self.objective, "objective")
        for k, con in enumerate(self.constraints):
            self._check_coeffs(con.coeffs, f"constraint {k}")
            if not np.isfinite(con.rhs):
                raise MalformedProblem(f"constraint {k}: non-finite right-hand side")
        for block, i, j, value in self.fixed_entries:
            if block not in self.blocks:
                raise MalformedProblem(f"fixed entry on unknown block {block!r}")
            n = self.blocks[block]
            if not (0 <= i < n and 0 <= j < n):
                raise MalformedProblem(f"fixed entry ({i},{j}) outside {block!r}")
            if i == j and abs(value.imag) > 0:
                raise MalformedProblem(f"diagonal fixed entry ({i},{i}) of {block!r} must be real")

    def constraint_norm(self, con: Constraint) -> float:
        """Euclidean norm of a constraint's coefficients across all variables."""
        total = 0.0
        for name, coef in con.coeffs.items():
            if name in self.blocks:
                total += float(np.sum(np.abs(np.asarray(coef)) ** 2))
            else:
                total += float(coef) ** 2
        return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# standard form
# ---------------------------------------------------------------------------
@dataclass
class StandardForm:
    """Data of the standard primal form, rows already normalised."""

    dims: list[int]
    #: per block: (row indices, stacked dense coefficient matrices)
    dense_rows: list[np.ndarray]
    dense_mats: list[np.ndarray]
    #: per block: (row indices, diagonal positions, coefficients)
    diag_rows: list[np.ndarray]
    diag_pos: list[np.ndarray]
    diag_coef: list[np.ndarray]
    a_lp: np.ndarray  # m x n_lp
    b: np.ndarray
    c_blocks: list[np.ndarray]
    c_lp: np.ndarray

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def n_lp(self) -> int:
        return self.c_lp.size

    def a_op(self, xs: list[np.ndarray], x_lp: np.ndarray) -> np.ndarray:
        out = self.a_lp @ x_lp if self.n_lp else np.zeros(self.m)
        for blk, x in enumerate(xs):
            rows = self.dense_rows[blk]
            if rows.size:
                vals = np.real(np.einsum("kij,ji->k", self.dense_mats[blk], x))
                np.add.at(out, rows, vals)
            drows = self.diag_rows[blk]
            if drows.size:
                vals = self.diag_coef[blk] * np.real(x[self.diag_pos[blk], self.diag_pos[blk]])
                np.add.at(out, drows, vals)
        return out

    def at_op(self, y: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        mats = []
        for blk, n in enumerate(self.dims):
            s = np.zeros((n, n), dtype=complex)
            rows = self.dense_rows[blk]
            if rows.size:
                s += np.tensordot(y[rows], self.dense_mats[blk], axes=1)
            drows = self.diag_rows[blk]
            if drows.size:
                np.add.at(s, (self.diag_pos[blk], self.diag_pos[blk]), self.diag_coef[blk] * y[drows])
            mats.append(s)
        vec = self.a_lp.T @ y if self.n_lp else np.zeros(0)
        return mats, vec


@dataclass
class _ScalarMap:
    offset: float
    terms: list  # (lp index, coefficient)


@dataclass
class Compiled:
    sf: StandardForm
    block_names: list[str]
    scalar_maps: dict
    row_scale: np.ndarray  # original row i = normalised row i * row_scale[i]
    user_rows: int  # rows coming from user constraints and fixed entries
    obj_offset: float
    obj_sign: float


def compile_problem(problem: ConicProblem) -> Compiled:
    """Lower ``problem`` to :class:`StandardForm` with unit-norm rows."""
    problem.validate()
    block_names = list(problem.blocks)
    bidx = {name: k for k, name in enumerate(block_names)}
    dims = [problem.blocks[name] for name in block_names]

    n_lp = 0
    scalar_maps: dict[str, _ScalarMap] = {}
    bound_rows = []  # (lp index, coef, rhs) rows x_j + slack = u - l
    for name, (lo, hi) in problem.scalars.items():
        if np.isfinite(lo):
            scalar_maps[name] = _ScalarMap(lo, [(n_lp, 1.0)])
            if np.isfinite(hi):
                bound_rows.append((n_lp, hi - lo))
            n_lp += 1
        elif np.isfinite(hi):
            scalar_maps[name] = _ScalarMap(hi, [(n_lp, -1.0)])
            n_lp += 1
        else:
            scalar_maps[name] = _ScalarMap(0.0, [(n_lp, 1.0), (n_lp + 1, -1.0)])
            n_lp += 2

    # rows: user constraints, fixed entries, scalar upper bounds
    rows_blocks: list[dict] = []  # block idx -> dense matrix or ("diag", pos, coef)
    rows_lp: list[dict] = []
    rhs: list[float] = []
    n_slack = sum(1 for c in problem.constraints if c.sense != "==") + len(bound_rows)
    slack_base = n_lp
    n_lp_total = n_lp + n_slack
    slack = slack_base

    for con in problem.constraints:
        rb: dict = {}
        rl: dict = {}
        r = con.rhs
        for name, coef in con.coeffs.items():
            if name in bidx:
                a = np.asarray(coef, dtype=complex)
                a = 0.5 * (a + herm(a))
                if np.any(a):
                    rb[bidx[name]] = a
            else:
                coef = float(coef)
                sm = scalar_maps[name]
                r -= coef * sm.offset
                for j, t in sm.terms:
                    rl[j] = rl.get(j, 0.0) + coef * t
        if con.sense == "<=":
            rl[slack] = 1.0
            slack += 1
        elif con.sense == ">=":
            rl[slack] = -1.0
            slack += 1
        rows_blocks.append(rb)
        rows_lp.append(rl)
        rhs.append(r)

    for block, i, j, value in problem.fixed_entries:
        k = bidx[block]
        n = dims[k]
        if i == j:
            rows_blocks.append({k: ("diag", i, 1.0)})
            rows_lp.append({})
            rhs.append(value.real)
        else:
            re = np.zeros((n, n), dtype=complex)
            re[i, j] = re[j, i] = 0.5
            im = np.zeros((n, n), dtype=complex)
            im[i, j] = 0.5j
            im[j, i] = -0.5j
            for mat, val in ((re, value.real), (im, value.imag)):
                rows_blocks.append({k: mat})
                rows_lp.append({})
                rhs.append(val)
    user_rows = len(rhs)

    for j, width in bound_rows:
        rows_blocks.append({})
        rows_lp.append({j: 1.0, slack: 1.0})
        slack += 1
        rhs.append(width)

    m = len(rhs)
    a_lp = np.zeros((m, n_lp_total))
    for i, rl in enumerate(rows_lp):
        for j, v in rl.items():
            a_lp[i, j] += v

    # row norms
    norms = np.zeros(m)
    for i in range(m):
        total = float(np.sum(a_lp[i] ** 2))
        for k, coef in rows_blocks[i].items():
            if isinstance(coef, tuple):
                total += coef[2] ** 2
            else:
                total += float(np.sum(np.abs(coef) ** 2))
        norms[i] = np.sqrt(total)
    if np.any(norms == 0.0):
        bad = [i for i in range(m) if norms[i] == 0.0]
        for i in bad:
            if abs(rhs[i]) > 0:
                raise MalformedProblem(f"row {i} has no coefficients but non-zero right-hand side")
        norms[norms == 0.0] = 1.0
    a_lp /= norms[:, None]
    b = np.asarray(rhs) / norms

    dense_rows, dense_mats, diag_rows, diag_pos, diag_coef = [], [], [], [], []
    for k, n in enumerate(dims):
        dr, dm, gr, gp, gc = [], [], [], [], []
        for i in range(m):
            coef = rows_blocks[i].get(k)
            if coef is None:
                continue
            if isinstance(coef, tuple):
                gr.append(i)
                gp.append(coef[1])
                gc.append(coef[2] / norms[i])
            else:
                dr.append(i)
                dm.append(coef / norms[i])
        dense_rows.append(np.asarray(dr, dtype=int))
        dense_mats.append(np.asarray(dm, dtype=complex).reshape(len(dm), n, n))
        diag_rows.append(np.asarray(gr, dtype=int))
        diag_pos.append(np.asarray(gp, dtype=int))
        diag_coef.append(np.asarray(gc, dtype=float))

    sign = -1.0 if problem.maximize else 1.0
    c_blocks = [np.zeros((n, n), dtype=complex) for n in dims]
    c_lp = np.zeros(n_lp_total)
    offset = 0.0
    for name, coef in problem.objective.items():
        if name in bidx:
            a = np.asarray(coef, dtype=complex)
            c_blocks[bidx[name]] = sign * 0.5 * (a + herm(a))
        else:
            sm = scalar_maps[name]
            offset += sign * float(coef) * sm.offset
            for j, t in sm.terms:
                c_lp[j] += sign * float(coef) * t

    sf = StandardForm(dims, dense_rows, dense_mats, diag_rows, diag_pos, diag_coef, a_lp, b, c_blocks, c_lp)
    return Compiled(sf, block_names, scalar_maps, norms, user_rows, offset, sign)

"""Primal-dual interior-point core for the standard form in :mod:`.problem`.

Infeasible-start path following with the HKM search direction and a
Mehrotra predictor-corrector step.  Blocks stay complex Hermitian; the
Schur complement is the real part of the complex one, which is exactly the
Schur complement of the real symmetric embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..numkit import herm
from .problem import StandardForm, Status

#: ratio below which a diverging iterate is read as an infeasibility ray
RAY_TOL = 1e-9
#: iterations over which the merit must improve tenfold
STALL_WINDOW = 20


@dataclass
class IpmResult:
    status: Status
    xs: list
    x_lp: np.ndarray
    y: np.ndarray
    zs: list
    z_lp: np.ndarray
    iterations: int
    primal_res: float
    dual_res: float
    gap: float
    pobj: float
    dobj: float


@dataclass
class Iterate:
    """Snapshot handed to the optional per-iteration callback (unscaled)."""

    iteration: int
    pobj: float
    dobj: float
    primal_res: float
    dual_res: float
    complementarity: float


def _sym(a):
    return 0.5 * (a + herm(a))


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest ``a`` with ``x + a dx`` PSD (inf if unbounded)."""
    try:
        low = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    t = sla.solve_triangular(low, dx, lower=True)
    t = sla.solve_triangular(low, herm(t), lower=True)
    lam = np.linalg.eigvalsh(_sym(t))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _inner(a, b) -> float:
    return float(np.real(np.sum(a * b.T)))


class _Scaled:
    """Copy of the data with ``b`` and ``C`` scaled to unit norm, so that the
    relative tolerances do not depend on the units of the problem."""

    def __init__(self, sf: StandardForm):
        self.sf = sf
        nb = float(np.linalg.norm(sf.b))
        cn2 = sum(float(np.sum(np.abs(c) ** 2)) for c in sf.c_blocks) + float(np.sum(sf.c_lp**2))
        self.normb = nb if nb > 0 else 1.0
        self.normc = float(np.sqrt(cn2)) if cn2 > 0 else 1.0
        self.b = sf.b / self.normb
        self.c_blocks = [c / self.normc for c in sf.c_blocks]
        self.c_lp = sf.c_lp / self.normc


def _initial_point(data: _Scaled):
    sf = data.sf
    m = sf.m
    xs, zs = [], []
    for k, n in enumerate(sf.dims):
        norms = np.zeros(m)
        if sf.dense_rows[k].size:
            np.add.at(norms, sf.dense_rows[k], np.sum(np.abs(sf.dense_mats[k]) ** 2, axis=(1, 2)))
        if sf.diag_rows[k].size:
            np.add.at(norms, sf.diag_rows[k], sf.diag_coef[k] ** 2)
        norms = np.sqrt(norms)
        touched = norms > 0
        sq = np.sqrt(n)
        xi = max(10.0, sq)
        eta = max(10.0, sq, float(np.linalg.norm(data.c_blocks[k])))
        if np.any(touched):
            xi = max(xi, float(np.max(sq * (1 + np.abs(data.b[touched])) / (1 + norms[touched]))))
            eta = max(eta, float(np.max(norms)))
        xs.append(xi * np.eye(n, dtype=complex))
        zs.append(eta * np.eye(n, dtype=complex))
    if sf.n_lp:
        col = np.linalg.norm(sf.a_lp, axis=0)
        rown = np.linalg.norm(sf.a_lp, axis=1)
        touched = rown > 0
        xi = max(10.0, float(np.max((1 + np.abs(data.b[touched])) / (1 + rown[touched]))) if np.any(touched) else 10.0)
        eta = max(10.0, float(np.max(col)) if col.size else 0.0, float(np.linalg.norm(data.c_lp)))
        x_lp = np.full(sf.n_lp, xi)
        z_lp = np.full(sf.n_lp, eta)
    else:
        x_lp = np.zeros(0)
        z_lp = np.zeros(0)
    return xs, x_lp, np.zeros(m), zs, z_lp


def _schur(sf: StandardForm, xs, zinvs, x_lp, z_lp):
    m = sf.m
    mat = np.zeros((m, m))
    gs = []
    for k in range(len(sf.dims)):
        x, zi = xs[k], zinvs[k]
        dr, gr = sf.dense_rows[k], sf.diag_rows[k]
        g = None
        if dr.size:
            d = sf.dense_mats[k]
            g = x @ d @ zi  # X A_j Z^-1
            mdd = np.real(np.einsum("iab,jba->ij", d, g))
            mat[np.ix_(dr, dr)] += mdd
        if gr.size:
            pos, coef = sf.diag_pos[k], sf.diag_coef[k]
            mgg = np.real(x[np.ix_(pos, pos)] * zi[np.ix_(pos, pos)].T) * np.outer(coef, coef)
            mat[np.ix_(gr, gr)] += mgg
            if dr.size:
                cross = np.real(g[:, pos, pos]) * coef[None, :]
                mat[np.ix_(dr, gr)] += cross
                mat[np.ix_(gr, dr)] += cross.T
        gs.append(g)
    if sf.n_lp:
        w = x_lp / z_lp
        mat += (sf.a_lp * w) @ sf.a_lp.T
    return 0.5 * (mat + mat.T)


class _SchurSolver:
    def __init__(self, mat: np.ndarray):
        self.mat = mat
        self.chol = None
        scale = max(float(np.max(np.abs(np.diag(mat)))), 1e-300)
        for reg in (0.0, 1e-14, 1e-12, 1e-10):
            try:
                self.chol = sla.cho_factor(mat + reg * scale * np.eye(mat.shape[0]), lower=True)
                break
            except np.linalg.LinAlgError:
                continue

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.chol is not None:
            sol = sla.cho_solve(self.chol, rhs)
            # one step of iterative refinement
            sol += sla.cho_solve(self.chol, rhs - self.mat @ sol)
            return sol
        return np.linalg.lstsq(self.mat, rhs, rcond=None)[0]


def solve_standard(sf: StandardForm, tol: float = 1e-8, max_iters: int = 100, start=None, callback=None) -> IpmResult:
    """Solve the standard-form pair to relative accuracy ``tol``.

    ``start`` may supply ``(xs, x_lp, y, zs, z_lp)`` in the units of ``sf``;
    ``callback`` receives an :class:`Iterate` after every residual evaluation.
    """
    data = _Scaled(sf)
    b = data.b
    cb, cl = data.c_blocks, data.c_lp
    nb = len(sf.dims)
    nu = sum(sf.dims) + sf.n_lp
    m = sf.m

    if start is None:
        xs, x_lp, y, zs, z_lp = _initial_point(data)
    else:
        xs, x_lp, y, zs, z_lp = start
        xs = [np.asarray(x, dtype=complex) / data.normb for x in xs]
        x_lp = np.asarray(x_lp, dtype=float) / data.normb
        y = np.asarray(y, dtype=float) / data.normc
        zs = [np.asarray(z, dtype=complex) / data.normc for z in zs]
        z_lp = np.asarray(z_lp, dtype=float) / data.normc

    normb1 = 1.0 + float(np.linalg.norm(b))
    normc1 = 1.0 + float(np.sqrt(sum(float(np.sum(np.abs(c) ** 2)) for c in cb) + float(np.sum(cl**2))))

    status = Status.MAX_ITERATIONS
    relp = reld = relgap = np.inf
    pobj = dobj = 0.0
    stall = 0
    merits = []
    it = 0
    for it in range(max_iters + 1):
        ax = sf.a_op(xs, x_lp)
        rp = b - ax
        aty, aty_lp = sf.at_op(y)
        rds = [cb[k] - aty[k] - zs[k] for k in range(nb)]
        rd_lp = cl - aty_lp - z_lp
        pobj = sum(_inner(cb[k], xs[k]) for k in range(nb)) + float(cl @ x_lp)
        dobj = float(b @ y)
        comp = sum(_inner(xs[k], zs[k]) for k in range(nb)) + float(x_lp @ z_lp)
        relp = float(np.linalg.norm(rp)) / normb1
        dres = np.sqrt(sum(float(np.sum(np.abs(r) ** 2)) for r in rds) + float(np.sum(rd_lp**2)))
        reld = float(dres) / normc1
        denom = 1.0 + abs(pobj) + abs(dobj)
        relgap = max(abs(pobj - dobj), abs(comp)) / denom
        if callback is not None:
            callback(
                Iterate(
                    it,
                    pobj * data.normb * data.normc,
                    dobj * data.normb * data.normc,
                    relp,
                    reld,
                    comp * data.normb * data.normc,
                )
            )
        if relp <= tol and reld <= tol and relgap <= tol:
            # the same test in the caller's units, where the "1 +" terms differ
            sb, sc = data.normb, data.normc
            up = float(np.linalg.norm(rp)) * sb / (1.0 + (normb1 - 1.0) * sb)
            ud = float(dres) * sc / (1.0 + (normc1 - 1.0) * sc)
            ug = max(abs(pobj - dobj), abs(comp)) * sb * sc / (1.0 + (abs(pobj) + abs(dobj)) * sb * sc)
            if max(up, ud, ug) <= tol:
                status = Status.OPTIMAL
                break
        # infeasibility rays
        if dobj > 0:
            ray = np.sqrt(sum(float(np.sum(np.abs(aty[k] + zs[k]) ** 2)) for k in range(nb)) + float(np.sum((aty_lp + z_lp) ** 2)))
            if ray / dobj < RAY_TOL:
                status = Status.INFEASIBLE
                break
        if pobj < 0:
            if float(np.linalg.norm(ax)) / (-pobj) < RAY_TOL:
                status = Status.UNBOUNDED
                break
        merits.append(max(relp, reld, relgap))
        # no tenfold progress over STALL_WINDOW iterations: give up
        if it >= STALL_WINDOW and merits[-1] > 0.1 * merits[-1 - STALL_WINDOW]:
            break
        if it == max_iters or stall >= 4:
            break

        mu = comp / nu
        try:
            zinvs = [_sym(np.linalg.inv(z)) for z in zs]
            zinv_lp = 1.0 / z_lp if sf.n_lp else z_lp
            schur = _SchurSolver(_schur(sf, xs, zinvs, x_lp, z_lp))
        except np.linalg.LinAlgError:
            # an iterate reached the cone boundary numerically
            break

        def direction(rcs, rc_lp):
            # rhs = b - A(Rc Z^-1) + A(X Rd Z^-1)
            t_rc = [(rcs[k] @ zinvs[k]) if rcs[k] is not None else np.zeros_like(xs[k]) for k in range(nb)]
            t_rd = [xs[k] @ rds[k] @ zinvs[k] for k in range(nb)]
            lp_rc = rc_lp * zinv_lp if sf.n_lp else x_lp
            lp_rd = x_lp * rd_lp * zinv_lp if sf.n_lp else x_lp
            rhs = b - sf.a_op(t_rc, lp_rc) + sf.a_op(t_rd, lp_rd)
            dy = schur.solve(rhs)
            at_dy, at_dy_lp = sf.at_op(dy)
            dzs = [rds[k] - at_dy[k] for k in range(nb)]
            dxs = [_sym(t_rc[k] - xs[k] - xs[k] @ dzs[k] @ zinvs[k]) for k in range(nb)]
            dz_lp = rd_lp - at_dy_lp
            dx_lp = lp_rc - x_lp - x_lp * dz_lp * zinv_lp if sf.n_lp else x_lp
            return dxs, dx_lp, dy, dzs, dz_lp

        def steps(dxs, dx_lp, dzs, dz_lp):
            ap = min([_max_step(xs[k], dxs[k]) for k in range(nb)] + [_max_step_lp(x_lp, dx_lp), np.inf])
            ad = min([_max_step(zs[k], dzs[k]) for k in range(nb)] + [_max_step_lp(z_lp, dz_lp), np.inf])
            return ap, ad

        # predictor
        dxa, dxa_lp, _, dza, dza_lp = direction([None] * nb, np.zeros(sf.n_lp))
        ap, ad = steps(dxa, dxa_lp, dza, dza_lp)
        ap1, ad1 = min(1.0, ap), min(1.0, ad)
        comp_aff = sum(_inner(xs[k] + ap1 * dxa[k], zs[k] + ad1 * dza[k]) for k in range(nb))
        comp_aff += float((x_lp + ap1 * dxa_lp) @ (z_lp + ad1 * dza_lp))
        sigma = float(np.clip((max(comp_aff, 0.0) / max(comp, 1e-300)) ** 3, 0.0, 1.0))
        if relp > 1e3 * max(relgap, tol):  # far from feasible: do not centre too aggressively
            sigma = max(sigma, 0.1)

        # corrector
        rcs = [sigma * mu * np.eye(n) - dxa[k] @ dza[k] for k, n in enumerate(sf.dims)]
        rc_lp = sigma * mu - dxa_lp * dza_lp
        dxs, dx_lp, dy, dzs, dz_lp = direction(rcs, rc_lp)
        ap, ad = steps(dxs, dx_lp, dzs, dz_lp)
        gamma = 0.9 + 0.09 * min(1.0, ap1, ad1)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if ap < 1e-10 and ad < 1e-10:
            stall += 1
        else:
            stall = 0

        xs = [_sym(xs[k] + ap * dxs[k]) for k in range(nb)]
        x_lp = x_lp + ap * dx_lp
        y = y + ad * dy
        zs = [_sym(zs[k] + ad * dzs[k]) for k in range(nb)]
        z_lp = z_lp + ad * dz_lp

    sb, sc = data.normb, data.normc
    return IpmResult(
        status,
        [x * sb for x in xs],
        x_lp * sb,
        y * sc,
        [z * sc for z in zs],
        z_lp * sc,
        it,
        relp,
        reld,
        relgap,
        pobj * sb * sc,
        dobj * sb * sc,
    )


__all__ = ["solve_standard", "IpmResult", "Iterate"]

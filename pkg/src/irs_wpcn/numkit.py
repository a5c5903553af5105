"""Dense complex-Hermitian linear algebra used throughout the package.

Hermitian matrices are carried as plain ``numpy`` arrays.  Every entry point
checks the symmetry of its input, then works on the symmetrised copy
``(A + A^H) / 2`` so solver round-off never leaks into a decomposition.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NonHermitianInput, NotPsd, NotRankOne

#: relative asymmetry accepted before an input is rejected as non-Hermitian
HERMITIAN_RTOL = 1e-9
#: default cutoff for counting an eigenvalue towards the numerical rank
RANK_RTOL = 1e-6


class Eigh(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


class Norms(NamedTuple):
    spectral: float
    nuclear: float
    frobenius: float


def herm(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.swapaxes(x, -1, -2))


def hermitize(a, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Validate that ``a`` is square and Hermitian and return ``(a + a^H)/2``.

    Raises
    ------
    NonHermitianInput
        If ``a`` is not square or its anti-Hermitian part exceeds
        ``rtol`` times the largest entry magnitude.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NonHermitianInput(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonHermitianInput("matrix has non-finite entries")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    skew = float(np.max(np.abs(a - herm(a))))
    if skew > rtol * max(scale, 1e-300) and skew > 1e-300:
        raise NonHermitianInput(f"asymmetry {skew:.3e} exceeds tolerance (scale {scale:.3e})")
    return 0.5 * (a + herm(a))


def herm_eig(a) -> Eigh:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with ``a = U diag(values) U^H`` and the
    columns of ``U`` orthonormal.
    """
    h = hermitize(a)
    w, u = np.linalg.eigh(h)
    order = np.arange(w.size)[::-1]
    return Eigh(w[order].astype(float), u[:, order])


def matrix_norms(a) -> Norms:
    """Spectral, nuclear and Frobenius norms of a Hermitian matrix.

    For Hermitian input the singular values are the absolute eigenvalues.
    """
    w = np.abs(herm_eig(a).values)
    return Norms(float(w.max()), float(w.sum()), float(np.sqrt(np.sum(w**2))))


def spectral_norm(a) -> float:
    return matrix_norms(a).spectral


def numeric_rank(a, rel_tol: float = RANK_RTOL) -> int:
    """Number of eigenvalues ``> rel_tol * lambda_max`` (0 for the zero matrix)."""
    w = herm_eig(a).values
    top = w[0]
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(w > rel_tol * top))


def psd_factors(a, rel_tol: float = RANK_RTOL) -> list[np.ndarray]:
    """Return vectors ``sqrt(l_i) u_i`` for every eigenvalue above the rank cutoff."""
    w, u = herm_eig(a)
    if w[0] <= 0.0:
        return []
    keep = w > rel_tol * w[0]
    return [np.sqrt(w[i]) * u[:, i] for i in np.flatnonzero(keep)]


def check_psd(a, rel_tol: float = RANK_RTOL) -> np.ndarray:
    """Raise ``NotPsd`` when the smallest eigenvalue is below ``-rel_tol * trace``."""
    h = hermitize(a)
    w = np.linalg.eigvalsh(h)
    tr = float(np.real(np.trace(h)))
    if w[0] < -rel_tol * max(abs(tr), 1e-300):
        raise NotPsd(f"smallest eigenvalue {w[0]:.3e} (trace {tr:.3e})")
    return h


def rank_one_factor(a, rel_tol: float = RANK_RTOL) -> np.ndarray:
    """Dominant factor ``sqrt(l1) u1`` of a numerically rank-one PSD matrix.

    Raises
    ------
    NotPsd
        If ``a`` has an eigenvalue below ``-rel_tol * trace``.
    NotRankOne
        If the second eigenvalue exceeds ``rel_tol * l1``.
    """
    h = check_psd(a, rel_tol)
    w, u = herm_eig(h)
    if w[0] <= 0.0:
        raise NotRankOne("zero matrix has rank 0")
    if w.size > 1 and w[1] > rel_tol * w[0]:
        raise NotRankOne(f"second eigenvalue ratio {w[1] / w[0]:.3e} > {rel_tol:.1e}")
    return np.sqrt(w[0]) * u[:, 0]


def dominant_eigvec(a) -> np.ndarray:
    """Unit eigenvector of the largest eigenvalue."""
    return herm_eig(a).vectors[:, 0]


def outer(x: np.ndarray) -> np.ndarray:
    """``x x^H`` for a 1-d vector."""
    x = np.asarray(x)
    return np.outer(x, np.conj(x))


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real trace pairing ``Re tr(a b)`` of two Hermitian matrices."""
    return float(np.real(np.sum(a * b.T)))


def real_embedding(a: np.ndarray) -> np.ndarray:
    """Map an ``n x n`` Hermitian matrix to the ``2n x 2n`` real symmetric
    matrix ``[[Re, -Im], [Im, Re]]``.

    The embedding preserves eigenvalues (each doubled) and PSD-ness, and
    ``tr(A X) = tr(emb(A) emb(X)) / 2``.
    """
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


def from_real_embedding(r: np.ndarray) -> np.ndarray:
    """Inverse of :func:`real_embedding`, projecting onto the complex structure."""
    n = r.shape[0] // 2
    a, b, c, d = r[:n, :n], r[:n, n:], r[n:, :n], r[n:, n:]
    return 0.5 * (a + d) + 0.5j * (c - b)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (g + herm(g))


def random_psd(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    r = n if rank is None else rank
    g = (rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))) / np.sqrt(2)
    return g @ herm(g)

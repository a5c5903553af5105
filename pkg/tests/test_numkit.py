import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_wpcn.errors import NonHermitianInput, NotPsd, NotRankOne
from irs_wpcn.numkit import (
    check_psd,
    dominant_eigvec,
    from_real_embedding,
    herm_eig,
    hermitize,
    inner,
    matrix_norms,
    numeric_rank,
    outer,
    random_hermitian,
    random_psd,
    rank_one_factor,
    real_embedding,
    spectral_norm,
)

from conftest import crandn


def test_eig_identity_and_diagonal():
    w, u = herm_eig(np.eye(3))
    assert np.allclose(w, 1.0)
    assert np.allclose(u.conj().T @ u, np.eye(3))
    w, u = herm_eig(np.diag([1.0, 3.0]))
    assert np.allclose(w, [3.0, 1.0])
    assert np.allclose(np.abs(u), [[0, 1], [1, 0]])


@pytest.mark.parametrize("n", [1, 2, 6, 20, 61])
def test_eig_reconstruction(rng, n):
    a = random_hermitian(n, rng)
    w, u = herm_eig(a)
    assert np.all(np.diff(w) <= 0)
    nrm = np.linalg.norm(a, 2)
    assert np.linalg.norm(u @ np.diag(w) @ u.conj().T - a) <= 1e-10 * (1 + nrm)
    assert np.linalg.norm(u.conj().T @ u - np.eye(n)) <= 1e-10


def test_eig_rejects_non_hermitian(rng):
    a = crandn(rng, 3, 3)
    with pytest.raises(NonHermitianInput):
        herm_eig(a)


def test_hermitize_averages_roundoff(rng):
    a = random_hermitian(4, rng)
    b = a + 1e-13 * crandn(rng, 4, 4)
    h = hermitize(b)
    assert np.allclose(h, h.conj().T, atol=0)


def test_norms_examples():
    nr = matrix_norms(np.eye(3))
    assert (nr.spectral, nr.nuclear) == pytest.approx((1.0, 3.0))
    assert nr.frobenius == pytest.approx(np.sqrt(3))
    v = np.array([1.0, 1.0j])
    nr = matrix_norms(outer(v))
    assert (nr.spectral, nr.nuclear, nr.frobenius) == pytest.approx((2.0, 2.0, 2.0))


def test_norms_match_singular_values(rng):
    a = random_hermitian(7, rng)
    s = np.linalg.svd(a, compute_uv=False)
    nr = matrix_norms(a)
    assert nr.spectral == pytest.approx(s[0], abs=1e-10)
    assert nr.nuclear == pytest.approx(s.sum(), abs=1e-10)
    assert nr.frobenius == pytest.approx(np.sqrt((s**2).sum()), abs=1e-10)
    assert spectral_norm(a) == pytest.approx(s[0], abs=1e-10)


def test_psd_trace_equals_nuclear(rng):
    p = random_psd(9, rng)
    tr = np.real(np.trace(p))
    assert tr - matrix_norms(p).nuclear <= 1e-9 * (1 + tr)


def test_rank_one_factor_examples(rng):
    v = crandn(rng, 5)
    f = rank_one_factor(outer(v))
    assert np.linalg.norm(outer(f) - outer(v)) <= 1e-9 * np.vdot(v, v).real
    with pytest.raises(NotRankOne):
        rank_one_factor(np.eye(2), 1e-6)
    noisy = outer(v) + 1e-9 * np.eye(5)
    f = rank_one_factor(noisy, 1e-6)
    assert np.linalg.norm(noisy - outer(f), 2) <= 2e-9 * 5


def test_rank_one_factor_rejects_indefinite():
    with pytest.raises(NotPsd):
        rank_one_factor(np.diag([1.0, -0.5]))
    with pytest.raises(NotPsd):
        check_psd(np.diag([1.0, -0.5]))


def test_numeric_rank_and_dominant(rng):
    u = np.linalg.qr(crandn(rng, 6, 6))[0]
    a = 3 * outer(u[:, 0]) + outer(u[:, 1])
    assert numeric_rank(a) == 2
    d = dominant_eigvec(a)
    assert abs(abs(np.vdot(d, u[:, 0])) - 1) < 1e-12


def test_real_embedding_preserves_pairings(rng):
    a = random_hermitian(5, rng)
    x = random_psd(5, rng)
    ea, ex = real_embedding(a), real_embedding(x)
    assert inner(a, x) == pytest.approx(0.5 * np.trace(ea @ ex), abs=1e-12)
    assert np.allclose(from_real_embedding(ex), x, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), rank=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_trace_minus_spectral_zero_iff_rank_one(n, rank, seed):
    rng = np.random.default_rng(seed)
    rank = min(rank, n)
    f = crandn(rng, n, rank)
    f = f / np.abs(f).max(axis=1, keepdims=True).clip(1e-3)
    x = f @ f.conj().T
    d = np.sqrt(np.real(np.diag(x)))
    x = x / np.outer(d, d)  # unit diagonal
    w = herm_eig(x).values
    gap = float(np.real(np.trace(x)) - w[0])
    if rank == 1:
        assert gap <= 1e-8 * n
    else:
        assert gap > 1e-8 and numeric_rank(x, 1e-8) > 1


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 10), seed=st.integers(0, 10**6))
def test_spectral_subgradient_inequality(n, seed):
    rng = np.random.default_rng(seed)
    m = random_psd(n, rng)
    d = random_hermitian(n, rng)
    u = herm_eig(m).vectors[:, 0]
    lhs = herm_eig(m + d).values[0]
    assert lhs >= herm_eig(m).values[0] + inner(outer(u), d) - 1e-10

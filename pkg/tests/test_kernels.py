"""Numba and numpy kernels must agree; both are always importable."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayesur import _kernels

needs_numba = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba unavailable")


def _alphas(rng, n, scale=2.0):
    a = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
    a[0] = 0.0
    return a


@needs_numba
def test_coherent_vectors_parity():
    rng = np.random.default_rng(0)
    alphas = _alphas(rng, 50)
    a = _kernels.numpy_impl.coherent_vectors(alphas, 30)
    b = _kernels.numba_impl.coherent_vectors(alphas, 30)
    assert np.allclose(a, b, atol=1e-12)


@needs_numba
def test_quadratic_forms_parity():
    rng = np.random.default_rng(1)
    ops = rng.normal(size=(5, 12, 12)) + 1j * rng.normal(size=(5, 12, 12))
    ops = ops + ops.conj().transpose(0, 2, 1)
    vecs = rng.normal(size=(40, 12)) + 1j * rng.normal(size=(40, 12))
    assert np.allclose(_kernels.numpy_impl.quadratic_forms(ops, vecs),
                       _kernels.numba_impl.quadratic_forms(ops, vecs), atol=1e-10)


@needs_numba
def test_rank_one_sum_parity():
    rng = np.random.default_rng(2)
    vecs = rng.normal(size=(30, 9)) + 1j * rng.normal(size=(30, 9))
    w = rng.random(30)
    w[3] = 0.0
    a = _kernels.numpy_impl.rank_one_sum(vecs, w)
    b = _kernels.numba_impl.rank_one_sum(vecs, w)
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(a, a.conj().T)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-np.pi, np.pi), st.integers(2, 50))
def test_coherent_vectors_normalized(r, phi, d):
    alpha = np.array([r * np.exp(1j * phi)])
    for impl in filter(None, (_kernels.numpy_impl, _kernels.numba_impl)):
        v = impl.coherent_vectors(alpha, d)[0]
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_backend_flag(monkeypatch):
    monkeypatch.setenv("BAYESUR_DISABLE_NUMBA", "1")
    assert _kernels._select() is _kernels.numpy_impl
    monkeypatch.setenv("BAYESUR_DISABLE_NUMBA", "0")
    expected = _kernels.numba_impl or _kernels.numpy_impl
    assert _kernels._select() is expected

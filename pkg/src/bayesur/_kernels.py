"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``BAYESUR_DISABLE_NUMBA`` is unset (or ``0``).  Both
implementations are always importable as ``numpy_impl`` / ``numba_impl`` so
the benchmark and tests can compare them directly.

Kernels
-------
coherent_vectors(alphas, cutoff, normalize=True)
    Truncated Fock amplitudes of coherent states, renormalized to unit norm
    unless ``normalize`` is false (exact projections ``P_d |alpha>``).
quadratic_forms(ops, vecs)
    ``Re <v_k| A_l |v_k>`` for a stack of Hermitian operators.
rank_one_sum(vecs, weights)
    ``sum_k w_k |v_k><v_k|``.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np
from scipy.special import gammaln


def _coherent_vectors_np(alphas, cutoff, normalize=True):
    alphas = np.asarray(alphas, dtype=np.complex128).ravel()
    n = np.arange(cutoff)
    mod = np.abs(alphas)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmod = np.log(mod)
        logc = -0.5 * mod[:, None] ** 2 + n[None, :] * logmod[:, None] - 0.5 * gammaln(n + 1)[None, :]
    # alpha == 0 gives 0 * -inf at n == 0
    logc[mod == 0.0, 0] = 0.0
    logc[mod == 0.0, 1:] = -np.inf
    if normalize:
        logc -= logc.max(axis=1, keepdims=True)
    amp = np.exp(logc)
    if normalize:
        amp /= np.sqrt((amp**2).sum(axis=1, keepdims=True))
    phase = np.exp(1j * n[None, :] * np.angle(alphas)[:, None])
    return amp * phase


def _quadratic_forms_np(ops, vecs):
    ops = np.asarray(ops, dtype=np.complex128)
    vecs = np.asarray(vecs, dtype=np.complex128)
    # (A v)_i = sum_j A_ij v_j  ->  vecs @ A.T
    av = np.einsum("lij,kj->lki", ops, vecs, optimize=True)
    return np.einsum("ki,lki->lk", vecs.conj(), av, optimize=True).real


def _rank_one_sum_np(vecs, weights):
    vecs = np.asarray(vecs, dtype=np.complex128)
    weights = np.asarray(weights, dtype=np.float64)
    return (vecs.T * weights) @ vecs.conj()


numpy_impl = SimpleNamespace(
    name="numpy",
    coherent_vectors=_coherent_vectors_np,
    quadratic_forms=_quadratic_forms_np,
    rank_one_sum=_rank_one_sum_np,
)

numba_impl = None
try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

if njit is not None:

    @njit(cache=True)
    def _coherent_vectors_nb(alphas, cutoff, normalize):
        k_count = alphas.shape[0]
        out = np.zeros((k_count, cutoff), dtype=np.complex128)
        logc = np.empty(cutoff)
        for k in range(k_count):
            a = alphas[k]
            mod = abs(a)
            if mod == 0.0:
                out[k, 0] = 1.0
                continue
            logmod = math.log(mod)
            theta = math.atan2(a.imag, a.real)
            top = -np.inf
            for n in range(cutoff):
                logc[n] = -0.5 * mod * mod + n * logmod - 0.5 * math.lgamma(n + 1.0)
                if logc[n] > top:
                    top = logc[n]
            if not normalize:
                top = 0.0
            norm = 0.0
            for n in range(cutoff):
                logc[n] = math.exp(logc[n] - top)
                norm += logc[n] * logc[n]
            norm = math.sqrt(norm) if normalize else 1.0
            for n in range(cutoff):
                out[k, n] = (logc[n] / norm) * complex(math.cos(n * theta), math.sin(n * theta))
        return out

    @njit(cache=True)
    def _quadratic_forms_nb(ops, vecs):
        n_ops, dim, _ = ops.shape
        k_count = vecs.shape[0]
        out = np.empty((n_ops, k_count))
        for k in range(k_count):
            v = vecs[k]
            for l in range(n_ops):
                acc = 0.0
                for i in range(dim):
                    row = 0.0 + 0.0j
                    for j in range(dim):
                        row += ops[l, i, j] * v[j]
                    acc += (v[i].conjugate() * row).real
                out[l, k] = acc
        return out

    @njit(cache=True)
    def _rank_one_sum_nb(vecs, weights):
        k_count, dim = vecs.shape
        out = np.zeros((dim, dim), dtype=np.complex128)
        for k in range(k_count):
            w = weights[k]
            if w == 0.0:
                continue
            for i in range(dim):
                vi = w * vecs[k, i]
                for j in range(i, dim):
                    out[i, j] += vi * vecs[k, j].conjugate()
        for i in range(dim):
            for j in range(i + 1, dim):
                out[j, i] = out[i, j].conjugate()
        return out

    def _coherent_vectors_nb_wrap(alphas, cutoff, normalize=True):
        return _coherent_vectors_nb(np.ascontiguousarray(np.ravel(alphas), dtype=np.complex128), int(cutoff),
                                    bool(normalize))

    def _quadratic_forms_nb_wrap(ops, vecs):
        return _quadratic_forms_nb(
            np.ascontiguousarray(ops, dtype=np.complex128), np.ascontiguousarray(vecs, dtype=np.complex128)
        )

    def _rank_one_sum_nb_wrap(vecs, weights):
        return _rank_one_sum_nb(
            np.ascontiguousarray(vecs, dtype=np.complex128), np.ascontiguousarray(weights, dtype=np.float64)
        )

    numba_impl = SimpleNamespace(
        name="numba",
        coherent_vectors=_coherent_vectors_nb_wrap,
        quadratic_forms=_quadratic_forms_nb_wrap,
        rank_one_sum=_rank_one_sum_nb_wrap,
    )


def _select():
    flag = os.environ.get("BAYESUR_DISABLE_NUMBA", "0").strip().lower()
    if numba_impl is None or flag not in ("", "0", "false", "no"):
        return numpy_impl
    return numba_impl


active = _select()
BACKEND = active.name


def coherent_vectors(alphas, cutoff, normalize=True):
    return active.coherent_vectors(alphas, cutoff, normalize)


def quadratic_forms(ops, vecs):
    return active.quadratic_forms(ops, vecs)


def rank_one_sum(vecs, weights):
    return active.rank_one_sum(vecs, weights)

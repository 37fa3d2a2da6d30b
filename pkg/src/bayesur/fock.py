"""Truncated Fock-space linear algebra.

Operators are plain complex numpy arrays.  A :class:`FockSpace` only carries
the shape bookkeeping (cutoff per mode, number of modes) needed to build
ladder operators on one mode of a multimode register.  Units follow the
``hbar = 1`` convention, so ``[x, p] = i`` and the vacuum quadrature
variance is 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.special import gammainc
from scipy.linalg import expm

from . import _kernels


class TruncationError(ValueError):
    """Raised when the Fock cutoff is too small for the requested state."""


@dataclass(frozen=True)
class FockSpace:
    cutoff: int
    modes: int = 1

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError(f"cutoff must be >= 2, got {self.cutoff}")
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")

    @property
    def dim(self) -> int:
        return self.cutoff**self.modes

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.cutoff,) * self.modes

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.complex128)


def quadrature_means(alpha: complex) -> tuple[float, float]:
    """Mean quadratures ``(x_alpha, p_alpha)`` of the coherent state ``|alpha>``."""
    alpha = complex(alpha)
    return np.sqrt(2.0) * alpha.real, np.sqrt(2.0) * alpha.imag


def _embed(single: np.ndarray, space: FockSpace, mode: int) -> np.ndarray:
    if not 0 <= mode < space.modes:
        raise IndexError(f"mode {mode} out of range for {space.modes}-mode space")
    eye = np.eye(space.cutoff)
    factors = [single if k == mode else eye for k in range(space.modes)]
    return reduce(np.kron, factors).astype(np.complex128)


def annihilation(space: FockSpace, mode: int = 0) -> np.ndarray:
    single = np.diag(np.sqrt(np.arange(1, space.cutoff)), k=1)
    return _embed(single, space, mode)


def number(space: FockSpace, mode: int = 0) -> np.ndarray:
    return _embed(np.diag(np.arange(space.cutoff, dtype=float)), space, mode)


def quadratures(space: FockSpace, mode: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, p)`` with ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(sqrt(2) i)``."""
    a = annihilation(space, mode)
    ad = a.conj().T
    return (a + ad) / np.sqrt(2.0), (a - ad) / (np.sqrt(2.0) * 1j)


def coherent_tail(alpha: complex, cutoff: int) -> float:
    """Poisson mass of ``|alpha>`` on Fock levels ``>= cutoff``."""
    mu = abs(complex(alpha)) ** 2
    if mu == 0.0:
        return 0.0
    return float(gammainc(cutoff, mu))


def coherent_tails(alphas, cutoff: int) -> np.ndarray:
    mu = np.abs(np.asarray(alphas, dtype=np.complex128)) ** 2
    return np.where(mu == 0.0, 0.0, gammainc(cutoff, mu))


def coherent_vector(alpha: complex, cutoff: int) -> tuple[np.ndarray, float]:
    """Renormalized truncated amplitudes of ``|alpha>`` and the discarded tail mass."""
    vec = _kernels.coherent_vectors(np.array([alpha], dtype=np.complex128), cutoff)[0]
    return vec, coherent_tail(alpha, cutoff)


def coherent_state(alpha: complex, space: FockSpace, tol: float = 1e-9) -> np.ndarray:
    if space.modes != 1:
        raise ValueError("coherent_state expects a single-mode space")
    vec, tail = coherent_vector(alpha, space.cutoff)
    if tail > tol:
        raise TruncationError(f"tail mass {tail:.3e} beyond cutoff {space.cutoff} exceeds {tol:.1e}")
    return np.outer(vec, vec.conj())


def thermal_state(mean_photons: float, space: FockSpace) -> np.ndarray:
    if space.modes != 1:
        raise ValueError("thermal_state expects a single-mode space")
    n = np.arange(space.cutoff)
    if mean_photons <= 0:
        pops = (n == 0).astype(float)
    else:
        r = mean_photons / (1.0 + mean_photons)
        pops = (1.0 - r) * r**n
        pops /= pops.sum()
    return np.diag(pops).astype(np.complex128)


def tmsv_coefficients(lam: float, cutoff: int) -> tuple[np.ndarray, float]:
    """Schmidt coefficients of ``sqrt(lam/(1+lam)) sum_n (1+lam)^(-n/2) |n>|n>``.

    Returns the renormalized coefficients and the geometric tail mass
    ``(1+lam)^(-cutoff)`` that truncation discards.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    n = np.arange(cutoff)
    log_r = -np.log1p(lam)
    coeffs = np.exp(0.5 * n * log_r) * np.sqrt(lam / (1.0 + lam))
    tail = float(np.exp(cutoff * log_r))
    return coeffs / np.linalg.norm(coeffs), tail


def two_mode_squeezed_vector(lam: float, space: FockSpace, tol: float = 1e-6) -> np.ndarray:
    if space.modes != 2:
        raise ValueError("two_mode_squeezed expects a two-mode space")
    coeffs, tail = tmsv_coefficients(lam, space.cutoff)
    if tail > tol:
        raise TruncationError(f"geometric tail {tail:.3e} exceeds {tol:.1e}; raise the cutoff")
    d = space.cutoff
    psi = np.zeros(d * d, dtype=np.complex128)
    psi[np.arange(d) * (d + 1)] = coeffs
    return psi


def two_mode_squeezed(lam: float, space: FockSpace, tol: float = 1e-6) -> np.ndarray:
    psi = two_mode_squeezed_vector(lam, space, tol)
    return np.outer(psi, psi.conj())


def beam_splitter(transmittance: float, space: FockSpace) -> np.ndarray:
    """Two-mode beam-splitter unitary.

    Mode operators mix as ``a -> sqrt(T) a - sqrt(1-T) b``,
    ``b -> sqrt(1-T) a + sqrt(T) b``, so coherent amplitudes obey
    ``(alpha, beta) -> (sqrt(T) alpha - sqrt(1-T) beta, sqrt(1-T) alpha + sqrt(T) beta)``
    and ``|alpha>|0>`` at ``T = 1/2`` goes to ``|alpha/sqrt2>|alpha/sqrt2>``.
    Exact on every block of total photon number below the cutoff.
    """
    if space.modes != 2:
        raise ValueError("beam_splitter expects a two-mode space")
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    theta = np.arccos(np.sqrt(transmittance))
    a = annihilation(space, 0)
    b = annihilation(space, 1)
    gen = b.conj().T @ a - a.conj().T @ b
    return expm(theta * gen)


def tensor(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def partial_trace(op: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` gives the subsystem dimensions in kron order; ``keep`` is an
    index or an iterable of indices.  The kept subsystems stay in their
    original order.
    """
    dims = tuple(int(d) for d in dims)
    keep = sorted({keep} if np.isscalar(keep) else set(keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"keep={keep} out of range for {n} subsystems")
    total = int(np.prod(dims))
    if op.shape != (total, total):
        raise ValueError(f"operator shape {op.shape} does not match dims {dims}")
    t = op.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    kept = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.einsum("".join(row) + "".join(col) + "->" + out, t).reshape(kept, kept)


def is_hermitian(op: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol)


def is_positive_semidefinite(op: np.ndarray, tol: float = 1e-10) -> bool:
    if not is_hermitian(op, tol):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (op + op.conj().T)).min() >= -tol)


def is_density(op: np.ndarray, tol: float = 1e-10) -> bool:
    return is_positive_semidefinite(op, tol) and abs(np.trace(op) - 1.0) <= tol


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(op @ rho))


def fidelity_pure(psi: np.ndarray, rho: np.ndarray) -> float:
    """``<psi|rho|psi>`` for a normalized vector ``psi``."""
    return float(np.real(psi.conj() @ rho @ psi))


def suggested_cutoff(alpha_max: float) -> int:
    a = abs(alpha_max)
    return int(np.ceil(a * a + 8 * a + 10))

"""POVM estimators and their equivalence with channel-plus-observable models.

An estimator ``{m_i, X_i, P_i}`` reports ``(X_i, P_i)`` on outcome ``i``.
``estimator_to_model`` wraps it as a measure-and-prepare channel that writes
the outcome into a classical register pair, with ``M`` reading ``X_i`` from
the first register and ``N`` reading ``P_i`` from the second.
``model_to_estimator`` goes the other way: diagonalize the commuting pair
``(M, N)`` jointly and pull each eigenprojector back through the channel.

Note on ordering: the pulled-back effect is ``m_i = sum_j K_j^dag |w_i><w_i| K_j``
(Heisenberg picture).  This is the ordering for which ``sum_i m_i = 1``
follows from ``sum_j K_j^dag K_j = 1``; the Schroedinger-ordered
``K_j |w_i><w_i| K_j^dag`` does not even act on the input space when the
channel changes dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channels import (
    COMPLETENESS_TOL,
    MeasurePrepareChannel,
    PhaseSpaceGrid,
    _trusted_levels,
    effect_sum,
    factorize_psd,
    heterodyne_factors,
)
from .msd import GaussianPrior, MeasurementModel, prior_nodes


class Povm:
    """Effects ``m_i = F_i F_i^dag`` stored as factors of shape ``(n, d, r)``.

    Completeness is checked on the leading Fock levels: every level below
    ``min_trusted`` (default: the whole space) must satisfy
    ``|sum_i m_i - 1| <= tol``.
    """

    def __init__(self, factors, tol: float = COMPLETENESS_TOL, min_trusted: int | None = None):
        factors = np.asarray(factors, dtype=np.complex128)
        if factors.ndim == 2:
            factors = factors[:, :, None]
        if factors.ndim != 3:
            raise ValueError(f"POVM factors must have shape (n, d, r), got {factors.shape}")
        self.factors = factors
        self.tol = tol
        self.trusted_levels = _trusted_levels(self.total() - np.eye(self.dim), tol)
        self.min_trusted = self.dim if min_trusted is None else min(min_trusted, self.dim)
        self.check()

    @classmethod
    def from_elements(cls, elements, tol: float = COMPLETENESS_TOL, min_trusted: int | None = None) -> "Povm":
        return cls(factorize_psd(elements), tol=tol, min_trusted=min_trusted)

    def check(self):
        if self.trusted_levels < self.min_trusted:
            raise ValueError(
                f"POVM incomplete: sum of effects deviates from identity by more than {self.tol:.0e} "
                f"at Fock level {self.trusted_levels}"
            )

    @property
    def n_outcomes(self) -> int:
        return self.factors.shape[0]

    @property
    def dim(self) -> int:
        return self.factors.shape[1]

    @property
    def elements(self) -> np.ndarray:
        return np.einsum("idr,ier->ide", self.factors, self.factors.conj())

    def effect_sum(self, coeffs) -> np.ndarray:
        return effect_sum(self.factors, coeffs)

    def total(self) -> np.ndarray:
        return self.effect_sum(np.ones(self.n_outcomes))

    def completeness_error(self, levels: int | None = None) -> float:
        levels = self.trusted_levels if levels is None else levels
        dev = (self.total() - np.eye(self.dim))[:levels, :levels]
        return float(np.max(np.abs(dev), initial=0.0))

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("iar,ab,ibr->i", self.factors.conj(), rho, self.factors, optimize=True).real

    def probabilities_pure(self, vecs: np.ndarray) -> np.ndarray:
        """Outcome probabilities for each row vector of ``vecs``; shape ``(K, n)``."""
        amp = np.einsum("kd,idr->kir", vecs, self.factors.conj(), optimize=True)
        return (np.abs(amp) ** 2).sum(axis=2)


@dataclass(eq=False)
class Estimator:
    povm: Povm
    x_values: np.ndarray
    p_values: np.ndarray

    def __post_init__(self):
        self.x_values = np.asarray(self.x_values, dtype=float).ravel()
        self.p_values = np.asarray(self.p_values, dtype=float).ravel()
        n = self.povm.n_outcomes
        if self.x_values.size != n or self.p_values.size != n:
            raise ValueError(f"need {n} value pairs, got {self.x_values.size} and {self.p_values.size}")


def heterodyne_povm(grid: PhaseSpaceGrid, cutoff: int) -> Povm:
    from .channels import _heterodyne_trusted

    return Povm(heterodyne_factors(grid, cutoff), min_trusted=_heterodyne_trusted(grid, cutoff))


def scaled_heterodyne_estimator(G: float, lam: float, grid: PhaseSpaceGrid, cutoff: int,
                                R: float = 0.0) -> Estimator:
    """Heterodyne outcome ``beta_k`` reported as ``c (sqrt2 Re beta_k, sqrt2 Im beta_k)``.

    The shrinkage ``c = sqrt(G) e^(-+R) / (1 + lam)`` is the Bayes-optimal
    linear rescaling under the Gaussian prior.
    """
    c = np.sqrt(G) / (1.0 + lam)
    beta = grid.points
    return Estimator(heterodyne_povm(grid, cutoff),
                     c * np.exp(-R) * np.sqrt(2.0) * beta.real,
                     c * np.exp(R) * np.sqrt(2.0) * beta.imag)


def estimator_to_model(est: Estimator, embed_pair: bool = False) -> MeasurementModel:
    """Measure-and-prepare model ``E(rho) = sum_i tr(m_i rho) |u_i><u_i| (x) |v_i><v_i|``.

    The output lives on the correlated span of ``|u_i>|v_i>``, where
    ``M = diag(X)`` and ``N = diag(P)`` (returned as diagonal observables).
    With ``embed_pair=True`` the full ``k x k`` register pair is
    materialized instead, with ``M = diag(X) (x) 1`` and ``N = 1 (x) diag(P)``;
    the prepared states are then ``k^2``-dimensional, so keep ``k`` small.
    """
    k = est.povm.n_outcomes
    if not embed_pair:
        channel = MeasurePrepareChannel(est.povm.factors, None, label="estimator-register",
                                        min_trusted=est.povm.min_trusted)
        return MeasurementModel(channel, est.x_values, est.p_values)
    prepared = np.zeros((k, k * k), dtype=np.complex128)
    prepared[np.arange(k), np.arange(k) * (k + 1)] = 1.0
    channel = MeasurePrepareChannel(est.povm.factors, prepared, label="estimator-pair", out_dims=(k, k),
                                    min_trusted=est.povm.min_trusted)
    ones = np.ones(k)
    return MeasurementModel(channel, np.kron(est.x_values, ones), np.kron(ones, est.p_values))


def simultaneous_diagonalize(M: np.ndarray, N: np.ndarray, tol: float = 1e-8, cluster_tol: float = 1e-9):
    """Common orthonormal eigenbasis of commuting Hermitian ``M`` and ``N``.

    Returns ``(basis, a, b)`` with basis vectors as columns, so that
    ``M = basis diag(a) basis^dag`` and ``N = basis diag(b) basis^dag``.
    Eigenvalues of ``M`` closer than ``cluster_tol`` (relative to the spectral
    scale) are treated as one eigenspace, inside which ``N`` is diagonalized.
    """
    M = np.asarray(M, dtype=np.complex128)
    N = np.asarray(N, dtype=np.complex128)
    scale = max(1.0, np.abs(M).max(initial=0.0), np.abs(N).max(initial=0.0))
    comm = np.max(np.abs(M @ N - N @ M), initial=0.0)
    if comm > tol * scale**2:
        raise ValueError(f"observables do not commute: max |[M, N]| = {comm:.3e}")
    a, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
    spread = max(1.0, float(np.abs(a).max(initial=0.0)))
    basis = np.empty_like(vecs)
    start = 0
    n = a.size
    while start < n:
        stop = start + 1
        while stop < n and a[stop] - a[stop - 1] <= cluster_tol * spread:
            stop += 1
        block = vecs[:, start:stop]
        if stop - start == 1:
            basis[:, start] = block[:, 0]
        else:
            sub = block.conj().T @ N @ block
            _, w = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            basis[:, start:stop] = block @ w
        start = stop
    a_vals = (basis.conj() * (M @ basis)).sum(axis=0).real
    b_vals = (basis.conj() * (N @ basis)).sum(axis=0).real
    return basis, a_vals, b_vals


def model_to_estimator(model: MeasurementModel, tol: float = 1e-8, prune: float = 1e-14) -> Estimator:
    """Estimator ``{m_i', a_i, b_i}`` reproducing the model's MSD pair.

    Effects whose trace falls below ``prune`` (eigenvectors outside the
    channel's range) carry zero probability and are dropped.
    """
    if model.diagonal:
        basis, a, b = None, model.M, model.N
    else:
        basis, a, b = simultaneous_diagonalize(model.M_matrix, model.N_matrix, tol)
    factors = model.channel.pullback_factors(basis)
    weight = (np.abs(factors) ** 2).sum(axis=(1, 2))
    keep = weight > prune
    povm = Povm(factors[keep], min_trusted=model.channel.trusted_levels)
    return Estimator(povm, a[keep], b[keep])


def random_povm(n_outcomes: int, dim: int, cutoff: int, rng: np.random.Generator, rank: int | None = None) -> Povm:
    """Random POVM acting nontrivially on the lowest ``dim`` Fock levels.

    Random PSD matrices ``G_i`` are normalized as ``S^(-1/2) G_i S^(-1/2)``
    with ``S = sum G_i``; levels ``>= dim`` get a random probability vector
    times the identity so the effects stay complete on the full cutoff.
    """
    if dim > cutoff:
        raise ValueError("dim must not exceed the cutoff")
    rank = dim if rank is None else rank
    a = rng.normal(size=(n_outcomes, dim, rank)) + 1j * rng.normal(size=(n_outcomes, dim, rank))
    g = np.einsum("idr,ier->ide", a, a.conj())
    vals, vecs = np.linalg.eigh(g.sum(axis=0))
    s_inv_half = (vecs / np.sqrt(vals)) @ vecs.conj().T
    small = np.einsum("ab,ibc,cd->iad", s_inv_half, g, s_inv_half)
    q = rng.dirichlet(np.ones(n_outcomes))
    elements = np.zeros((n_outcomes, cutoff, cutoff), dtype=np.complex128)
    elements[:, :dim, :dim] = small
    idx = np.arange(dim, cutoff)
    elements[:, idx, idx] = q[:, None]
    return Povm.from_elements(elements)


def bayes_values(povm: Povm, G: float, R: float, prior: GaussianPrior, order: int = 20):
    """Posterior-mean value assignments: the MSE-optimal ``(X_i, P_i)`` for a fixed POVM."""
    alphas, weights = prior_nodes(prior, order)
    vecs = _kernels.coherent_vectors(alphas, povm.dim)
    probs = povm.probabilities_pure(vecs) * weights[:, None]
    mass = probs.sum(axis=0)
    mass = np.where(mass > 0, mass, 1.0)
    x = np.sqrt(G) * np.exp(-R) * np.sqrt(2.0) * alphas.real
    p = np.sqrt(G) * np.exp(R) * np.sqrt(2.0) * alphas.imag
    return (x @ probs) / mass, (p @ probs) / mass


def _matrix_to_json(m: np.ndarray) -> dict:
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, dict):
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ValueError("real and imaginary parts differ in shape")
        return re + 1j * im
    return np.asarray(obj, dtype=float).astype(np.complex128)


def estimator_to_dict(est: Estimator) -> dict:
    return {
        "povm": [_matrix_to_json(m) for m in est.povm.elements],
        "x_values": est.x_values.tolist(),
        "p_values": est.p_values.tolist(),
    }


def estimator_from_dict(obj: dict, tol: float = COMPLETENESS_TOL) -> Estimator:
    try:
        elements = np.stack([matrix_from_json(m) for m in obj["povm"]])
        return Estimator(Povm.from_elements(elements, tol=tol), obj["x_values"], obj["p_values"])
    except KeyError as exc:
        raise ValueError(f"estimator description lacks field {exc}") from None

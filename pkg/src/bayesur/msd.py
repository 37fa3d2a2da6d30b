"""Bayesian mean-square deviations over a Gaussian ensemble of coherent states.

For a channel ``E`` and observables ``M``, ``N`` on its output,

    V_M(eta_x) = int p_lam(alpha) tr[(M - sqrt(eta_x) x_alpha)^2 E(rho_alpha)] d^2 alpha

with ``p_lam(alpha) = lam/pi exp(-lam |alpha|^2)``, and likewise ``V_N`` with
``p_alpha``.  Expanding the square moves the channel onto the observables, so
every route only needs the Heisenberg-picture moments ``E^dag(1)``,
``E^dag(M)``, ``E^dag(M^2)`` (and the same for ``N``) on the input mode:

* ``msd_quadrature`` -- tensor Gauss-Hermite rule in ``(Re alpha, Im alpha)``;
* ``msd_monte_carlo`` -- seeded sampling of ``alpha`` from the prior;
* ``msd_choi`` -- correlations of the Choi state ``J`` with the reference
  mode, ``V_M = tr[(M_A - sqrt(tau_x) x_B)^2 J] + tau_x/2`` and
  ``V_N = tr[(N_A + sqrt(tau_p) p_B)^2 J] + tau_p/2``, ``tau = eta/(1+lam)``.

``mse_pair`` evaluates the estimator mean-square errors the same way, with
``sum_i X_i^k m_i`` playing the role of ``E^dag(M^k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .channels import KrausChannel, choi_state
from .fock import FockSpace, TruncationError, coherent_tails, quadratures

QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"
CHOI = "choi"


@dataclass(frozen=True)
class GaussianPrior:
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"prior lambda must be finite and >= 0, got {self.lam}")

    def require_proper(self):
        if self.lam <= 0:
            raise ValueError("numeric MSD routes need lambda > 0; the uniform prior is a limit, use bounds")

    @property
    def mean_photons(self) -> float:
        return 1.0 / self.lam


@dataclass(frozen=True)
class GainSpec:
    """Gain pair ``(eta_x, eta_p)``; ``G = sqrt(eta_x eta_p)``, ``s = sqrt(eta_x/eta_p) = e^(-2R)``."""

    eta_x: float
    eta_p: float

    def __post_init__(self):
        if self.eta_x < 0 or self.eta_p < 0:
            raise ValueError("gains must be non-negative")

    @classmethod
    def from_gs(cls, G: float, s: float = 1.0) -> "GainSpec":
        if s <= 0:
            raise ValueError("ratio s must be positive")
        return cls(G * s, G / s)

    @classmethod
    def from_gr(cls, G: float, R: float = 0.0) -> "GainSpec":
        return cls(G * np.exp(-2 * R), G * np.exp(2 * R))

    @property
    def G(self) -> float:
        return float(np.sqrt(self.eta_x * self.eta_p))

    @property
    def s(self) -> float:
        return float(np.sqrt(self.eta_x / self.eta_p))

    @property
    def R(self) -> float:
        return float(-0.5 * np.log(self.s))

    def tau(self, lam: float) -> tuple[float, float]:
        return self.eta_x / (1.0 + lam), self.eta_p / (1.0 + lam)


class MeasurementModel:
    """A channel plus observables ``(M, N)`` on its output space.

    Observables are Hermitian matrices, or 1-D arrays for observables that
    are diagonal in the output basis (classical register readouts).
    """

    def __init__(self, channel: KrausChannel, M: np.ndarray, N: np.ndarray, tol: float = 1e-9):
        self.channel = channel
        self.M = self._observable(M, "M", tol)
        self.N = self._observable(N, "N", tol)

    def _observable(self, op, name, tol):
        op = np.asarray(op)
        dim = self.channel.out_dim
        if op.ndim == 1:
            if op.shape != (dim,) or np.iscomplexobj(op) and np.abs(op.imag).max(initial=0.0) > tol:
                raise ValueError(f"diagonal observable {name} must be {dim} real numbers")
            return op.real.astype(float)
        op = op.astype(np.complex128)
        if op.shape != (dim, dim):
            raise ValueError(f"observable {name} must be {dim}x{dim}, got {op.shape}")
        if np.max(np.abs(op - op.conj().T), initial=0.0) > tol * max(1.0, np.abs(op).max(initial=0.0)):
            raise ValueError(f"observable {name} is not Hermitian")
        return 0.5 * (op + op.conj().T)

    @property
    def diagonal(self) -> bool:
        return self.M.ndim == 1 and self.N.ndim == 1

    @staticmethod
    def _dense(op):
        return np.diag(op).astype(np.complex128) if op.ndim == 1 else op

    @property
    def M_matrix(self) -> np.ndarray:
        return self._dense(self.M)

    @property
    def N_matrix(self) -> np.ndarray:
        return self._dense(self.N)

    @property
    def in_dim(self) -> int:
        return self.channel.in_dim

    @cached_property
    def commutator(self) -> np.ndarray:
        if self.diagonal:
            return np.zeros((self.channel.out_dim,) * 2, dtype=np.complex128)
        M, N = self.M_matrix, self.N_matrix
        return M @ N - N @ M

    @property
    def commutator_norm(self) -> float:
        if self.diagonal:
            return 0.0
        return float(np.max(np.abs(self.commutator), initial=0.0))

    def _heisenberg(self, op):
        if op.ndim == 1:
            return self.channel.adjoint_diagonal(op)
        return self.channel.adjoint(op)

    @cached_property
    def moments(self) -> np.ndarray:
        """Stack ``E^dag`` of ``(1, M, M^2, N, N^2)`` on the input mode."""
        ones = np.ones(self.channel.out_dim)
        sq = [op * op if op.ndim == 1 else op @ op for op in (self.M, self.N)]
        ops = (ones, self.M, sq[0], self.N, sq[1])
        return np.stack([self._heisenberg(op) for op in ops])

    @cached_property
    def commutator_heisenberg(self) -> np.ndarray:
        if self.diagonal:
            return np.zeros((self.in_dim, self.in_dim), dtype=np.complex128)
        return self.channel.adjoint(self.commutator)

    def __repr__(self):
        return f"MeasurementModel({self.channel!r})"


@dataclass(frozen=True)
class MsdResult:
    v_m_x: float
    v_n_p: float
    method: str
    prior: GaussianPrior
    gain: GainSpec
    stat_error_m: float = 0.0
    stat_error_n: float = 0.0
    trunc_error: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def stat_error(self) -> float:
        return max(self.stat_error_m, self.stat_error_n)

    @property
    def product(self) -> float:
        return self.v_m_x * self.v_n_p

    @property
    def pair(self) -> tuple[float, float]:
        return self.v_m_x, self.v_n_p

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "v_m_x": self.v_m_x,
            "v_n_p": self.v_n_p,
            "product": self.product,
            "eta_x": self.gain.eta_x,
            "eta_p": self.gain.eta_p,
            "lambda": self.prior.lam,
            "stat_error": [self.stat_error_m, self.stat_error_n],
            "trunc_error": self.trunc_error,
        }


def prior_nodes(prior: GaussianPrior, order: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite nodes ``alpha_k`` and weights (summing to 1) for ``p_lam``."""
    prior.require_proper()
    if order < 8:
        raise ValueError("quadrature order must be at least 8 per axis")
    t, w = np.polynomial.hermite.hermgauss(order)
    scale = 1.0 / np.sqrt(prior.lam)
    re, im = np.meshgrid(t * scale, t * scale, indexing="ij")
    weights = np.outer(w, w).ravel() / np.pi
    return (re + 1j * im).ravel(), weights


def _pointwise(forms: np.ndarray, alphas: np.ndarray, sqrt_eta_x: float, sqrt_eta_p: float):
    """Per-alpha integrands from quadratic forms of ``(1, M, M^2, N, N^2)`` moments."""
    x = np.sqrt(2.0) * alphas.real
    p = np.sqrt(2.0) * alphas.imag
    f0, fm, fmm, fn, fnn = forms
    vm = fmm - 2.0 * sqrt_eta_x * x * fm + sqrt_eta_x**2 * x * x * f0
    vn = fnn - 2.0 * sqrt_eta_p * p * fn + sqrt_eta_p**2 * p * p * f0
    return vm, vn


def _integrate(moments, alphas, weights, gain, budget):
    dim = moments.shape[1]
    tails = coherent_tails(alphas, dim)
    trunc = float(weights @ tails)
    if trunc > budget:
        raise TruncationError(
            f"prior-weighted coherent tail {trunc:.3e} at cutoff {dim} exceeds budget {budget:.1e}"
        )
    vecs = _kernels.coherent_vectors(alphas, dim)
    forms = _kernels.quadratic_forms(moments, vecs)
    vm, vn = _pointwise(forms, alphas, np.sqrt(gain.eta_x), np.sqrt(gain.eta_p))
    return vm, vn, trunc


def _moment_integral(moments, gain, prior, order, budget, method, extra=None) -> MsdResult:
    alphas, weights = prior_nodes(prior, order)
    vm, vn, trunc = _integrate(moments, alphas, weights, gain, budget)
    return MsdResult(float(weights @ vm), float(weights @ vn), method, prior, gain,
                     trunc_error=trunc, extra=extra or {})


def msd_quadrature(model: MeasurementModel, gain: GainSpec, prior: GaussianPrior, order: int = 20,
                   budget: float = 1e-6) -> MsdResult:
    return _moment_integral(model.moments, gain, prior, order, budget, QUADRATURE)


def msd_monte_carlo(model: MeasurementModel, gain: GainSpec, prior: GaussianPrior, n_samples: int = 10_000,
                    seed: int | None = None, alphas=None, budget: float = 1e-6) -> MsdResult:
    """Sample-mean estimate of both MSDs with its standard error.

    Either ``seed`` (draws ``n_samples`` amplitudes from the prior) or an
    explicit array ``alphas`` must be given; there is no unseeded mode.
    """
    prior.require_proper()
    if alphas is None:
        if seed is None:
            raise ValueError("msd_monte_carlo needs an explicit seed")
        if n_samples < 1000:
            raise ValueError("use at least 1000 samples")
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(0.5 / prior.lam)
        draws = rng.normal(0.0, sigma, size=(2, n_samples))
        alphas = draws[0] + 1j * draws[1]
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.complex128))
    n = alphas.size
    weights = np.full(n, 1.0 / n)
    vm, vn, trunc = _integrate(model.moments, alphas, weights, gain, budget)

    def stderr(v):
        return float(np.std(v, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    return MsdResult(float(vm.mean()), float(vn.mean()), MONTE_CARLO, prior, gain,
                     stat_error_m=stderr(vm), stat_error_n=stderr(vn), trunc_error=trunc,
                     extra={"n_samples": n, "seed": seed})


def msd_choi(model: MeasurementModel, gain: GainSpec, prior: GaussianPrior, tol: float = 1e-6) -> MsdResult:
    prior.require_proper()
    J = choi_state(model.channel, prior.lam, tol)
    x_b, p_b = quadratures(FockSpace(J.ref_dim))
    tau_x, tau_p = gain.tau(prior.lam)
    rx, rp = np.sqrt(tau_x), np.sqrt(tau_p)
    e0, em, emm, en, enn = model.moments
    ex = J.expect_heisenberg
    v_m = (ex(emm) - 2 * rx * ex(em, x_b) + tau_x * ex(e0, x_b @ x_b)).real
    # the reference-mode momentum enters with a plus sign
    v_n = (ex(enn) + 2 * rp * ex(en, p_b) + tau_p * ex(e0, p_b @ p_b)).real
    return MsdResult(float(v_m + tau_x / 2), float(v_n + tau_p / 2), CHOI, prior, gain, trunc_error=J.tail)


def commutator_expectation(model: MeasurementModel, prior: GaussianPrior, tol: float = 1e-6) -> complex:
    """``<[M, N]>`` on ``tr_B J``, the channel output of the prior-averaged input."""
    prior.require_proper()
    J = choi_state(model.channel, prior.lam, tol)
    return J.expect_heisenberg(model.commutator_heisenberg)


def estimator_moments(estimator) -> np.ndarray:
    """``(sum m_i, sum X_i m_i, sum X_i^2 m_i, sum P_i m_i, sum P_i^2 m_i)``."""
    povm = estimator.povm
    x = np.asarray(estimator.x_values, dtype=float)
    p = np.asarray(estimator.p_values, dtype=float)
    ones = np.ones_like(x)
    return np.stack([povm.effect_sum(c) for c in (ones, x, x * x, p, p * p)])


def mse_pair(estimator, G: float, R: float, prior: GaussianPrior, order: int = 20,
             budget: float = 1e-6) -> MsdResult:
    """Estimator MSEs for targets ``sqrt(G) e^(-R) x_alpha`` and ``sqrt(G) e^(R) p_alpha``."""
    if G <= 0:
        raise ValueError("G must be positive")
    estimator.povm.check()
    gain = GainSpec.from_gr(G, R)
    return _moment_integral(estimator_moments(estimator), gain, prior, order, budget, QUADRATURE,
                            extra={"G": G, "R": R})

"""Quantum channels on truncated Fock spaces and the Choi-state construction.

A channel maps density matrices on a ``d_in``-level input mode to an output
register of dimension ``d_out`` (one or two bosonic modes, or a classical
outcome register).  Everything downstream only needs the Schroedinger map
``apply`` and the Heisenberg map ``adjoint``; Kraus elements are built
eagerly for the small Fock-basis families and lazily for measure-and-prepare
channels, whose Kraus count equals the number of POVM outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .fock import TruncationError, tmsv_coefficients

COMPLETENESS_TOL = 1e-6


def _trusted_levels(deviation: np.ndarray, tol: float) -> int:
    """Largest ``L`` with ``max |deviation[:L, :L]| <= tol``."""
    dev = np.abs(deviation)
    level = 0
    for n in range(dev.shape[0]):
        if max(dev[n, : n + 1].max(), dev[: n + 1, n].max()) > tol:
            break
        level = n + 1
    return level


def effect_sum(factors: np.ndarray, coeffs) -> np.ndarray:
    """``sum_i c_i F_i F_i^dag`` for effect factors of shape ``(n, d, r)``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if factors.shape[2] == 1:
        return _kernels.rank_one_sum(factors[:, :, 0], coeffs)
    return np.einsum("i,idr,ier->de", coeffs, factors, factors.conj(), optimize=True)


def factorize_psd(elements: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Factor each PSD matrix ``m_i = F_i F_i^dag``; returns ``(n, d, r)``.

    The rank ``r`` is the largest numerical rank over the stack, so low-rank
    inputs keep compact factors.
    """
    elements = np.asarray(elements, dtype=np.complex128)
    if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {elements.shape}")
    herm = 0.5 * (elements + elements.conj().transpose(0, 2, 1))
    if np.max(np.abs(herm - elements), initial=0.0) > tol:
        raise ValueError("POVM element is not Hermitian")
    vals, vecs = np.linalg.eigh(herm)
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    if vals.min(initial=0.0) < -tol * scale:
        raise ValueError(f"POVM element has negative eigenvalue {vals.min():.3e}")
    keep = vals > tol * 1e-3 * scale
    rank = max(1, int(keep.sum(axis=1).max()))
    order = np.argsort(-vals, axis=1)[:, :rank]
    top_vals = np.take_along_axis(vals, order, axis=1)
    top_vecs = np.take_along_axis(vecs, order[:, None, :], axis=2)
    return top_vecs * np.sqrt(np.clip(top_vals, 0.0, None))[:, None, :]


class KrausChannel:
    """CPTP map given by Kraus elements ``K_j`` of shape ``(d_out, d_in)``.

    ``out_dims`` records the tensor structure of the output (for example
    ``(d, d)`` for two modes).  Completeness is only demanded on the leading
    ``trusted_levels`` input Fock levels; levels beyond that are the
    truncation boundary.
    """

    def __init__(self, kraus, label: str = "", out_dims=None, min_trusted: int | None = None,
                 tol: float = COMPLETENESS_TOL):
        kraus = np.asarray(kraus, dtype=np.complex128)
        if kraus.ndim == 2:
            kraus = kraus[None]
        self._kraus = kraus
        self.label = label
        self._in_dim = kraus.shape[2]
        self._out_dim = kraus.shape[1]
        self.out_dims = tuple(out_dims) if out_dims is not None else (self._out_dim,)
        self._validate(min_trusted, tol)

    def _validate(self, min_trusted, tol):
        if int(np.prod(self.out_dims)) != self.out_dim:
            raise ValueError(f"out_dims {self.out_dims} do not match output dimension {self.out_dim}")
        self.trusted_levels = _trusted_levels(self.completeness_deviation(), tol)
        required = max(2, self.in_dim // 4) if min_trusted is None else min_trusted
        if self.trusted_levels < min(required, self.in_dim):
            raise ValueError(
                f"channel '{self.label}' is incomplete: sum K^dag K deviates from identity beyond "
                f"{tol:.0e} already at Fock level {self.trusted_levels}"
            )

    @property
    def kraus(self) -> np.ndarray:
        return self._kraus

    @property
    def in_dim(self) -> int:
        return self._in_dim

    @property
    def out_dim(self) -> int:
        return self._out_dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        if rho.shape != (self.in_dim, self.in_dim):
            raise ValueError(f"state shape {rho.shape} does not match input dimension {self.in_dim}")
        k = self.kraus
        return np.einsum("jab,bc,jdc->ad", k, rho, k.conj(), optimize=True)

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        op = np.asarray(op)
        if op.shape != (self.out_dim, self.out_dim):
            raise ValueError(f"operator shape {op.shape} does not match output dimension {self.out_dim}")
        k = self.kraus
        return np.einsum("jba,bc,jcd->ad", k.conj(), op, k, optimize=True)

    def adjoint_diagonal(self, diag) -> np.ndarray:
        """``E^dag`` of an operator diagonal in the output basis."""
        k = self.kraus
        return np.einsum("jba,b,jbd->ad", k.conj(), np.asarray(diag, dtype=float), k, optimize=True)

    def completeness_deviation(self) -> np.ndarray:
        return self.adjoint_diagonal(np.ones(self.out_dim)) - np.eye(self.in_dim)

    def completeness_error(self, levels: int | None = None) -> float:
        levels = self.trusted_levels if levels is None else levels
        dev = self.completeness_deviation()[:levels, :levels]
        return float(np.max(np.abs(dev), initial=0.0))

    def pullback_factors(self, basis: np.ndarray) -> np.ndarray:
        """Effect factors of ``m_i = sum_j K_j^dag |w_i><w_i| K_j`` for basis columns ``w_i``.

        ``basis=None`` means the standard output basis.
        """
        if basis is None:
            basis = np.eye(self.out_dim)
        # F_i[:, j] = K_j^dag w_i
        return np.einsum("jba,bi->iaj", self.kraus.conj(), basis, optimize=True)

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r}, {self.in_dim}->{self.out_dims})"


class MeasurePrepareChannel(KrausChannel):
    """``rho -> sum_i tr(m_i rho) |phi_i><phi_i|``.

    ``factors`` holds the POVM effects as ``m_i = F_i F_i^dag`` with shape
    ``(n, d_in, r)``.  ``prepared`` is an ``(n, d_out)`` array of normalized
    pure states, or ``None`` for a classical register where ``phi_i`` is the
    i-th basis vector of an ``n``-level output.
    """

    def __init__(self, factors, prepared=None, label: str = "", out_dims=None,
                 min_trusted: int | None = None, tol: float = COMPLETENESS_TOL):
        self.factors = np.asarray(factors, dtype=np.complex128)
        self.prepared = None if prepared is None else np.asarray(prepared, dtype=np.complex128)
        n = self.factors.shape[0]
        if self.prepared is not None and self.prepared.shape[0] != n:
            raise ValueError("one prepared state per POVM outcome is required")
        self.label = label
        self._in_dim = self.factors.shape[1]
        self._out_dim = n if self.prepared is None else self.prepared.shape[1]
        self.out_dims = tuple(out_dims) if out_dims is not None else (self._out_dim,)
        self._validate(min_trusted, tol)

    @cached_property
    def kraus(self) -> np.ndarray:
        # K_(i,r) = |phi_i> F_i[:, r]^dag
        phi = np.eye(self._out_dim, dtype=np.complex128) if self.prepared is None else self.prepared
        k = np.einsum("io,iar->iroa", phi, self.factors.conj())
        return k.reshape(-1, self._out_dim, self._in_dim)

    def outcome_probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("iar,ab,ibr->i", self.factors.conj(), rho, self.factors, optimize=True).real

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        if rho.shape != (self.in_dim, self.in_dim):
            raise ValueError(f"state shape {rho.shape} does not match input dimension {self.in_dim}")
        probs = self.outcome_probabilities(rho)
        if self.prepared is None:
            return np.diag(probs).astype(np.complex128)
        return (self.prepared.T * probs) @ self.prepared.conj()

    def _prepared_expectations(self, op: np.ndarray) -> np.ndarray:
        if self.prepared is None:
            return np.real(np.diag(op))
        return _kernels.quadratic_forms(op[None], self.prepared)[0]

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        op = np.asarray(op)
        if op.shape != (self.out_dim, self.out_dim):
            raise ValueError(f"operator shape {op.shape} does not match output dimension {self.out_dim}")
        herm = 0.5 * (op + op.conj().T)
        anti = 0.5 * (op - op.conj().T) / 1j
        out = effect_sum(self.factors, self._prepared_expectations(herm))
        if np.any(anti):
            out = out + 1j * effect_sum(self.factors, self._prepared_expectations(anti))
        return out

    def adjoint_diagonal(self, diag) -> np.ndarray:
        diag = np.asarray(diag, dtype=float)
        if self.prepared is None:
            return effect_sum(self.factors, diag)
        return effect_sum(self.factors, (np.abs(self.prepared) ** 2) @ diag)

    def pullback_factors(self, basis: np.ndarray | None) -> np.ndarray:
        if basis is None and self.prepared is None:
            return self.factors
        if basis is None:
            basis = np.eye(self.out_dim)
        if self.prepared is None:
            overlaps = np.abs(basis) ** 2  # (n_out=n, n_basis)
        else:
            overlaps = np.abs(self.prepared.conj() @ basis) ** 2
        elements = np.stack([effect_sum(self.factors, overlaps[:, i]) for i in range(basis.shape[1])])
        return factorize_psd(elements)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Square grid of coherent amplitudes with trapezoid weights ``h^2/pi``."""

    spacing: float = 0.2
    extent: float = 6.0

    def __post_init__(self):
        if self.spacing <= 0 or self.extent <= 0:
            raise ValueError("grid spacing and extent must be positive")

    @cached_property
    def points(self) -> np.ndarray:
        n = int(np.floor(self.extent / self.spacing + 1e-9))
        axis = self.spacing * np.arange(-n, n + 1)
        re, im = np.meshgrid(axis, axis, indexing="ij")
        return (re + 1j * im).ravel()

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.points.shape, self.spacing**2 / np.pi)

    @classmethod
    def for_amplitude(cls, alpha_max: float, spacing: float = 0.2) -> "PhaseSpaceGrid":
        return cls(spacing=spacing, extent=abs(alpha_max) + 5.0)


def heterodyne_factors(grid: PhaseSpaceGrid, cutoff: int) -> np.ndarray:
    """Rank-one effect factors ``sqrt(w_k) P_d |beta_k>`` of the discretized heterodyne POVM.

    The projections are not renormalized: ``sum_k w_k P_d |beta_k><beta_k| P_d``
    approximates ``P_d 1 P_d``, the identity on the truncated space.
    """
    vecs = _kernels.coherent_vectors(grid.points, cutoff, normalize=False)
    return (vecs * np.sqrt(grid.weights)[:, None])[:, :, None]


def _heterodyne_trusted(grid: PhaseSpaceGrid, cutoff: int) -> int:
    # Husimi support of |n> reaches |beta|^2 ~ n; keep a 2.5-unit margin to the grid edge
    return min(cutoff, max(2, int((grid.extent - 2.5) ** 2)))


def identity_channel(cutoff: int) -> KrausChannel:
    return KrausChannel(np.eye(cutoff), label="identity")


def loss_channel(eta: float, cutoff: int) -> KrausChannel:
    """Pure-loss channel with transmittance ``eta``: ``|alpha> -> |sqrt(eta) alpha>``."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmittance must lie in (0, 1], got {eta}")
    n_levels = 1 if eta == 1.0 else cutoff
    kraus = np.zeros((n_levels, cutoff, cutoff))
    for k in range(n_levels):
        n = np.arange(k, cutoff)
        logb = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        with np.errstate(divide="ignore"):
            loss_term = k * np.log1p(-eta) if k else 0.0
        kraus[k, n - k, n] = np.exp(0.5 * (logb + (n - k) * np.log(eta) + loss_term))
    return KrausChannel(kraus, label=f"loss({eta:g})")


def amplifier_channel(gain: float, cutoff: int, out_cutoff: int | None = None) -> KrausChannel:
    """Quantum-limited phase-insensitive amplifier ``|alpha> -> ~|sqrt(G) alpha>``.

    Kraus family of the two-mode-squeezer dilation traced over the idler,
    ``<n+k|K_k|n> = sqrt(C(n+k, k)) (1 - 1/G)^(k/2) G^(-(n+1)/2)``.  The output
    cutoff defaults to twice the input cutoff.
    """
    if gain < 1.0:
        raise ValueError(f"amplifier gain must be >= 1, got {gain}")
    d_out = 2 * cutoff if out_cutoff is None else out_cutoff
    if d_out < cutoff:
        raise ValueError("output cutoff must be at least the input cutoff")
    n_kraus = 1 if gain == 1.0 else d_out
    kraus = np.zeros((n_kraus, d_out, cutoff))
    n = np.arange(cutoff)
    for k in range(n_kraus):
        ok = n + k < d_out
        nn = n[ok]
        logb = gammaln(nn + k + 1) - gammaln(k + 1) - gammaln(nn + 1)
        lg = k * np.log1p(-1.0 / gain) if k else 0.0
        kraus[k, nn + k, nn] = np.exp(0.5 * (logb + lg - (nn + 1) * np.log(gain)))
    return KrausChannel(kraus, label=f"amplifier({gain:g})")


def heterodyne_mp_channel(g: float, grid: PhaseSpaceGrid, cutoff: int, out_cutoff: int | None = None,
                          conjugate: bool = False) -> MeasurePrepareChannel:
    """Heterodyne measure-and-prepare channel: detect ``beta_k``, re-prepare ``|g beta_k>``.

    With ``conjugate=True`` the prepared state is ``|g beta_k^*>``, which
    realizes phase-conjugating amplification/attenuation as a completely
    positive map.
    """
    d_out = cutoff if out_cutoff is None else out_cutoff
    factors = heterodyne_factors(grid, cutoff)
    targets = g * (np.conj(grid.points) if conjugate else grid.points)
    prepared = _kernels.coherent_vectors(targets, d_out)
    name = "heterodyne_conjugate_mp" if conjugate else "heterodyne_mp"
    return MeasurePrepareChannel(factors, prepared, label=f"{name}({g:g})",
                                 min_trusted=_heterodyne_trusted(grid, cutoff))


def heterodyne_conjugate_mp_channel(g: float, grid: PhaseSpaceGrid, cutoff: int,
                                    out_cutoff: int | None = None) -> MeasurePrepareChannel:
    return heterodyne_mp_channel(g, grid, cutoff, out_cutoff, conjugate=True)


def half_bs_channel(cutoff: int, out_cutoff: int | None = None, transmittance: float = 0.5) -> KrausChannel:
    """Signal mixed with vacuum on a beam splitter; both output ports are kept.

    ``|n> -> sum_k sqrt(C(n,k)) t^k r^(n-k) |k>|n-k>`` with ``t = sqrt(T)``,
    ``r = sqrt(1-T)``, so ``|alpha> -> |t alpha>|r alpha>``.
    """
    d_out = cutoff if out_cutoff is None else out_cutoff
    if d_out < cutoff:
        raise ValueError("output cutoff must be at least the input cutoff")
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    t, r = np.sqrt(transmittance), np.sqrt(1.0 - transmittance)
    iso = np.zeros((d_out * d_out, cutoff))
    for n in range(cutoff):
        k = np.arange(n + 1)
        binom = np.exp(0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)))
        iso[k * d_out + (n - k), n] = binom * t**k * r ** (n - k)
    return KrausChannel(iso, label=f"half_bs({transmittance:g})", out_dims=(d_out, d_out))


@dataclass(frozen=True, eq=False)
class ChoiState:
    """``J = (E x id)(|psi_lam><psi_lam|)`` on output (x) reference mode B.

    The state is held implicitly through the channel and the Schmidt
    coefficients of ``psi_lam``; ``expect`` contracts ``tr[(A (x) B) J]`` via
    the Heisenberg map, and ``matrix`` materializes ``J`` for small outputs.
    """

    channel: KrausChannel
    lam: float
    coeffs: np.ndarray
    tail: float

    @property
    def ref_dim(self) -> int:
        return self.coeffs.shape[0]

    def expect(self, out_op: np.ndarray | None, ref_op: np.ndarray | None = None) -> complex:
        """``tr[(out_op (x) ref_op) J]``; ``None`` stands for the identity."""
        if out_op is None:
            out_op = np.eye(self.channel.out_dim)
        return self.expect_heisenberg(self.channel.adjoint(out_op), ref_op)

    def expect_heisenberg(self, heis: np.ndarray, ref_op: np.ndarray | None = None) -> complex:
        """``<psi| heis (x) ref_op |psi>`` for an already pulled-back ``heis = E^dag(A)``."""
        c = self.coeffs
        if ref_op is None:
            return complex(np.einsum("n,nn,n->", c, heis, c))
        return complex(np.einsum("n,nm,nm,m->", c, heis, ref_op, c))

    def reduced_input(self) -> np.ndarray:
        """``tr_B |psi><psi|``: the thermal state with mean photon number ``1/lam``."""
        return np.diag(self.coeffs**2).astype(np.complex128)

    def reduced_output(self) -> np.ndarray:
        """``tr_B J``."""
        return self.channel.apply(self.reduced_input())

    def matrix(self, max_dim: int = 4096) -> np.ndarray:
        dim = self.channel.out_dim * self.ref_dim
        if dim > max_dim:
            raise MemoryError(f"explicit Choi state would be {dim}x{dim}; use expect() instead")
        d = self.ref_dim
        psi = np.zeros((d, d), dtype=np.complex128)
        psi[np.arange(d), np.arange(d)] = self.coeffs
        # columns of K_j psi are the output components paired with reference |m>
        out = np.zeros((dim, dim), dtype=np.complex128)
        for k in self.channel.kraus:
            v = (k @ psi).reshape(-1)
            out += np.outer(v, v.conj())
        return out


def choi_state(channel: KrausChannel, lam: float, tol: float = 1e-6) -> ChoiState:
    coeffs, tail = tmsv_coefficients(lam, channel.in_dim)
    if tail > tol:
        raise TruncationError(
            f"two-mode squeezed tail {tail:.3e} at cutoff {channel.in_dim} exceeds {tol:.1e} for lambda={lam}"
        )
    return ChoiState(channel, float(lam), coeffs, tail)

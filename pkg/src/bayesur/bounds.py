"""Closed-form lower bounds on Bayesian MSD pairs and checkers against them.

All bounds use ``hbar = 1`` and the shrunken gain ``k = G / (1 + lam)``:

* general channels, pair ``(x, +-p)``: ``(k + |k -+ 1|)^2 / 4``
* entanglement-breaking channels:      ``(2k + 1)^2 / 4``
* joint measurements (``[M, N] = 0``):  ``k^2``

``lam = 0`` (uniform prior) is accepted here since every bound stays finite.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

SATURATION_RTOL = 1e-5
VIOLATION_ATOL = 1e-6

UPPER = +1
LOWER = -1


def _shrunk(G: float, lam: float) -> float:
    if G < 0 or lam < 0:
        raise ValueError(f"need G >= 0 and lambda >= 0, got G={G}, lambda={lam}")
    return G / (1.0 + lam)


def bound_channel(G: float, lam: float, sign: int = UPPER) -> float:
    """Product bound for the pair ``(x, sign * p)`` through any channel.

    ``sign=-1`` is the phase-conjugating branch.
    """
    if sign not in (UPPER, LOWER):
        raise ValueError("sign must be +1 or -1")
    k = _shrunk(G, lam)
    return 0.25 * (k + abs(k - sign)) ** 2


def bound_eb(G: float, lam: float) -> float:
    k = _shrunk(G, lam)
    return 0.25 * (2.0 * k + 1.0) ** 2


def bound_joint(G: float, lam: float) -> float:
    return _shrunk(G, lam) ** 2


def mib_bound(g_x: float, g_p: float, var_x: float, var_p: float, tol: float = 1e-12) -> float:
    """Most informative bound ``g_x var_x + g_p var_p + sqrt(g_x g_p)`` for pure Gaussian states."""
    if g_x < 0 or g_p < 0:
        raise ValueError("weights must be non-negative")
    if abs(var_x * var_p - 0.25) > tol:
        raise ValueError("the most informative bound is only provided for pure states (var_x * var_p = 1/4)")
    return g_x * var_x + g_p * var_p + math.sqrt(g_x * g_p)


@dataclass(frozen=True)
class BoundReport:
    kind: str
    lhs: float
    rhs: float
    slack: float
    saturated: bool
    violated: bool
    tolerance: float
    offset_negative: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def make_report(kind: str, lhs: float, rhs: float, error: float = 0.0, offset_negative: bool = False,
                rtol: float = SATURATION_RTOL, atol: float = VIOLATION_ATOL) -> BoundReport:
    """Compare ``lhs >= rhs`` allowing ``error`` of numerical slack.

    Violation means ``lhs < rhs - (atol + error)``.  Saturation means the
    slack is within ``rtol * |rhs| + error`` and nothing is violated.
    """
    lhs, rhs = float(lhs), float(rhs)
    slack = lhs - rhs
    tol = atol + error
    violated = (slack < -tol) and not offset_negative
    saturated = (not violated) and not offset_negative and abs(slack) <= rtol * max(abs(rhs), abs(lhs)) + error
    return BoundReport(kind, lhs, rhs, slack, bool(saturated), bool(violated), float(tol), bool(offset_negative))


def _error_budget(msd, a: float, b: float) -> float:
    """First-order propagation of the MSD error budget into a product ``a * b``."""
    e = msd.trunc_error + 3.0 * msd.stat_error
    return e * (abs(a) + abs(b)) + e * e


def product_check(msd, rhs: float, kind: str) -> BoundReport:
    a, b = msd.v_m_x, msd.v_n_p
    return make_report(kind, a * b, rhs, _error_budget(msd, a, b))


def channel_check(msd, sign: int = UPPER) -> BoundReport:
    G = msd.gain.G
    kind = "channel-B1-upper" if sign == UPPER else "channel-B1-lower"
    return product_check(msd, bound_channel(G, msd.prior.lam, sign), kind)


def eb_check(msd) -> BoundReport:
    return product_check(msd, bound_eb(msd.gain.G, msd.prior.lam), "eb-B2")


def joint_check(msd) -> BoundReport:
    return product_check(msd, bound_joint(msd.gain.G, msd.prior.lam), "joint-B3")


def corollary_check(msd, rescaled: bool = False) -> BoundReport:
    """``V_X V_P >= (G/(1+lam))^2``; ``rescaled=True`` checks ``~V_X ~V_P >= (1+lam)^-2``."""
    lam = msd.prior.lam
    G = msd.gain.G
    if not rescaled:
        return product_check(msd, bound_joint(G, lam), "corollary")
    R = msd.gain.R
    a = msd.v_m_x * math.exp(2 * R) / G
    b = msd.v_n_p * math.exp(-2 * R) / G
    scale = max(math.exp(2 * R), math.exp(-2 * R)) / G
    e = (msd.trunc_error + 3.0 * msd.stat_error) * scale
    return make_report("corollary-rescaled", a * b, (1.0 + lam) ** -2, e * (a + b) + e * e)


def _offsets(msd) -> tuple[float, float]:
    lam = msd.prior.lam
    return msd.gain.eta_x / (2 * (1 + lam)), msd.gain.eta_p / (2 * (1 + lam))


def lemma_check(msd, commutator_expectation: complex, lam: float | None = None) -> BoundReport:
    """Offset product against ``|<[M,N]> - i sqrt(eta_x eta_p)/(1+lam)|^2 / 4``.

    ``<[M,N]>`` is purely imaginary for Hermitian ``M``, ``N``; the reference
    mode contributes ``-i sqrt(tau_x tau_p)`` through ``[x_B, p_B] = i``, so
    the two terms are compared along the same imaginary axis.
    """
    if lam is not None and not math.isclose(lam, msd.prior.lam, rel_tol=1e-12):
        raise ValueError(f"commutator evaluated at lambda={lam}, MSD at lambda={msd.prior.lam}")
    off_m, off_n = _offsets(msd)
    a, b = msd.v_m_x - off_m, msd.v_n_p - off_n
    tau = msd.gain.G / (1 + msd.prior.lam)
    rhs = 0.25 * abs(complex(commutator_expectation) - 1j * tau) ** 2
    return make_report("lemma", a * b, rhs, _error_budget(msd, a, b), offset_negative=(a < 0 or b < 0))


def _eta_s(msd, eta, s):
    g_eta, g_s = msd.gain.G, msd.gain.s
    if eta is None:
        eta = g_eta
    if s is None:
        s = g_s
    if not (math.isclose(eta, g_eta, rel_tol=1e-9) and math.isclose(s, g_s, rel_tol=1e-9)):
        raise ValueError(f"(eta, s)=({eta}, {s}) does not match the MSD gains ({g_eta}, {g_s})")
    return eta, s


def sur2_check(msd, eta: float | None = None, s: float | None = None) -> BoundReport:
    """Joint-measurement trade-off with offsets: ``(V_M - a)(V_N - b) >= (eta/(1+lam))^2 / 4``."""
    eta, s = _eta_s(msd, eta, s)
    off_m, off_n = _offsets(msd)
    a, b = msd.v_m_x - off_m, msd.v_n_p - off_n
    rhs = 0.25 * (eta / (1 + msd.prior.lam)) ** 2
    return make_report("sur2", a * b, rhs, _error_budget(msd, a, b), offset_negative=(a < 0 or b < 0))


def tangent_lhs(v_m: float, v_n: float, eta: float, s: float, lam: float, t: float) -> float:
    k = eta / (1 + lam)
    return t * (v_m - 0.5 * k * s) + (v_n - 0.5 * k / s) / t


def tangent_check(msd, t: float, s: float | None = None) -> BoundReport:
    """Weighted-sum form ``t (V_M - a) + (V_N - b) / t >= eta / (1 + lam)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    eta, s = _eta_s(msd, None, s)
    lam = msd.prior.lam
    lhs = tangent_lhs(msd.v_m_x, msd.v_n_p, eta, s, lam, t)
    e = (msd.trunc_error + 3.0 * msd.stat_error) * (t + 1 / t)
    return make_report("tangent", lhs, eta / (1 + lam), e)


def sur2_curve(v_m, eta: float, s: float, lam: float) -> np.ndarray:
    """Minimum ``V_N`` on the saturated offset hyperbola; NaN where ``V_M`` is below its offset."""
    v_m = np.asarray(v_m, dtype=float)
    k = eta / (1 + lam)
    off_m, off_n = 0.5 * k * s, 0.5 * k / s
    with np.errstate(divide="ignore", invalid="ignore"):
        out = off_n + 0.25 * k * k / (v_m - off_m)
    return np.where(v_m > off_m, out, np.nan)


def tangent_line(v_m, eta: float, s: float, lam: float, t: float) -> np.ndarray:
    v_m = np.asarray(v_m, dtype=float)
    k = eta / (1 + lam)
    return 0.5 * k / s + t * (k - t * (v_m - 0.5 * k * s))


def lemma_rhs(commutator_expectation: complex, eta_x: float, eta_p: float, lam: float) -> float:
    """``|<[M,N]> - i sqrt(eta_x eta_p) / (1 + lam)|^2 / 4``."""
    tau = math.sqrt(eta_x * eta_p) / (1.0 + lam)
    return 0.25 * abs(complex(commutator_expectation) - 1j * tau) ** 2


KINDS = ("channel-B1-upper", "channel-B1-lower", "eb-B2", "joint-B3", "lemma", "sur2", "corollary", "mib", "tangent")

_REQUIRED = {
    "channel-B1-upper": ("G", "lam"),
    "channel-B1-lower": ("G", "lam"),
    "eb-B2": ("G", "lam"),
    "joint-B3": ("G", "lam"),
    "corollary": ("G", "lam"),
    "lemma": ("eta_x", "eta_p", "lam", "commutator"),
    "sur2": ("G", "lam", "s"),
    "mib": ("g_x", "g_p", "var_x", "var_p"),
    "tangent": ("G", "lam"),
}


@dataclass(frozen=True)
class BoundSpec:
    """A bound family member: ``kind`` plus the parameters it needs.

    >>> BoundSpec("eb-B2", {"G": 1.0, "lam": 0.0}).rhs()
    2.25
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in _REQUIRED:
            raise ValueError(f"unknown bound kind {self.kind!r}; expected one of {KINDS}")
        for key in _REQUIRED[self.kind]:
            if key not in self.params:
                raise ValueError(f"bound {self.kind} needs parameter {key!r}")
            value = self.params[key]
            if key != "commutator" and not math.isfinite(value):
                raise ValueError(f"parameter {key} must be finite")
        if self.params.get("G", 0.0) < 0 or self.params.get("lam", 0.0) < 0:
            raise ValueError("G and lambda must be non-negative")
        if self.params.get("s", 1.0) <= 0:
            raise ValueError("s must be positive")

    def rhs(self) -> float:
        p = self.params
        k = self.kind
        if k == "channel-B1-upper":
            return bound_channel(p["G"], p["lam"], UPPER)
        if k == "channel-B1-lower":
            return bound_channel(p["G"], p["lam"], LOWER)
        if k == "eb-B2":
            return bound_eb(p["G"], p["lam"])
        if k in ("joint-B3", "corollary"):
            return bound_joint(p["G"], p["lam"])
        if k == "lemma":
            return lemma_rhs(p["commutator"], p["eta_x"], p["eta_p"], p["lam"])
        if k == "sur2":
            return 0.25 * (p["G"] / (1 + p["lam"])) ** 2
        if k == "mib":
            return mib_bound(p["g_x"], p["g_p"], p["var_x"], p["var_p"])
        return p["G"] / (1 + p["lam"])

"""Closed-form MSDs for phase-covariant Gaussian measurement models.

When a model maps ``rho_alpha`` to readouts with mean ``k x_alpha`` (resp.
``k p_alpha``) and a fixed variance ``sigma2``, the Gaussian prior gives

    V(eta) = sigma2 + (k - sqrt(eta))^2 E[x_alpha^2] = sigma2 + (k - sqrt(eta))^2 / lam

because ``E[x_alpha^2] = 2 E[(Re alpha)^2] = 1/lam``.  These expressions are
independent of the Fock-space numerics and serve as oracles for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CovariantResponse:
    """Per-quadrature response: mean gain ``k`` and added variance ``sigma2``."""

    k: float
    sigma2: float

    def msd(self, eta: float, lam: float) -> float:
        bias = self.k - math.sqrt(eta)
        if lam == 0:
            return self.sigma2 if bias == 0 else math.inf
        return self.sigma2 + bias * bias / lam


def identity() -> CovariantResponse:
    return CovariantResponse(1.0, 0.5)


def loss(T: float) -> CovariantResponse:
    return CovariantResponse(math.sqrt(T), 0.5)


def amplifier(G: float) -> CovariantResponse:
    return CovariantResponse(math.sqrt(G), G - 0.5)


def heterodyne_mp(g: float) -> CovariantResponse:
    """Measure heterodyne, re-prepare ``|g beta>``: one unit of detection noise scaled by ``g^2`` plus vacuum."""
    return CovariantResponse(g, g * g + 0.5)


def scaled_heterodyne(c: float) -> CovariantResponse:
    return CovariantResponse(c, c * c)


def half_bs(c: float, s: float = 1.0) -> tuple[CovariantResponse, CovariantResponse]:
    """Half beam splitter read out as ``(c sqrt(s) x (x) 1, 1 (x) c p / sqrt(s))``."""
    a, b = c * math.sqrt(s), c / math.sqrt(s)
    return (CovariantResponse(a / math.sqrt(2), a * a / 2), CovariantResponse(b / math.sqrt(2), b * b / 2))


def pair(response, eta_x: float, eta_p: float, lam: float) -> tuple[float, float]:
    """``(V_M, V_N)`` for one shared response or an ``(x, p)`` pair of responses."""
    rx, rp = response if isinstance(response, tuple) else (response, response)
    return rx.msd(eta_x, lam), rp.msd(eta_p, lam)


def halfbs_saturating_scale(eta: float, lam: float) -> float:
    """Scale ``c`` making the half-beam-splitter readout reach ``eta/(1+lam) (s, 1/s)``."""
    return math.sqrt(2.0 * eta) / (1.0 + lam)


def optimal_shrinkage(G: float, lam: float) -> float:
    """Bayes-optimal linear factor ``sqrt(G)/(1+lam)`` for heterodyne-based estimates."""
    return math.sqrt(G) / (1.0 + lam)

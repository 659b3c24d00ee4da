"""Independent oracles the test suite checks everything else against.

Finite-difference gradients, analytic Gaussian transport/divergence values,
and the closed-form bounds, kept deliberately separate from the code they
audit: nothing here is imported by the engine or the accountant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Example, InvalidParameterError, Vector, as_vector
from .losses import GlmLoss, loss_value


@dataclass(frozen=True)
class BoundReport:
    """Empirical value vs. a theoretical upper bound, with Monte-Carlo slack."""

    bound_value: float
    empirical_value: float
    standard_error: float
    satisfied: bool = field(init=False)

    def __post_init__(self):
        if self.standard_error < 0:
            raise InvalidParameterError("standard error must be >= 0")
        ok = self.empirical_value <= self.bound_value + 3.0 * self.standard_error
        object.__setattr__(self, "satisfied", bool(ok))


def finite_diff_gradient(loss: GlmLoss, w, z: Example, h: float) -> Vector:
    """Central-difference gradient, (ℓ(w+heᵢ) − ℓ(w−heᵢ))/(2h) per coordinate."""
    if not h > 0:
        raise InvalidParameterError(f"step h must be > 0, got {h}")
    w = as_vector(w)
    g = np.empty_like(w)
    for i in range(w.shape[0]):
        wp = w.copy()
        wm = w.copy()
        wp[i] += h
        wm[i] -= h
        g[i] = (loss_value(loss, wp, z) - loss_value(loss, wm, z)) / (2.0 * h)
    return g


def w2_isotropic_gaussian(m1, m2, s: float) -> float:
    """W₂ distance between N(m1, s²I) and N(m2, s²I).

    Equal isotropic covariances transport onto each other for free, leaving
    only the mean shift: W₂ = ‖m1 − m2‖₂.
    """
    if s < 0:
        raise InvalidParameterError(f"scale must be >= 0, got {s}")
    return float(np.linalg.norm(as_vector(m1) - as_vector(m2)))


def renyi_gaussian(alpha: float, mu1, mu2, sigma2: float) -> float:
    """Order-α Rényi divergence between N(μ1, σ²I) and N(μ2, σ²I): α‖μ1−μ2‖²/(2σ²)."""
    if not alpha > 1:
        raise InvalidParameterError(f"order must be > 1, got {alpha}")
    if sigma2 < 0:
        raise InvalidParameterError(f"variance must be >= 0, got {sigma2}")
    gap2 = float(np.sum((as_vector(mu1) - as_vector(mu2)) ** 2))
    if sigma2 == 0.0:
        return 0.0 if gap2 == 0.0 else math.inf
    return alpha * gap2 / (2.0 * sigma2)


def stability_bound(t: int, n: int, G: float, etas) -> float:
    """Coupled-run bound on E‖w_t − w_t′‖²: 4G²(t/n² + 1/n)·Σ_{s≤t} η_s²."""
    etas = np.asarray(etas, dtype=np.float64)
    if not 1 <= t <= etas.shape[0]:
        raise InvalidParameterError(f"t={t} outside the schedule of length {etas.shape[0]}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return 4.0 * G * G * (t / n**2 + 1.0 / n) * float(np.sum(etas[:t] ** 2))


def theorem1_excess_bound(
    w_norm: float, n: int, G: float, eta0: float, epsilon: float, delta: float, trace: float
) -> float:
    """Single-pass excess-risk bound: ln(n)(G‖w‖² + 1.5η₀²G)/(η₀√n) + η₀²ln(1/δ)·trace/(ε²n)."""
    _require_positive(n=n, G=G, eta0=eta0, epsilon=epsilon)
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must be in (0,1), got {delta}")
    if w_norm < 0 or trace < 0:
        raise InvalidParameterError("w_norm and trace must be >= 0")
    opt = math.log(n) * (G * w_norm**2 + 1.5 * eta0**2 * G) / (eta0 * math.sqrt(n))
    priv = eta0**2 * math.log(1.0 / delta) * trace / (epsilon**2 * n)
    return opt + priv


def theorem2_excess_bound(
    w_norm: float,
    n: int,
    pass_exponent: float,
    G: float,
    eta0: float,
    epsilon: float,
    delta: float,
    trace: float,
) -> float:
    """Multi-pass excess-risk shape oracle with the hidden constant set to 1.

    G‖w‖²√(ln(T/δ))/(η₀√n) + η₀G/√(n·ln(1/δ)) + η₀²·trace/(ε²·n^{α−1}),
    T = round(n^α·ε²). Shape only: the stated bound hides an absolute
    constant, so this value is never used in ≤ assertions.
    """
    _require_positive(n=n, G=G, eta0=eta0, epsilon=epsilon)
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must be in (0,1), got {delta}")
    if not 1 <= pass_exponent <= 2:
        raise InvalidParameterError(f"pass exponent must be in [1,2], got {pass_exponent}")
    if w_norm < 0 or trace < 0:
        raise InvalidParameterError("w_norm and trace must be >= 0")
    T = max(1, round(n**pass_exponent * epsilon**2))
    comp = G * w_norm**2 * math.sqrt(math.log(T / delta)) / (eta0 * math.sqrt(n))
    opt = eta0 * G / math.sqrt(n * math.log(1.0 / delta))
    priv = eta0**2 * trace / (epsilon**2 * n ** (pass_exponent - 1.0))
    return comp + opt + priv


def _require_positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise InvalidParameterError(f"{name} must be > 0, got {value}")

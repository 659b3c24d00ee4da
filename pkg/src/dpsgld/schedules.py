"""Per-step parameter sequences (η_t, λ_t, β₀, |M_t|) for both run modes.

Single pass: constant η, λ_t = 1/(tη), growing mini-batches, an explicit
Rényi order, and a sample budget Σ_t |M_t| ≈ √2·T that the runner requires
the dataset to cover (the budget is reported, never silently rescaled).

Multi pass: T = round(n^α·ε²) unit batches sampled with replacement,
β₀ = η₀²·n/T, strictly decreasing η_t, and λ_t = 1/η_t − 1/η_{t−1}.

Both schedules pin λ₁η₁ = 1 exactly, which makes the first update's output
N(0, β₀I) regardless of the data; the initial draw is step one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import InvalidParameterError

SINGLE_PASS = "single-pass"
MULTI_PASS = "multi-pass"


def minibatch_size(T: int, t: int) -> int:
    """⌈√(T/(2(T−t+1)))⌉, computed in exact integer arithmetic."""
    if not 1 <= t <= T:
        raise InvalidParameterError(f"step t={t} outside 1..{T}")
    k = T - t + 1
    # smallest m with m²·2k >= T
    m = math.isqrt(T // (2 * k))
    while m * m * 2 * k < T:
        m += 1
    return max(m, 1)


@dataclass(frozen=True)
class SinglePassSchedule:
    T: int
    G: float
    eta0: float
    epsilon: float
    delta: float
    eta: float
    beta0: float
    renyi_order: float

    mode = SINGLE_PASS

    def lambda_(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"step t={t} outside 1..{self.T}")
        return 1.0 / (t * self.eta)

    def lambda_eta(self, t: int) -> float:
        # λ_t·η = 1/t exactly; kept separate from lambda_() so noise variances
        # never pick up the 1/η roundtrip error.
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"step t={t} outside 1..{self.T}")
        return 1.0 / t

    def batch_size(self, t: int) -> int:
        return minibatch_size(self.T, t)

    @cached_property
    def sample_budget(self) -> int:
        return sum(minibatch_size(self.T, t) for t in range(1, self.T + 1))


def single_pass_schedule(
    T: int, G: float, eta0: float, epsilon: float, delta: float
) -> SinglePassSchedule:
    """Schedule with η = η₀√(1/(4G²T)), β₀ = (ε + ln(1/δ))η₀²/(2ε²T), α = 1 + ln(1/δ)/ε."""
    if not (isinstance(T, (int, np.integer)) and T >= 1):
        raise InvalidParameterError(f"T must be an integer >= 1, got {T}")
    _require_positive(G=G, eta0=eta0, epsilon=epsilon)
    _require_unit_interval(delta=delta)
    eta = eta0 * math.sqrt(1.0 / (4.0 * G * G * T))
    beta0 = (epsilon + math.log(1.0 / delta)) * eta0**2 / (2.0 * epsilon**2 * T)
    renyi_order = 1.0 + math.log(1.0 / delta) / epsilon
    return SinglePassSchedule(
        T=int(T),
        G=float(G),
        eta0=float(eta0),
        epsilon=float(epsilon),
        delta=float(delta),
        eta=eta,
        beta0=beta0,
        renyi_order=renyi_order,
    )


def sample_budget(schedule: SinglePassSchedule) -> int:
    """Total examples a single-pass run consumes, Σ_t batchSize(t)."""
    return schedule.sample_budget


@dataclass(frozen=True)
class MultiPassSchedule:
    n: int
    pass_exponent: float
    epsilon: float
    delta: float
    eta0: float
    G: float
    T: int
    beta0: float

    mode = MULTI_PASS

    @cached_property
    def etas(self) -> np.ndarray:
        """η_t = G⁻¹√β₀ / √(8·ln(2.5t²/(nδ))·t) for t = 1..T (read-only array)."""
        t = np.arange(1, self.T + 1, dtype=np.float64)
        logs = np.log(2.5 * t * t / (self.n * self.delta))
        e = math.sqrt(self.beta0) / (self.G * np.sqrt(8.0 * logs * t))
        e.setflags(write=False)
        return e

    @cached_property
    def lambda_etas(self) -> np.ndarray:
        """λ_t·η_t: exactly 1 at t = 1, then 1 − η_t/η_{t−1} ∈ (0, 1)."""
        e = self.etas
        le = np.empty(self.T)
        le[0] = 1.0
        if self.T > 1:
            le[1:] = 1.0 - e[1:] / e[:-1]
        le.setflags(write=False)
        return le

    def eta(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"step t={t} outside 1..{self.T}")
        return float(self.etas[t - 1])

    def lambda_(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"step t={t} outside 1..{self.T}")
        if t == 1:
            return 1.0 / float(self.etas[0])
        return 1.0 / float(self.etas[t - 1]) - 1.0 / float(self.etas[t - 2])

    def lambda_eta(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"step t={t} outside 1..{self.T}")
        return float(self.lambda_etas[t - 1])

    def batch_size(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise InvalidParameterError(f"step t={t} outside 1..{self.T}")
        return 1

    @property
    def sample_budget(self) -> int:
        # one draw with replacement per step
        return self.T


def multi_pass_schedule(
    n: int, pass_exponent: float, epsilon: float, delta: float, eta0: float, G: float
) -> MultiPassSchedule:
    """Schedule with T = round(n^α·ε²), β₀ = η₀²·n/T, decreasing η_t."""
    if not (isinstance(n, (int, np.integer)) and n >= 2):
        raise InvalidParameterError(f"n must be an integer >= 2, got {n}")
    if not 1.0 <= pass_exponent <= 2.0:
        raise InvalidParameterError(f"pass exponent must be in [1, 2], got {pass_exponent}")
    _require_positive(epsilon=epsilon, eta0=eta0, G=G)
    _require_unit_interval(delta=delta)
    T = round(float(n) ** pass_exponent * epsilon * epsilon)
    if T < 1:
        raise InvalidParameterError(
            f"T = round(n^α·ε²) = {T} < 1: epsilon too small for n={n}, α={pass_exponent}"
        )
    if not 2.5 / (n * delta) > 1.0:
        raise InvalidParameterError(
            f"need 2.5/(n·δ) > 1 for a real step size at t=1, got n·δ = {n * delta:.6g}"
        )
    beta0 = eta0 * eta0 * (n / T)
    return MultiPassSchedule(
        n=int(n),
        pass_exponent=float(pass_exponent),
        epsilon=float(epsilon),
        delta=float(delta),
        eta0=float(eta0),
        G=float(G),
        T=int(T),
        beta0=beta0,
    )


def schedule_text(schedule) -> str:
    """Human-readable key/value block for experiment logs."""
    lines = [
        f"mode = {schedule.mode}",
        f"T = {schedule.T}",
        f"eta0 = {schedule.eta0:.9g}",
        f"beta0 = {schedule.beta0:.9g}",
        f"epsilon = {schedule.epsilon:.9g}",
        f"delta = {schedule.delta:.9g}",
        f"G = {schedule.G:.9g}",
        f"sample_budget = {schedule.sample_budget}",
    ]
    return "\n".join(lines) + "\n"


def _require_positive(**kwargs) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise InvalidParameterError(f"{name} must be > 0, got {value}")


def _require_unit_interval(**kwargs) -> None:
    for name, value in kwargs.items():
        if not 0.0 < value < 1.0:
            raise InvalidParameterError(f"{name} must be in (0, 1), got {value}")

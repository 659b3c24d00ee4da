"""The noisy update loop: gradient step, shrink, Gaussian resample.

One step maps w to N((1−λ_tη_t)(w − η_t·ḡ), λ_tη_t(2−λ_tη_t)β₀·I) where ḡ is
the mini-batch mean gradient. Both schedules set λ₁η₁ = 1, so step one's
output is N(0, β₀I) no matter what the data says: the initial draw and the
first update coincide, and a run is exactly T update steps from a zero state.

Single-pass runs consume disjoint blocks of a pre-shuffled dataset so each
example feeds exactly one gradient; multi-pass runs sample one index per step
with replacement. Coupled runs execute two chains under shared index and
noise streams for the stability experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, InvalidParameterError, RngStream, Vector, as_vector, seeded_rng
from .losses import GlmLoss, loss_bounds
from .schedules import MultiPassSchedule, SinglePassSchedule


@dataclass
class SgldState:
    """Chain state after t steps; the rng is the chain's noise stream."""

    t: int
    w: Vector
    samples_consumed: int
    rng: RngStream


@dataclass(frozen=True)
class RunRecord:
    """What a finished run exposes: final iterate plus thinned logs."""

    mode: str
    final_iterate: Vector
    iterate_log: list | None
    per_step_risk: list | None
    samples_consumed: int


def _noise_std(lambda_eta: float, beta0: float) -> float:
    if not 0.0 <= lambda_eta <= 2.0:
        raise InvalidParameterError(
            f"lambda_t*eta_t = {lambda_eta:.6g} outside [0, 2]: negative noise variance"
        )
    if beta0 < 0:
        raise InvalidParameterError(f"beta0 must be >= 0, got {beta0}")
    return float(np.sqrt(lambda_eta * (2.0 - lambda_eta) * beta0))


def _step_arrays(
    w: Vector,
    Xb: np.ndarray,
    yb: np.ndarray,
    eta_t: float,
    lambda_eta: float,
    noise_std: float,
    loss: GlmLoss,
    noise_rng: RngStream,
) -> Vector:
    grad = (loss.phi_prime(Xb @ w, yb) @ Xb) / Xb.shape[0]
    w_tilde = w - eta_t * grad
    w_next = (1.0 - lambda_eta) * w_tilde
    if noise_std > 0.0:
        w_next = w_next + noise_std * noise_rng.generator.standard_normal(w.shape[0])
    return w_next


def sgld_step(
    state: SgldState,
    minibatch: list,
    eta_t: float,
    lambda_t: float,
    beta0: float,
    loss: GlmLoss,
) -> SgldState:
    """One update: w̃ = w − η·ḡ, then the shrink-and-noise resample.

    Args:
        state: current chain state; its rng supplies the noise draw.
        minibatch: nonempty list of Example; ḡ averages their gradients.
        eta_t: step size.
        lambda_t: regularization weight; λ_tη_t must lie in [0, 2].
        beta0: prior variance scale.
        loss: the loss family.

    Returns:
        The advanced state (t+1, new iterate, updated consumption count).
    """
    if not minibatch:
        raise InvalidParameterError("minibatch must be nonempty")
    w = as_vector(state.w)
    Xb = np.stack([z.x for z in minibatch])
    if Xb.shape[1] != w.shape[0]:
        raise InvalidParameterError(
            f"dimension mismatch: w has {w.shape[0]} coordinates, x has {Xb.shape[1]}"
        )
    yb = np.array([z.y for z in minibatch])
    le = lambda_t * eta_t
    std = _noise_std(le, beta0)
    w_next = _step_arrays(w, Xb, yb, eta_t, le, std, loss, state.rng)
    return SgldState(
        t=state.t + 1,
        w=w_next,
        samples_consumed=state.samples_consumed + len(minibatch),
        rng=state.rng,
    )


def run_single_pass(
    dataset: Dataset,
    loss: GlmLoss,
    schedule: SinglePassSchedule,
    rng: RngStream,
    log_interval: int | None = None,
    risk_eval=None,
    risk_interval: int | None = None,
) -> RunRecord:
    """Run T steps over disjoint blocks of a pre-shuffled dataset.

    Requires dataset.n >= the schedule's sample budget; consumes exactly the
    budget, each example at most once. ``rng`` is split into a shuffle stream
    and a noise stream, so two runs with equal (dataset, schedule, seed)
    produce identical records.

    Args:
        log_interval: iterate-log thinning; default max(1, T//1000). The final
            iterate is always logged.
        risk_eval: optional callable w -> (population_risk, empirical_risk),
            applied every ``risk_interval`` steps (default: log_interval).
    """
    budget = schedule.sample_budget
    if dataset.n < budget:
        raise InvalidParameterError(
            f"single-pass run needs at least {budget} examples "
            f"(sample budget for T={schedule.T}), dataset has {dataset.n}"
        )
    order = rng.substream(0).generator.permutation(dataset.n)
    noise_rng = rng.substream(1)
    T = schedule.T
    log_interval = max(1, T // 1000) if log_interval is None else max(1, int(log_interval))
    risk_interval = log_interval if risk_interval is None else max(1, int(risk_interval))

    w = np.zeros(dataset.d)
    iterate_log: list = []
    per_step_risk: list | None = [] if risk_eval is not None else None
    pos = 0
    for t in range(1, T + 1):
        b = schedule.batch_size(t)
        idx = order[pos : pos + b]
        pos += b
        le = schedule.lambda_eta(t)
        std = _noise_std(le, schedule.beta0)
        w = _step_arrays(w, dataset.X[idx], dataset.y[idx], schedule.eta, le, std, loss, noise_rng)
        if t % log_interval == 0 or t == T:
            iterate_log.append((t, w.copy()))
        if risk_eval is not None and (t % risk_interval == 0 or t == T):
            pop, emp = risk_eval(w)
            per_step_risk.append((t, float(pop), float(emp)))
    assert pos == budget
    return RunRecord(
        mode=schedule.mode,
        final_iterate=w,
        iterate_log=iterate_log,
        per_step_risk=per_step_risk,
        samples_consumed=budget,
    )


def run_multi_pass(
    dataset: Dataset,
    loss: GlmLoss,
    schedule: MultiPassSchedule,
    rng: RngStream,
    log_interval: int | None = None,
    risk_eval=None,
    risk_interval: int | None = None,
) -> RunRecord:
    """Run T steps sampling one example per step uniformly with replacement.

    Same logging contract as run_single_pass. A degenerate T = 0 schedule
    returns just the initial N(0, β₀I) draw.
    """
    T = schedule.T
    noise_rng = rng.substream(1)
    if T == 0:
        w = float(np.sqrt(schedule.beta0)) * noise_rng.generator.standard_normal(dataset.d)
        return RunRecord(schedule.mode, w, [(0, w.copy())], None, 0)
    indices = rng.substream(0).generator.integers(0, dataset.n, size=T)
    log_interval = max(1, T // 1000) if log_interval is None else max(1, int(log_interval))
    risk_interval = log_interval if risk_interval is None else max(1, int(risk_interval))

    etas = schedule.etas
    lambda_etas = schedule.lambda_etas
    stds = np.sqrt(lambda_etas * (2.0 - lambda_etas) * schedule.beta0)
    X, y = dataset.X, dataset.y
    w = np.zeros(dataset.d)
    iterate_log: list = []
    per_step_risk: list | None = [] if risk_eval is not None else None
    for t in range(1, T + 1):
        i = indices[t - 1]
        w = _step_arrays(
            w, X[i : i + 1], y[i : i + 1], float(etas[t - 1]),
            float(lambda_etas[t - 1]), float(stds[t - 1]), loss, noise_rng,
        )
        if t % log_interval == 0 or t == T:
            iterate_log.append((t, w.copy()))
        if risk_eval is not None and (t % risk_interval == 0 or t == T):
            pop, emp = risk_eval(w)
            per_step_risk.append((t, float(pop), float(emp)))
    return RunRecord(
        mode=schedule.mode,
        final_iterate=w,
        iterate_log=iterate_log,
        per_step_risk=per_step_risk,
        samples_consumed=T,
    )


def coupled_stability_run(
    dataset: Dataset,
    dataset_prime: Dataset,
    loss: GlmLoss,
    schedule: MultiPassSchedule,
    seed: int,
) -> list:
    """Run two chains on neighboring datasets under shared randomness.

    The datasets must agree everywhere except possibly the last example; the
    chains share both the index stream and the noise stream, so the squared
    distance grows only when the differing index is sampled. Returns
    [(t, ‖w_t − w_t′‖₂²)] for every step.
    """
    if dataset.n != dataset_prime.n or dataset.d != dataset_prime.d:
        raise InvalidParameterError("neighboring datasets must share n and d")
    n = dataset.n
    same = np.all(dataset.X[: n - 1] == dataset_prime.X[: n - 1]) and np.all(
        dataset.y[: n - 1] == dataset_prime.y[: n - 1]
    )
    if not same:
        raise InvalidParameterError(
            "neighboring datasets may differ only in the last example"
        )
    bounds = loss_bounds(loss)
    eta1 = schedule.eta(1)
    if bounds.L > 0 and eta1 > 1.0 / bounds.L:
        raise InvalidParameterError(
            f"eta_1 = {eta1:.6g} exceeds 1/L = {1.0 / bounds.L:.6g}"
        )
    T = schedule.T
    indices = seeded_rng(seed, 0).generator.integers(0, n, size=T)
    noise_gen = seeded_rng(seed, 1).generator
    etas = schedule.etas
    lambda_etas = schedule.lambda_etas
    stds = np.sqrt(lambda_etas * (2.0 - lambda_etas) * schedule.beta0)

    w = np.zeros(dataset.d)
    wp = np.zeros(dataset.d)
    out = []
    for t in range(1, T + 1):
        i = indices[t - 1]
        eta_t = float(etas[t - 1])
        le = float(lambda_etas[t - 1])
        noise = float(stds[t - 1]) * noise_gen.standard_normal(dataset.d)
        ga = float(loss.phi_prime(dataset.X[i] @ w, dataset.y[i])) * dataset.X[i]
        gb = float(loss.phi_prime(dataset_prime.X[i] @ wp, dataset_prime.y[i])) * dataset_prime.X[i]
        w = (1.0 - le) * (w - eta_t * ga) + noise
        wp = (1.0 - le) * (wp - eta_t * gb) + noise
        diff = w - wp
        out.append((t, float(diff @ diff)))
    return out


def write_run_record(record: RunRecord, path) -> None:
    """Line-oriented record file: one row per logged step."""
    risk_at = {t: (p, e) for (t, p, e) in (record.per_step_risk or [])}
    lines = ["t,risk_population,risk_empirical,iterate_norm"]
    for t, w in record.iterate_log or []:
        pop, emp = risk_at.get(t, (float("nan"), float("nan")))
        lines.append(
            f"{t},{pop:.9g},{emp:.9g},{float(np.linalg.norm(w)):.9g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

import numpy as np
import pytest

from dpsgld.core import Dataset, Example, InvalidParameterError, seeded_rng
from dpsgld.engine import (
    RunRecord,
    SgldState,
    coupled_stability_run,
    run_multi_pass,
    run_single_pass,
    sgld_step,
    write_run_record,
)
from dpsgld.losses import GlmLoss
from dpsgld.schedules import MultiPassSchedule, multi_pass_schedule, single_pass_schedule

LOGISTIC = GlmLoss("logistic")
QUADRATIC = GlmLoss("quadratic")


def toy_dataset(n, d, seed=0):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((n, d))
    X *= 0.9 / np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    y = np.where(gen.random(n) < 0.5, -1.0, 1.0)
    return Dataset(X, y)


class TestSgldStep:
    def test_pure_gradient_step_when_lambda_zero(self):
        z = Example(np.array([0.0, 1.0]), 1.0)
        state = SgldState(t=0, w=np.zeros(2), samples_consumed=0, rng=seeded_rng(1, 0))
        out = sgld_step(state, [z], eta_t=0.5, lambda_t=0.0, beta0=1.0, loss=LOGISTIC)
        np.testing.assert_allclose(out.w, [0.0, 0.25], rtol=1e-14)
        assert out.t == 1 and out.samples_consumed == 1

    def test_full_shrink_is_data_independent(self):
        beta0 = 0.7
        eta = 0.2
        za = Example(np.array([0.9, 0.0]), 1.0)
        zb = Example(np.array([0.0, -0.9]), -1.0)
        wa = sgld_step(
            SgldState(0, np.array([5.0, -3.0]), 0, seeded_rng(42, 1)),
            [za], eta, 1.0 / eta, beta0, LOGISTIC,
        ).w
        wb = sgld_step(
            SgldState(0, np.array([-8.0, 2.0]), 0, seeded_rng(42, 1)),
            [zb], eta, 1.0 / eta, beta0, LOGISTIC,
        ).w
        np.testing.assert_array_equal(wa, wb)
        z = seeded_rng(42, 1).generator.standard_normal(2)
        np.testing.assert_allclose(wa, np.sqrt(beta0) * z, rtol=1e-15)

    def test_lambda_eta_two_flips_sign_without_noise(self):
        z = Example(np.array([0.5, 0.5]), 1.0)
        w0 = np.array([1.0, 2.0])
        state = SgldState(0, w0, 0, seeded_rng(3, 0))
        out = sgld_step(state, [z], eta_t=0.1, lambda_t=20.0, beta0=0.5, loss=QUADRATIC)
        g = float(QUADRATIC.phi_prime(w0 @ z.x, z.y)) * z.x
        np.testing.assert_allclose(out.w, -(w0 - 0.1 * g), rtol=1e-14)

    def test_minibatch_mean_gradient(self):
        zs = [Example(np.array([0.4, 0.0]), 1.0), Example(np.array([0.0, 0.8]), -1.0)]
        state = SgldState(0, np.zeros(2), 0, seeded_rng(0, 0))
        out = sgld_step(state, zs, eta_t=1.0, lambda_t=0.0, beta0=0.0, loss=QUADRATIC)
        g = (float(QUADRATIC.phi_prime(0.0, 1.0)) * zs[0].x
             + float(QUADRATIC.phi_prime(0.0, -1.0)) * zs[1].x) / 2.0
        np.testing.assert_allclose(out.w, -g, rtol=1e-14)
        assert out.samples_consumed == 2

    def test_rejects_bad_inputs(self):
        state = SgldState(0, np.zeros(2), 0, seeded_rng(0, 0))
        with pytest.raises(InvalidParameterError):
            sgld_step(state, [], 0.1, 1.0, 1.0, LOGISTIC)
        z3 = Example(np.array([0.1, 0.1, 0.1]), 1.0)
        with pytest.raises(InvalidParameterError):
            sgld_step(state, [z3], 0.1, 1.0, 1.0, LOGISTIC)
        z = Example(np.array([0.1, 0.1]), 1.0)
        with pytest.raises(InvalidParameterError):
            sgld_step(state, [z], 0.1, 30.0, 1.0, LOGISTIC)  # lambda*eta = 3 > 2
        with pytest.raises(InvalidParameterError):
            sgld_step(state, [z], 0.1, 1.0, -1.0, LOGISTIC)


class TestRunSinglePass:
    def test_budget_shortfall_names_required_count(self):
        sched = single_pass_schedule(8, 1.0, 1.0, 0.5, 1e-5)
        data = toy_dataset(10, 3)
        with pytest.raises(InvalidParameterError, match="at least 11"):
            run_single_pass(data, LOGISTIC, sched, seeded_rng(0, 0))

    def test_consumes_exact_budget(self):
        sched = single_pass_schedule(8, 1.0, 1.0, 0.5, 1e-5)
        data = toy_dataset(50, 3)
        rec = run_single_pass(data, LOGISTIC, sched, seeded_rng(0, 0))
        assert rec.samples_consumed == 11
        assert rec.mode == "single-pass"

    def test_deterministic_replay(self):
        sched = single_pass_schedule(32, 1.0, 1.0, 0.5, 1e-5)
        data = toy_dataset(80, 4)
        a = run_single_pass(data, LOGISTIC, sched, seeded_rng(7, 0), log_interval=1)
        b = run_single_pass(data, LOGISTIC, sched, seeded_rng(7, 0), log_interval=1)
        np.testing.assert_array_equal(a.final_iterate, b.final_iterate)
        assert len(a.iterate_log) == len(b.iterate_log) == 32
        for (ta, wa), (tb, wb) in zip(a.iterate_log, b.iterate_log):
            assert ta == tb
            np.testing.assert_array_equal(wa, wb)

    def test_seed_changes_outcome(self):
        sched = single_pass_schedule(32, 1.0, 1.0, 0.5, 1e-5)
        data = toy_dataset(80, 4)
        a = run_single_pass(data, LOGISTIC, sched, seeded_rng(7, 0))
        b = run_single_pass(data, LOGISTIC, sched, seeded_rng(8, 0))
        assert not np.array_equal(a.final_iterate, b.final_iterate)

    def test_log_thinning(self):
        sched = single_pass_schedule(20, 1.0, 1.0, 0.5, 1e-5)
        data = toy_dataset(60, 2)
        rec = run_single_pass(data, LOGISTIC, sched, seeded_rng(1, 0), log_interval=7)
        assert [t for t, _ in rec.iterate_log] == [7, 14, 20]

    def test_risk_eval_hook(self):
        sched = single_pass_schedule(10, 1.0, 1.0, 0.5, 1e-5)
        data = toy_dataset(40, 2)
        calls = []

        def fake_eval(w):
            calls.append(np.linalg.norm(w))
            return 0.5, 0.25

        rec = run_single_pass(
            data, LOGISTIC, sched, seeded_rng(1, 0), log_interval=5, risk_eval=fake_eval
        )
        assert [t for t, _, _ in rec.per_step_risk] == [5, 10]
        assert len(calls) == 2
        assert rec.per_step_risk[0][1:] == (0.5, 0.25)

    def test_first_step_output_ignores_data(self):
        # lambda_1 eta_1 = 1, so a T = 1 run is the prior draw N(0, beta0 I)
        sched = single_pass_schedule(1, 1.0, 1.0, 0.5, 1e-5)
        a = run_single_pass(toy_dataset(5, 3, seed=1), LOGISTIC, sched, seeded_rng(9, 0))
        b = run_single_pass(toy_dataset(5, 3, seed=2), LOGISTIC, sched, seeded_rng(9, 0))
        np.testing.assert_array_equal(a.final_iterate, b.final_iterate)


class TestRunMultiPass:
    def test_deterministic_replay(self):
        sched = multi_pass_schedule(40, 1.5, 0.9, 1e-4, 1.0, 1.0)
        data = toy_dataset(40, 3)
        a = run_multi_pass(data, LOGISTIC, sched, seeded_rng(11, 0), log_interval=1)
        b = run_multi_pass(data, LOGISTIC, sched, seeded_rng(11, 0), log_interval=1)
        np.testing.assert_array_equal(a.final_iterate, b.final_iterate)
        assert a.samples_consumed == b.samples_consumed == sched.T

    def test_first_logged_iterate_ignores_data(self):
        sched = multi_pass_schedule(40, 1.5, 0.9, 1e-4, 1.0, 1.0)
        a = run_multi_pass(toy_dataset(40, 3, seed=1), LOGISTIC, sched, seeded_rng(2, 0), log_interval=1)
        b = run_multi_pass(toy_dataset(40, 3, seed=2), LOGISTIC, sched, seeded_rng(2, 0), log_interval=1)
        np.testing.assert_array_equal(a.iterate_log[0][1], b.iterate_log[0][1])
        assert not np.array_equal(a.final_iterate, b.final_iterate)

    def test_degenerate_t_zero_returns_prior_draw(self):
        sched = MultiPassSchedule(
            n=10, pass_exponent=1.0, epsilon=0.1, delta=1e-4,
            eta0=1.0, G=1.0, T=0, beta0=0.25,
        )
        rec = run_multi_pass(toy_dataset(10, 4), LOGISTIC, sched, seeded_rng(3, 0))
        assert rec.samples_consumed == 0
        assert [t for t, _ in rec.iterate_log] == [0]
        z = seeded_rng(3, 0).substream(1).generator.standard_normal(4)
        np.testing.assert_allclose(rec.final_iterate, 0.5 * z, rtol=1e-15)

    def test_final_state_always_logged(self):
        sched = multi_pass_schedule(30, 1.5, 0.9, 1e-4, 1.0, 1.0)
        rec = run_multi_pass(toy_dataset(30, 2), LOGISTIC, sched, seeded_rng(4, 0), log_interval=10**6)
        assert [t for t, _ in rec.iterate_log] == [sched.T]
        np.testing.assert_array_equal(rec.iterate_log[-1][1], rec.final_iterate)


class TestCoupledStabilityRun:
    def swapped_pair(self, n=24, d=3, seed=5):
        # flip only the last label; negating (x, y) jointly would leave the
        # logistic gradient unchanged and the chains would never separate
        data = toy_dataset(n, d, seed=seed)
        yp = data.y.copy()
        yp[-1] = -yp[-1]
        return data, Dataset(data.X, yp)

    def test_identical_datasets_never_separate(self):
        data = toy_dataset(20, 3)
        sched = multi_pass_schedule(20, 1.5, 0.9, 1e-4, 0.2, 1.0)
        out = coupled_stability_run(data, data, LOGISTIC, sched, seed=77)
        assert len(out) == sched.T
        assert all(dist == 0.0 for _, dist in out)

    def test_distance_zero_until_swap_index_sampled(self):
        data, prime = self.swapped_pair()
        sched = multi_pass_schedule(24, 1.5, 0.9, 1e-4, 0.2, 1.0)
        seed = 123
        out = coupled_stability_run(data, prime, LOGISTIC, sched, seed=seed)
        indices = seeded_rng(seed, 0).generator.integers(0, data.n, size=sched.T)
        hits = np.flatnonzero(indices == data.n - 1) + 1
        # a hit at t=1 cannot separate the chains: lambda_1*eta_1 = 1 wipes
        # the data term, so the first effective hit is the first with t >= 2
        effective = [int(t) for t in hits if sched.lambda_eta(int(t)) != 1.0]
        first_hit = effective[0] if effective else sched.T + 1
        for t, dist in out:
            if t < first_hit:
                assert dist == 0.0
        if effective:
            assert out[first_hit - 1][1] > 0.0

    def test_shared_first_draw_keeps_chains_together(self):
        data, prime = self.swapped_pair()
        sched = multi_pass_schedule(24, 1.5, 0.9, 1e-4, 0.2, 1.0)
        out = coupled_stability_run(data, prime, LOGISTIC, sched, seed=9)
        assert out[0] == (1, 0.0)

    def test_validation(self):
        data = toy_dataset(20, 3)
        other_n = toy_dataset(21, 3)
        sched = multi_pass_schedule(20, 1.5, 0.9, 1e-4, 0.2, 1.0)
        with pytest.raises(InvalidParameterError):
            coupled_stability_run(data, other_n, LOGISTIC, sched, seed=1)
        Xp = data.X.copy()
        Xp[0] = -Xp[0]
        with pytest.raises(InvalidParameterError):
            coupled_stability_run(data, Dataset(Xp, data.y), LOGISTIC, sched, seed=1)

    def test_step_size_guard(self):
        data, prime = self.swapped_pair(n=30)
        hot = multi_pass_schedule(30, 1.5, 0.9, 1e-4, 50.0, 1.0)
        assert hot.eta(1) > 1.0
        with pytest.raises(InvalidParameterError, match="exceeds 1/L"):
            coupled_stability_run(data, prime, QUADRATIC, hot, seed=1)


def test_write_run_record_exact_format(tmp_path):
    record = RunRecord(
        mode="single-pass",
        final_iterate=np.array([3.0, 4.0]),
        iterate_log=[(1, np.array([0.6, 0.8])), (2, np.array([3.0, 4.0]))],
        per_step_risk=[(2, 0.25, 0.125)],
        samples_consumed=3,
    )
    path = tmp_path / "record.csv"
    write_run_record(record, path)
    expected = (
        "t,risk_population,risk_empirical,iterate_norm\n"
        "1,nan,nan,1\n"
        "2,0.25,0.125,5\n"
    )
    assert path.read_text() == expected

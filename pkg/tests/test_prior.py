import math

import numpy as np
import pytest

from src.envs import BernoulliBanditSpec, DeepSeaSpec
from src.errors import DatasetError, DimensionError, UnsupportedError
from src.maxent import (
    DiscreteReference,
    FitOptions,
    GibbsPrior,
    UniformBoxReference,
    build_feature_matrix,
    dual_objective,
    fit_prior,
    gibbs_weights,
    grad_log_prior,
    load_prior,
    log_prior_pdf,
    prior_normalization_check,
    reference_resample,
    save_prior,
)
from src.model import DemoDataset, Trajectory
from tests.gradcheck import assert_gradient

GOOD, BAD = [0.9, 0.1], [0.1, 0.9]


def bandit_demos(env, arms):
    return DemoDataset([Trajectory(((0, a),)) for a in arms], env.signature)


@pytest.fixture
def two_point_prior():
    env = BernoulliBanditSpec(2)
    reference = DiscreteReference(np.array([GOOD, BAD]))
    return fit_prior(
        bandit_demos(env, [0] * 10),
        env,
        reference,
        lambda_star=4.0,
        beta=math.inf,
        opts=FitOptions(n_samples=2000, iterations=400, seed=0),
    )


class TestFitPrior:
    def test_mass_moves_to_the_demonstrated_arm(self, two_point_prior):
        weights = gibbs_weights(two_point_prior, np.array([GOOD, BAD]))
        assert weights[0] > 0.95

    def test_effective_sample_ratio_drops(self, two_point_prior):
        total, ratio = prior_normalization_check(two_point_prior, n_samples=4000, seed=1)
        assert total == pytest.approx(1.0)
        assert ratio < 0.6

    def test_marginal_likelihood_improves(self, two_point_prior):
        report = two_point_prior.report
        assert report.log_marginal_likelihood >= report.baseline_log_marginal_likelihood
        assert report.dropped == 0

    def test_trace_frame(self, two_point_prior):
        frame = two_point_prior.report.to_frame()
        assert list(frame.columns) == ["iteration", "dual_value", "grad_norm"]
        assert len(frame) >= 400

    def test_no_demos_gives_reference(self):
        env = BernoulliBanditSpec(3)
        prior = fit_prior(DemoDataset.empty(env.signature), env)
        assert prior.is_empty
        assert log_prior_pdf(prior, np.array([0.2, 0.5, 0.7])) == 0.0
        np.testing.assert_array_equal(grad_log_prior(prior, np.array([0.2, 0.5, 0.7])), 0.0)

    def test_unexplained_demos_are_dropped(self):
        env = BernoulliBanditSpec(2)
        reference = DiscreteReference(np.array([GOOD]))
        prior = fit_prior(
            bandit_demos(env, [0, 0, 1]),
            env,
            reference,
            lambda_star=1.0,
            opts=FitOptions(n_samples=50, iterations=100),
        )
        assert prior.report.dropped == 1
        assert prior.alpha[2] == 0.0
        assert np.all(prior.alpha[:2] > 0)

    def test_negative_lambda(self):
        env = BernoulliBanditSpec(2)
        with pytest.raises(DimensionError):
            fit_prior(bandit_demos(env, [0]), env, lambda_star=-1.0)

    def test_deterministic_for_a_seed(self):
        env = BernoulliBanditSpec(3)
        demos = bandit_demos(env, [0, 0, 2, 1])
        opts = FitOptions(n_samples=256, iterations=100, seed=11)
        one = fit_prior(demos, env, beta=5.0, opts=opts)
        two = fit_prior(demos, env, beta=5.0, opts=opts)
        np.testing.assert_array_equal(one.alpha, two.alpha)

    def test_dual_matches_a_grid_search(self):
        env = BernoulliBanditSpec(2)
        demos = bandit_demos(env, [0, 1])
        reference = UniformBoxReference(2)
        opts = FitOptions(n_samples=500, iterations=300, seed=0)
        prior = fit_prior(demos, env, reference, lambda_star=2.0, beta=4.0, opts=opts)
        fm = build_feature_matrix(demos, env, reference, 500, 4.0, 0)

        def best_on(xs, ys):
            values = [[dual_objective(np.exp([x, y]), fm, 2.0) for y in ys] for x in xs]
            i, j = np.unravel_index(np.argmax(values), (len(xs), len(ys)))
            return xs[i], ys[j], values[i][j]

        coarse = np.linspace(-4.0, 4.0, 81)
        x, y, _ = best_on(coarse, coarse)
        _, _, oracle = best_on(np.linspace(x - 0.1, x + 0.1, 81), np.linspace(y - 0.1, y + 0.1, 81))
        assert prior.report.dual_value >= oracle - 1e-9
        assert prior.report.dual_value == pytest.approx(oracle, abs=1e-3)


class TestGibbsPrior:
    def test_rejects_negative_weights(self):
        env = BernoulliBanditSpec(2)
        with pytest.raises(DimensionError):
            GibbsPrior(np.array([-1.0]), bandit_demos(env, [0]), env, UniformBoxReference(2))

    def test_weight_count_must_match(self):
        env = BernoulliBanditSpec(2)
        with pytest.raises(DimensionError):
            GibbsPrior(np.ones(2), bandit_demos(env, [0]), env, UniformBoxReference(2))

    def test_bandit_gradient_matches_finite_differences(self):
        env = BernoulliBanditSpec(3)
        prior = GibbsPrior(
            np.array([0.7, 1.3, 0.4]), bandit_demos(env, [0, 2, 0]), env, UniformBoxReference(3)
        )
        theta = np.array([0.3, 0.6, 0.45])
        assert_gradient(lambda t: log_prior_pdf(prior, t), lambda t: grad_log_prior(prior, t), theta)

    def test_deep_sea_gradient_matches_finite_differences(self):
        env = DeepSeaSpec(3)
        rng = np.random.default_rng(3)
        steps = tuple((env.state_id(row, row), 1) for row in range(3))
        demos = DemoDataset([Trajectory(steps), Trajectory(steps)], env.signature)
        prior = GibbsPrior(np.array([0.5, 0.8]), demos, env, UniformBoxReference(env.param_dim), beta_eff=2.0)
        theta = rng.normal(0, 0.5, env.param_dim)
        assert_gradient(lambda t: log_prior_pdf(prior, t), lambda t: grad_log_prior(prior, t), theta)

    def test_zero_beta_eff_is_flat(self):
        env = BernoulliBanditSpec(4)
        prior = GibbsPrior(
            np.array([2.0, 1.0]), bandit_demos(env, [1, 3]), env, UniformBoxReference(4), beta_eff=0.0
        )
        theta = np.array([0.1, 0.9, 0.4, 0.2])
        assert log_prior_pdf(prior, theta) == pytest.approx(3.0 / 4)
        np.testing.assert_allclose(grad_log_prior(prior, theta), 0.0)

    def test_infinite_beta_eff_has_no_gradient(self):
        env = BernoulliBanditSpec(2)
        prior = GibbsPrior(
            np.array([1.0]), bandit_demos(env, [0]), env, UniformBoxReference(2), beta_eff=math.inf
        )
        with pytest.raises(UnsupportedError):
            grad_log_prior(prior, np.array([0.6, 0.4]))

    def test_wrong_dimension(self):
        env = BernoulliBanditSpec(2)
        prior = GibbsPrior.empty(env)
        with pytest.raises(DimensionError):
            log_prior_pdf(prior, np.array([0.1, 0.2, 0.3]))


class TestReferenceResample:
    def test_draws_follow_the_prior(self, two_point_prior):
        draws = reference_resample(two_point_prior, 2000, seed=2, pool_size=4000)
        assert draws.shape == (2000, 2)
        assert np.mean(draws[:, 0] > draws[:, 1]) > 0.95


class TestSaveLoad:
    def test_round_trip(self, two_point_prior, tmp_path):
        path = save_prior(two_point_prior, tmp_path / "prior.json")
        assert path.with_suffix(".fit.csv").is_file()
        loaded = load_prior(path, two_point_prior.demos, two_point_prior.env)
        np.testing.assert_array_equal(loaded.alpha, two_point_prior.alpha)
        assert loaded.beta == math.inf
        assert loaded.lambda_star == 4.0
        np.testing.assert_array_equal(loaded.reference.points, two_point_prior.reference.points)

    def test_other_demos_rejected(self, two_point_prior, tmp_path):
        path = save_prior(two_point_prior, tmp_path / "prior.json")
        other = bandit_demos(two_point_prior.env, [1] * 10)
        with pytest.raises(DatasetError):
            load_prior(path, other, two_point_prior.env)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "prior.json"
        path.write_text("{}", encoding="utf-8")
        env = BernoulliBanditSpec(2)
        with pytest.raises(DatasetError):
            load_prior(path, DemoDataset.empty(env.signature), env)

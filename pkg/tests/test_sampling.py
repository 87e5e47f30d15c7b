import numpy as np
import pytest

from src.envs import BernoulliBanditSpec, DeepSeaSpec
from src.errors import ConfigError, DimensionError, SamplerError
from src.maxent import GaussianReference, GibbsPrior, UniformBoxReference
from src.model import DemoDataset, OnlineHistory, TaskKind, TaskParam, Trajectory, Transition
from src.sampling import (
    LogDensity,
    LogitBox,
    PosteriorChain,
    SgldConfig,
    Unconstrained,
    bandit_log_posterior,
    build_posterior,
    mdp_log_posterior,
    posterior_sample,
    sgld_sample,
    td_log_likelihood,
)
from tests.gradcheck import assert_gradient


def gaussian_target(mean, dim=2):
    mean = np.asarray(mean, dtype=float)
    return LogDensity(
        dim=dim,
        eval=lambda theta: (-0.5 * float((theta - mean) @ (theta - mean)), mean - theta),
    )


def bandit_history(pulls):
    return OnlineHistory(
        tuple((Transition(0, arm, float(reward), 0, True),) for arm, reward in pulls)
    )


class TestLogitBox:
    def test_inverse_of_forward(self):
        xi = np.array([-3.0, 0.0, 2.5])
        param = LogitBox()
        np.testing.assert_allclose(param.inverse(param.forward(xi)), xi)

    def test_log_jacobian_gradient(self):
        param = LogitBox()
        assert_gradient(
            lambda xi: param.log_jacobian(xi)[0],
            lambda xi: param.log_jacobian(xi)[1],
            np.array([-1.2, 0.3, 2.0]),
        )

    def test_boundary_is_clipped(self):
        assert np.all(np.isfinite(LogitBox().inverse(np.array([0.0, 1.0]))))


class TestSgldConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"step_size": 0.0}, {"steps": -1}, {"thinning": 0}, {"temperature": -1.0}, {"init": "zeros"}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SgldConfig(**kwargs)


class TestSgldSample:
    def test_zero_steps_returns_the_initial_state(self):
        samples = sgld_sample(gaussian_target([1.0, 2.0]), SgldConfig(steps=0, init=np.array([0.5, -0.5])))
        assert len(samples) == 1
        np.testing.assert_array_equal(samples[0].values, [0.5, -0.5])

    def test_thinning(self):
        cfg = SgldConfig(step_size=0.1, steps=100, thinning=10, init=np.zeros(2))
        assert len(sgld_sample(gaussian_target([0.0, 0.0]), cfg)) == 10

    def test_standard_gaussian_moments(self):
        cfg = SgldConfig(step_size=0.05, steps=200_000, thinning=10, init=np.zeros(2), seed=3)
        draws = np.stack([s.values for s in sgld_sample(gaussian_target([1.0, -1.0]), cfg)])
        burned = draws[1000:]
        np.testing.assert_allclose(burned.mean(axis=0), [1.0, -1.0], atol=0.1)
        variance = burned.var(axis=0)
        assert np.all((variance >= 0.9) & (variance <= 1.1))

    def test_flat_prior_on_the_box_is_uniform(self):
        target = build_posterior(GibbsPrior.empty(BernoulliBanditSpec(8)), OnlineHistory())
        cfg = SgldConfig(step_size=0.01, steps=200_000, thinning=10, init=np.full(8, 0.5), seed=0)
        draws = np.stack([s.values for s in sgld_sample(target, cfg)])[1000:]
        assert draws.mean() == pytest.approx(0.5, abs=0.02)
        assert draws.var() == pytest.approx(1 / 12, abs=0.01)

    def test_zero_temperature_climbs_to_the_mode(self):
        cfg = SgldConfig(step_size=0.2, steps=500, temperature=0.0, init=np.zeros(2))
        final = sgld_sample(gaussian_target([3.0, -2.0]), cfg)[-1]
        np.testing.assert_allclose(final.values, [3.0, -2.0], atol=1e-6)

    def test_same_seed_same_chain(self):
        cfg = SgldConfig(step_size=0.1, steps=50, init=np.zeros(2), seed=9)
        one = sgld_sample(gaussian_target([0.0, 0.0]), cfg)
        two = sgld_sample(gaussian_target([0.0, 0.0]), cfg)
        assert one == two

    def test_prior_sample_needs_a_prior(self):
        with pytest.raises(ConfigError):
            sgld_sample(gaussian_target([0.0, 0.0]), SgldConfig(steps=1))

    def test_initial_state_dimension(self):
        with pytest.raises(DimensionError):
            sgld_sample(gaussian_target([0.0, 0.0]), SgldConfig(steps=1, init=np.zeros(3)))

    def test_non_finite_gradient(self):
        target = LogDensity(dim=1, eval=lambda theta: (0.0, np.array([np.nan])))
        with pytest.raises(SamplerError):
            sgld_sample(target, SgldConfig(steps=3, init=np.zeros(1)))


class TestBanditPosterior:
    def test_matches_the_beta_posterior(self):
        env = BernoulliBanditSpec(2)
        history = bandit_history([(0, 1)] * 30 + [(0, 0)] * 10)
        target = build_posterior(GibbsPrior.empty(env), history)
        assert isinstance(target.parameterization, LogitBox)
        cfg = SgldConfig(step_size=0.02, steps=40_000, thinning=5, init=np.array([0.5, 0.5]), seed=1)
        draws = np.stack([s.values for s in sgld_sample(target, cfg)])[500:]
        assert draws[:, 0].mean() == pytest.approx(31 / 42, abs=0.05)
        assert draws[:, 1].mean() == pytest.approx(0.5, abs=0.1)
        assert np.all((draws > 0) & (draws < 1))

    def test_gradient_matches_finite_differences(self):
        env = BernoulliBanditSpec(3)
        demos = DemoDataset([Trajectory(((0, 1),)), Trajectory(((0, 2),))], env.signature)
        prior = GibbsPrior(np.array([1.5, 0.5]), demos, env, UniformBoxReference(3))
        history = bandit_history([(0, 1), (1, 0), (1, 1), (2, 0)])
        assert_gradient(
            lambda t: bandit_log_posterior(t, history, prior)[0],
            lambda t: bandit_log_posterior(t, history, prior)[1],
            np.array([0.3, 0.55, 0.8]),
        )

    def test_boundary_rejected(self):
        env = BernoulliBanditSpec(2)
        with pytest.raises(DimensionError):
            bandit_log_posterior(np.array([0.0, 0.5]), OnlineHistory(), GibbsPrior.empty(env))


class TestTdLogLikelihood:
    def test_empty_history(self):
        value, grad = td_log_likelihood(np.ones((4, 2)), OnlineHistory())
        assert value == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_terminal_has_no_bootstrap(self):
        q_table = np.array([[0.2, 0.7], [5.0, 1.0]])
        history = OnlineHistory(((Transition(0, 1, 1.0, 1, True),),))
        value, _ = td_log_likelihood(q_table, history)
        assert value == pytest.approx(-0.5 * 0.3**2)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        shape = (4, 2)
        history = OnlineHistory(
            (
                (Transition(0, 1, 0.0, 1), Transition(1, 0, 0.5, 2), Transition(2, 1, 1.0, 3, True)),
                (Transition(0, 0, 0.0, 2), Transition(2, 0, 0.0, 3, True)),
            )
        )
        assert_gradient(
            lambda q: td_log_likelihood(q.reshape(shape), history)[0],
            lambda q: td_log_likelihood(q.reshape(shape), history)[1].reshape(-1),
            rng.normal(size=8),
        )


class TestMdpPosterior:
    def test_gradient_matches_finite_differences(self):
        env = DeepSeaSpec(2)
        steps = ((env.state_id(0, 0), 1), (env.state_id(1, 1), 1))
        demos = DemoDataset([Trajectory(steps)], env.signature)
        prior = GibbsPrior(np.array([2.0]), demos, env, GaussianReference(env.param_dim), beta_eff=3.0)
        history = OnlineHistory(((Transition(0, 1, -0.005, 3), Transition(3, 1, 0.995, 4, True)),))
        theta = np.random.default_rng(5).normal(0, 0.5, env.param_dim)
        assert_gradient(
            lambda t: mdp_log_posterior(t, history, prior)[0],
            lambda t: mdp_log_posterior(t, history, prior)[1],
            theta,
        )

    def test_deep_sea_sample_is_a_q_table(self):
        env = DeepSeaSpec(3)
        prior = GibbsPrior.empty(env)
        cfg = SgldConfig(step_size=0.01, steps=20, init=np.zeros(env.param_dim))
        sample = posterior_sample(prior, OnlineHistory(), cfg)
        assert sample.kind == TaskKind.QTABLE
        assert sample.values.shape == (env.param_dim,)
        assert isinstance(build_posterior(prior, OnlineHistory()).parameterization, Unconstrained)


class TestPosteriorChain:
    def test_warm_starts_from_the_last_sample(self):
        env = BernoulliBanditSpec(2)
        chain = PosteriorChain(GibbsPrior.empty(env), SgldConfig(steps=0))
        rng = np.random.default_rng(0)
        first = chain.sample(OnlineHistory(), rng)
        second = chain.sample(bandit_history([(0, 1)]), rng)
        assert first == second
        assert chain.state == first

    def test_prior_draw_is_inside_the_box(self):
        env = BernoulliBanditSpec(3)
        chain = PosteriorChain(GibbsPrior.empty(env), SgldConfig(step_size=0.05, steps=10))
        sample = chain.sample(OnlineHistory(), np.random.default_rng(2))
        assert isinstance(sample, TaskParam)
        assert np.all((sample.values > 0) & (sample.values < 1))

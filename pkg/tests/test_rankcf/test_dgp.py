import numpy as np
import pytest
from scipy import stats

from rankcf.dgp import DgpConfig
from rankcf.dgp import PiShape
from rankcf.dgp import VDist
from rankcf.dgp import generate
from rankcf.dgp import simulate_asf
from rankcf.dgp import true_asf
from rankcf.exc import ConfigError


class TestDgpConfig:
    def test_defaults(self):
        config = DgpConfig()
        assert config.pi_shape is PiShape.QUADRATIC
        assert config.v_dist is VDist.STD_NORMAL
        np.testing.assert_array_equal(config.index_coefficients, [0.5, 1.0, 1.0])
        np.testing.assert_array_equal(config.population_mean_x(), [1.0, 0.0, 1.0])

    def test_enum_from_string(self):
        config = DgpConfig(pi_shape="linear", v_dist="centered_gamma22")
        assert config.pi_shape is PiShape.LINEAR
        assert config.v_dist is VDist.CENTERED_GAMMA22

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"pi_shape": "cubic"},
            {"rho": float("nan")},
            {"n": 1},
            {"n": 2.5},
            {"n": "500"},
            {"n": True},
            {"seed": -1},
            {"seed": 2**64},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            DgpConfig(**kwargs)

    def test_dict(self):
        config = DgpConfig(rho=0.0, pi_shape="linear", n=100, seed=4)
        data = config.to_dict()
        assert data["pi_shape"] == "linear"
        assert DgpConfig.from_dict(data) == config

    def test_integral_float_size(self):
        config = DgpConfig.from_dict({"n": 500.0})
        assert type(config.n) is int
        assert generate(config).dataset.n == 500

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="sigma"):
            DgpConfig.from_dict({"sigma": 1.0})


class TestGenerate:
    def test_deterministic(self, config_factory):
        a = generate(config_factory())
        b = generate(config_factory())
        np.testing.assert_array_equal(a.dataset.y, b.dataset.y)
        np.testing.assert_array_equal(a.dataset.d, b.dataset.d)

    def test_seed_changes_sample(self, config_factory):
        a = generate(config_factory(seed=1))
        b = generate(config_factory(seed=2))
        assert not np.array_equal(a.dataset.d, b.dataset.d)

    def test_layout(self, sample):
        data = sample.dataset
        assert data.exog_names == ("const", "z")
        assert data.endog_names == ("d",)
        np.testing.assert_array_equal(data.z[:, 0], 1.0)
        np.testing.assert_allclose(
            data.d[:, 0], data.z[:, 1] ** 2 + sample.v_true, atol=1e-14
        )

    def test_latent_reconstructs_outcome(self, sample):
        data = sample.dataset
        z = data.z[:, 1]
        latent = 0.5 + z + data.d[:, 0] + 0.5 * sample.m_v_true + sample.e_true
        np.testing.assert_array_equal(data.y, (latent > 0).astype(float))

    def test_normal_scores_of_normal(self):
        sample = generate(
            DgpConfig(rho=0.0, pi_shape="linear", v_dist="std_normal", n=4, seed=7)
        )
        np.testing.assert_array_equal(sample.m_v_true, sample.v_true)

    def test_centered_gamma(self):
        sample = generate(DgpConfig(v_dist="centered_gamma22", n=1_000_000, seed=1))
        v = sample.v_true
        assert abs(v.mean()) < 0.01
        assert v.min() > -1.0
        # m(V) is standard normal
        m = sample.m_v_true
        assert abs(m.mean()) < 0.01
        assert abs(m.std() - 1.0) < 0.01
        assert stats.skew(v) > 1.0


class TestAsf:
    def test_closed_form(self):
        config = DgpConfig(rho=0.0)
        assert true_asf(config, 0.0, 0.0) == pytest.approx(stats.norm.cdf(0.5))

    def test_attenuated_by_rho(self):
        config = DgpConfig(rho=0.5)
        assert true_asf(config, 0.0, 0.0) == pytest.approx(0.6726, abs=1e-4)

    @pytest.mark.parametrize("v_dist", ["std_normal", "centered_gamma22"])
    def test_simulation_matches_closed_form(self, v_dist):
        config = DgpConfig(v_dist=v_dist)
        simulated = simulate_asf(config, 0.0, 1.0, draws=400_000, seed=5)
        assert simulated == pytest.approx(true_asf(config, 0.0, 1.0), abs=0.005)


@pytest.mark.parametrize("v_dist", ["std_normal", "centered_gamma22"])
def test_normal_score_moments(v_dist):
    m = generate(DgpConfig(v_dist=v_dist, n=100_000, seed=2)).m_v_true
    assert abs(m.mean()) < 0.02
    assert abs(m.var() - 1.0) < 0.05


def test_outcome_frequency():
    # with rho = 0 and pi linear the index is 0.5 + 2 Z + V + E ~ N(0.5, 6)
    sample = generate(DgpConfig(rho=0.0, pi_shape="linear", n=100_000, seed=3))
    expect = stats.norm.cdf(0.5 / np.sqrt(6.0))
    assert sample.dataset.y.mean() == pytest.approx(expect, abs=0.01)

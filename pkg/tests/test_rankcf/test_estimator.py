import numpy as np
import pytest

from rankcf.control import QuantileFamily
from rankcf.dataset import Dataset
from rankcf.estimator import ControlFunctionEstimator
from rankcf.exc import ConfigError
from rankcf.first_stage import FirstStageKind
from rankcf.liml import asf_parametric
from rankcf.liml import fit
from rankcf.semiparam import SemiparamFitResult
from rankcf.semiparam import SemiparamSpec


class TestConfig:
    def test_defaults(self):
        estimator = ControlFunctionEstimator()
        assert estimator.first_stage_kind is FirstStageKind.LOCAL_LINEAR
        assert estimator.control == QuantileFamily.normal()
        assert estimator.link == "probit"
        assert not estimator.semiparametric

    def test_string_options(self):
        estimator = ControlFunctionEstimator(
            first_stage="ols", control="skew:0.3", link="logit"
        )
        assert estimator.first_stage_kind is FirstStageKind.OLS
        assert estimator.control == QuantileFamily.skew(0.3)
        assert repr(estimator) == (
            "<ControlFunctionEstimator first_stage=ols control=skew:0.3"
            " link=logit with_controls=True>"
        )

    @pytest.mark.parametrize(
        "kwargs",
        [{"first_stage": "kernel"}, {"control": "skew:2"}, {"link": "cauchy"}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ControlFunctionEstimator(**kwargs)

    def test_subclass_defaults(self):
        class OlsEstimator(ControlFunctionEstimator):
            default_first_stage = FirstStageKind.OLS
            default_link = "logit"

        estimator = OlsEstimator()
        assert estimator.first_stage_kind is FirstStageKind.OLS
        assert estimator.link == "logit"
        assert OlsEstimator(link="probit").link == "probit"


class TestFit:
    def test_matches_manual_steps(self, sample):
        data = sample.dataset
        estimator = ControlFunctionEstimator(first_stage="ols")
        controls = estimator.make_controls(data)
        result = estimator.fit(data)
        expect = fit(data, controls)
        np.testing.assert_array_equal(result.theta.params, expect.theta.params)
        assert estimator(data).loglik == result.loglik

    def test_true_controls(self, sample):
        data = sample.dataset
        estimator = ControlFunctionEstimator()
        result = estimator.fit(data, sample.m_v_true)
        assert result.converged
        assert result.theta.shape == (2, 1, 1)

    def test_without_controls(self, sample):
        estimator = ControlFunctionEstimator(with_controls=False)
        result = estimator.fit(sample.dataset)
        assert result.theta.rho.shape == (0,)

    def test_two_endogenous(self):
        rng = np.random.default_rng(8)
        n = 400
        z = rng.standard_normal((n, 2))
        v = rng.standard_normal((n, 2))
        d = z**2 + v
        latent = 0.2 + z.sum(axis=1) + 0.5 * d.sum(axis=1) + 0.4 * v[:, 0]
        y = (latent + rng.standard_normal(n) > 0).astype(float)
        data = Dataset(y=y, z=np.column_stack((np.ones(n), z)), d=d)
        estimator = ControlFunctionEstimator()
        result = estimator.fit(data)
        assert result.converged
        assert result.theta.shape == (3, 2, 2)
        assert result.theta.names(data) == [
            "const", "z1", "z2", "d1", "d2", "rho_1", "rho_2"
        ]

    def test_semiparametric(self, sample):
        estimator = ControlFunctionEstimator(first_stage="ols", link="np")
        result = estimator.fit(sample.dataset)
        assert isinstance(result, SemiparamFitResult)
        assert result.theta.alpha[1] == 1.0


class TestAsf:
    def test_parametric_at_mean(self, sample):
        data = sample.dataset
        estimator = ControlFunctionEstimator(first_stage="ols")
        result = estimator.fit(data)
        expect = asf_parametric(result.theta, data.x.mean(axis=0))
        assert estimator.asf(result, data) == expect

    def test_semiparametric_in_unit_interval(self, sample):
        data = sample.dataset
        estimator = ControlFunctionEstimator(
            first_stage="ols", link="np", semiparam=SemiparamSpec(bandwidth=0.5)
        )
        result = estimator.fit(data)
        value = estimator.asf(result, data, x=[1.0, 0.0, 1.0])
        assert 0.0 < value < 1.0

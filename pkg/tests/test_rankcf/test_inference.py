import numpy as np
import pytest
from scipy import stats

from rankcf.estimator import ControlFunctionEstimator
from rankcf.exc import CovarianceError
from rankcf.exc import DomainError
from rankcf.exc import RankCFError
from rankcf.exc import ShapeError
from rankcf.exc import UnreliableBootstrapError
from rankcf.inference import CovarianceEstimate
from rankcf.inference import asf_gradient
from rankcf.inference import delta_method_asf
from rankcf.inference import exogeneity_test
from rankcf.inference import pairs_bootstrap
from rankcf.inference import t_statistics
from rankcf.liml import Theta
from rankcf.liml import asf_parametric


@pytest.fixture()
def plain_estimator():
    return ControlFunctionEstimator(first_stage="ols", with_controls=False)


class TestCovarianceEstimate:
    def test_standard_errors(self):
        cov = CovarianceEstimate(np.eye(2) * 100.0, b_used=10, b_failed=0, n_obs=100)
        np.testing.assert_array_equal(cov.se, [1.0, 1.0])

    @pytest.mark.parametrize(
        "sigma",
        [
            [[1.0, 0.0], [0.0, -1.0]],
            [[1.0, 0.5], [0.0, 1.0]],
            [[np.nan, 0.0], [0.0, 1.0]],
        ],
    )
    def test_invalid(self, sigma):
        with pytest.raises(CovarianceError):
            CovarianceEstimate(np.array(sigma), b_used=10, b_failed=0, n_obs=10)

    def test_not_square(self):
        with pytest.raises(ShapeError):
            CovarianceEstimate(np.zeros((2, 3)), b_used=10, b_failed=0, n_obs=10)


class TestPairsBootstrap:
    def test_constant_estimator(self, sample):
        cov = pairs_bootstrap(sample.dataset, lambda data: np.array([1.0, 2.0]), 10, 0)
        assert cov.b_used == 10
        assert cov.b_failed == 0
        np.testing.assert_array_equal(cov.sigma, 0.0)

    def test_deterministic(self, sample, plain_estimator):
        a = pairs_bootstrap(sample.dataset, plain_estimator, 20, seed=3)
        b = pairs_bootstrap(sample.dataset, plain_estimator, 20, seed=3)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_threads(self, sample, plain_estimator):
        a = pairs_bootstrap(sample.dataset, plain_estimator, 20, seed=3)
        b = pairs_bootstrap(sample.dataset, plain_estimator, 20, seed=3, threads=4)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_symmetric_psd(self, sample, plain_estimator):
        cov = pairs_bootstrap(sample.dataset, plain_estimator, 20, seed=1)
        np.testing.assert_array_equal(cov.sigma, cov.sigma.T)
        assert np.linalg.eigvalsh(cov.sigma).min() >= -1e-10
        assert cov.n_obs == sample.dataset.n
        assert np.all(cov.se > 0)

    def test_tolerates_few_failures(self, sample):
        calls = []

        def flaky(data):
            calls.append(None)

            if len(calls) == 1:
                raise RankCFError("first resample failed")

            return data.d.mean(axis=0)

        cov = pairs_bootstrap(sample.dataset, flaky, 10, 0, theta_hat=np.ones(1))
        assert cov.b_used == 9
        assert cov.b_failed == 1

    def test_too_many_failures(self, sample):
        def failing(data):
            raise RankCFError("always fails")

        with pytest.raises(UnreliableBootstrapError) as exc_info:
            pairs_bootstrap(sample.dataset, failing, 10, 0, theta_hat=np.ones(1))

        assert exc_info.value.b_used == 0
        assert exc_info.value.b_failed == 10

    def test_non_finite_counts_as_failure(self, sample):
        def nan(data):
            return np.array([np.nan])

        with pytest.raises(UnreliableBootstrapError):
            pairs_bootstrap(sample.dataset, nan, 5, 0, theta_hat=np.zeros(1))

    def test_needs_replications(self, sample, plain_estimator):
        with pytest.raises(DomainError):
            pairs_bootstrap(sample.dataset, plain_estimator, 1, 0)


class TestAsfDelta:
    def test_gradient_at_zero(self):
        theta = Theta(alpha=[0.0, 0.0], beta=[0.0], rho=[0.0])
        phi0 = stats.norm.pdf(0.0)
        np.testing.assert_allclose(
            asf_gradient(theta, [1.0, 0.5, 2.0]), phi0 * np.array([1.0, 0.5, 2.0, 0.0])
        )

    def test_gradient_numeric(self):
        rng = np.random.default_rng(9)
        params = rng.normal(0.0, 0.5, size=5)
        x = np.array([1.0, 0.3, -0.7])
        h = 1e-6
        expect = np.empty(5)

        for j in range(5):
            e = np.zeros(5)
            e[j] = h
            up = asf_parametric(Theta.from_params(params + e, 2, 1), x)
            down = asf_parametric(Theta.from_params(params - e, 2, 1), x)
            expect[j] = (up - down) / (2 * h)

        actual = asf_gradient(Theta.from_params(params, 2, 1), x)
        np.testing.assert_allclose(actual, expect, atol=1e-7)

    def test_zero_covariance(self):
        theta = Theta(alpha=[0.5, 1.0], beta=[1.0], rho=[0.5])
        cov = CovarianceEstimate(np.zeros((4, 4)), b_used=10, b_failed=0, n_obs=50)
        result = delta_method_asf(theta, cov, [1.0, 0.0, 0.0])
        assert result.se == 0.0
        assert result.value == pytest.approx(0.6726, abs=1e-4)
        assert result.x == (1.0, 0.0, 0.0)

    def test_unused_coefficient(self):
        theta = Theta(alpha=[0.5, 1.0], beta=[1.0], rho=[0.5])
        padded = Theta(alpha=[0.5, 1.0], beta=[1.0], rho=[0.5, 0.0])
        sigma = np.array(
            [
                [2.0, 0.3, 0.1, 0.2],
                [0.3, 1.5, 0.2, 0.1],
                [0.1, 0.2, 1.0, 0.1],
                [0.2, 0.1, 0.1, 0.8],
            ]
        )
        big = np.zeros((5, 5))
        big[:4, :4] = sigma
        x = [1.0, 0.2, 0.4]
        a = delta_method_asf(theta, CovarianceEstimate(sigma, 10, 0, 100), x)
        b = delta_method_asf(padded, CovarianceEstimate(big, 10, 0, 100), x)
        assert b.se == pytest.approx(a.se, rel=1e-12)

    def test_mismatch(self):
        theta = Theta(alpha=[0.5, 1.0], beta=[1.0], rho=[0.5])
        cov = CovarianceEstimate(np.zeros((3, 3)), b_used=10, b_failed=0, n_obs=50)

        with pytest.raises(ShapeError):
            delta_method_asf(theta, cov, [1.0, 0.0, 0.0])


class TestTStatistics:
    cov = CovarianceEstimate(np.eye(2) * 100.0, b_used=10, b_failed=0, n_obs=100)

    def test_at_null(self):
        result = t_statistics([0.3, -0.2], self.cov, [0.3, -0.2])
        np.testing.assert_array_equal(result.statistics, 0.0)

    def test_critical_value_does_not_reject(self):
        result = t_statistics([1.96, 2.5], self.cov, 0.0)
        np.testing.assert_array_equal(result.statistics, [1.96, 2.5])
        np.testing.assert_array_equal(result.rejections(), [False, True])

    def test_zero_se(self):
        cov = CovarianceEstimate(np.zeros((3, 3)), b_used=10, b_failed=0, n_obs=10)
        result = t_statistics([1.0, -1.0, 0.5], cov, [0.0, 0.0, 0.5])
        assert result.statistics[0] == np.inf
        assert result.statistics[1] == -np.inf
        assert result.statistics[2] == 0.0
        assert result.degenerate.all()

    def test_plain_covariance(self):
        theta = Theta(alpha=[2.0], beta=[1.0], rho=[])
        result = t_statistics(theta, np.diag([4.0, 0.25]), 0.0)
        np.testing.assert_array_equal(result.statistics, [1.0, 2.0])

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            t_statistics([1.0, 2.0, 3.0], self.cov, 0.0)


class TestExogeneity:
    def test_detects_endogeneity(self, sample_factory):
        sample = sample_factory(n=1000, rho=0.5, seed=12)
        result = ControlFunctionEstimator().fit(sample.dataset)
        test = exogeneity_test(result)
        assert test.df == 1
        assert test.rejected
        assert test.statistic > 1.96

    def test_several_controls(self, sample):
        data = sample.dataset
        controls = [sample.m_v_true, np.random.default_rng(0).standard_normal(data.n)]
        result = ControlFunctionEstimator().fit(data, controls)
        test = exogeneity_test(result)
        assert test.df == 2
        assert 0.0 <= test.p_value <= 1.0

    def test_needs_controls(self, sample):
        result = ControlFunctionEstimator(with_controls=False).fit(sample.dataset)

        with pytest.raises(DomainError):
            exogeneity_test(result)

import numpy as np
import pytest

from rankcf.exc import BandwidthError
from rankcf.exc import ShapeError
from rankcf.exc import SingularDesignError
from rankcf.first_stage import FirstStageKind
from rankcf.first_stage import fit_local_linear
from rankcf.first_stage import fit_ols
from rankcf.first_stage import rule_of_thumb_bandwidth

Z3 = [[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]


class TestOls:
    def test_exact_line(self):
        result = fit_ols(Z3, [0.0, 1.0, 2.0])
        assert result.kind is FirstStageKind.OLS
        np.testing.assert_allclose(result.coefficients, [0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(result.residuals, 0.0, atol=1e-12)

    def test_residuals(self):
        result = fit_ols(Z3, [0.0, 2.0, 1.0])
        np.testing.assert_allclose(result.coefficients, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(result.residuals, [-0.5, 1.0, -0.5], atol=1e-12)

    def test_orthogonal_to_design(self):
        rng = np.random.default_rng(0)
        z = np.column_stack((np.ones(100), rng.standard_normal((100, 2))))
        d = rng.standard_normal(100)
        result = fit_ols(z, d)
        np.testing.assert_allclose(z.T @ result.residuals, 0.0, atol=1e-10)
        np.testing.assert_allclose(result.fitted + result.residuals, d)

    def test_duplicated_column(self):
        z = [[1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 2.0, 2.0]]

        with pytest.raises(SingularDesignError) as exc_info:
            fit_ols(z, [0.0, 1.0, 2.0])

        assert exc_info.value.condition > 1e10

    def test_mismatched_rows(self):
        with pytest.raises(ShapeError):
            fit_ols(Z3, [0.0, 1.0])


class TestLocalLinear:
    def test_reproduces_line(self):
        z = np.linspace(-2, 2, 50)
        design = np.column_stack((np.ones(50), z))
        result = fit_local_linear(design, 1.0 + 2.0 * z)
        assert result.kind is FirstStageKind.LOCAL_LINEAR
        np.testing.assert_allclose(result.residuals, 0.0, atol=1e-8)

    def test_quadratic(self):
        z = np.linspace(-2, 2, 200)
        design = np.column_stack((np.ones(200), z))
        result = fit_local_linear(design, z * z, bandwidth=0.2)
        inner = np.abs(z) <= 1.8
        assert np.abs(result.residuals[inner]).max() < 0.05

    def test_default_bandwidth(self):
        z = np.random.default_rng(1).standard_normal(400)
        design = np.column_stack((np.ones(400), z))
        result = fit_local_linear(design, np.sin(z))
        assert result.bandwidth[0] == pytest.approx(rule_of_thumb_bandwidth(z))

    @pytest.mark.parametrize("n", [120, 500])
    def test_default_bandwidth_simulated(self, sample_factory, n):
        for seed in range(100):
            data = sample_factory(n=n, seed=seed).dataset
            result = fit_local_linear(data.z, data.d[:, 0])
            assert np.isfinite(result.fitted).all()

    def test_isolated_tail_point(self):
        z = np.append(np.linspace(-1, 1, 99), 2.5)
        design = np.column_stack((np.ones(100), z))
        result = fit_local_linear(design, z * z, bandwidth=0.25)
        assert np.isfinite(result.fitted).all()

    def test_bandwidth_too_small(self):
        design = np.column_stack((np.ones(5), np.arange(5.0)))

        with pytest.raises(BandwidthError) as exc_info:
            fit_local_linear(design, np.arange(5.0), bandwidth=1e-9)

        assert exc_info.value.bandwidth == 1e-9

    @pytest.mark.parametrize("bandwidth", [0.0, -1.0, float("nan")])
    def test_bandwidth_invalid(self, bandwidth):
        design = np.column_stack((np.ones(5), np.arange(5.0)))

        with pytest.raises(BandwidthError):
            fit_local_linear(design, np.arange(5.0), bandwidth=bandwidth)

    def test_needs_regressor(self):
        with pytest.raises(ShapeError):
            fit_local_linear(np.ones((5, 1)), np.arange(5.0))

    def test_permutation(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal(100)
        d = z * z + rng.standard_normal(100)
        design = np.column_stack((np.ones(100), z))
        order = rng.permutation(100)
        a = fit_local_linear(design, d)
        b = fit_local_linear(design[order], d[order])
        np.testing.assert_allclose(b.fitted, a.fitted[order], rtol=1e-10)

    def test_backfitting(self):
        rng = np.random.default_rng(3)
        z = rng.uniform(-2, 2, size=(400, 2))
        design = np.column_stack((np.ones(400), z))
        d = np.sin(z[:, 0]) + z[:, 1]
        result = fit_local_linear(design, d, bandwidth=0.3)
        assert result.sweeps > 0
        np.testing.assert_allclose(result.fitted + result.residuals, d)
        inner = np.all(np.abs(z) < 1.5, axis=1)
        assert np.abs(result.residuals[inner]).max() < 0.1

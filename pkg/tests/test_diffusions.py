import math

import numpy as np
import pytest
from scipy.integrate import quad

from sis_perturb.diffusions import (
    CIRParams,
    CoefficientPair,
    GrayParams,
    LogisticParams,
    as_coefficient_pair,
    check_natural_assumptions,
    cir_mean,
    stationary_law,
    stationary_mean,
    stationary_pdf,
)
from sis_perturb.errors import InvalidParameterError, NotErgodicError


def _moment(model, k):
    return quad(lambda x: x**k * stationary_pdf(model, x), 0, np.inf, limit=200, epsabs=1e-11, epsrel=1e-10)[0]


class TestAssumptions:
    def test_figure_one_cir_passes(self):
        model = CIRParams(a=0.05, b=0.89, sigma=0.1, y0=0.89)
        assert model.feller_ratio == pytest.approx(8.9)
        report = check_natural_assumptions(as_coefficient_pair(model, 0.1))
        assert report.passed
        assert report.ergodicity == "verified"
        # a(b - y) < 0 for y in (b, 1): reported, not fatal
        assert not report.drift_nonnegative_on_grid

    def test_figure_two_cir_passes(self):
        model = CIRParams(a=0.05, b=0.5, sigma=0.1, y0=0.5)
        assert model.feller_ratio == pytest.approx(5.0)
        assert check_natural_assumptions(as_coefficient_pair(model, 0.1)).passed

    def test_negative_constant_drift_fails(self):
        coeffs = CoefficientPair(lambda y: -np.ones_like(y), lambda y: np.sqrt(y), 0.1)
        report = check_natural_assumptions(coeffs, np.linspace(0.01, 0.99, 99))
        assert not report.drift_nonnegative_on_grid
        assert not report.drift_at_zero_nonnegative
        assert not report.passed
        assert report.ergodicity == "unverified"

    def test_diffusion_not_vanishing_at_zero_fails(self):
        coeffs = CoefficientPair(lambda y: 1 - y, lambda y: 0.1 + 0 * y, 0.1)
        assert not check_natural_assumptions(coeffs).passed

    @pytest.mark.parametrize("sigma,ok", [(0.99, True), (1.0, False), (1.01, False)])
    def test_cir_feller_boundary(self, sigma, ok):
        model = CIRParams(a=0.5, b=1.0, sigma=sigma, y0=0.5)
        assert check_natural_assumptions(as_coefficient_pair(model, 0.2)).passed is ok

    @pytest.mark.parametrize("sigma,ok", [(math.sqrt(0.59), True), (math.sqrt(0.6), False), (math.sqrt(0.61), False)])
    def test_logistic_boundary(self, sigma, ok):
        model = LogisticParams(a=0.3, b=1.0, sigma=sigma, y0=0.2)
        assert check_natural_assumptions(as_coefficient_pair(model, 0.2)).passed is ok

    def test_bad_probe_grid(self):
        coeffs = as_coefficient_pair(CIRParams(0.05, 0.5, 0.1, 0.5), 0.1)
        with pytest.raises(InvalidParameterError):
            check_natural_assumptions(coeffs, [0.5, 1.0])
        with pytest.raises(InvalidParameterError):
            check_natural_assumptions(coeffs, [])


class TestStationary:
    def test_cir_mean(self):
        assert stationary_mean(CIRParams(0.05, 0.5, 0.1, 0.3)) == 0.5

    def test_logistic_mean(self):
        assert stationary_mean(LogisticParams(0.3, 1.0, 0.2, 0.1)) == pytest.approx(0.28, abs=1e-15)

    def test_logistic_boundary_not_ergodic(self):
        with pytest.raises(NotErgodicError, match="2a > sigma"):
            stationary_mean(LogisticParams(0.3, 1.0, math.sqrt(0.6), 0.1))

    def test_cir_not_ergodic(self):
        with pytest.raises(NotErgodicError, match="Feller"):
            stationary_mean(CIRParams(0.1, 0.1, 1.0, 0.1))

    @pytest.mark.parametrize(
        "model",
        [CIRParams(0.05, 0.89, 0.1, 0.89), CIRParams(0.05, 0.5, 0.1, 0.5), CIRParams(0.5, 1.0, 0.9, 1.0),
         LogisticParams(0.3, 1.0, 0.2, 0.1), LogisticParams(1.0, 2.0, 1.2, 0.5)],
    )
    def test_density_normalised_and_mean(self, model):
        assert _moment(model, 0) == pytest.approx(1.0, abs=1e-6)
        assert _moment(model, 1) == pytest.approx(stationary_mean(model), abs=1e-6)

    def test_cir_variance(self):
        model = CIRParams(0.05, 0.5, 0.1, 0.5)
        var = _moment(model, 2) - _moment(model, 1) ** 2
        assert var == pytest.approx(model.sigma**2 * model.b / (2 * model.a), abs=1e-6)
        assert stationary_law(model).variance == pytest.approx(0.05, abs=1e-12)

    def test_logistic_shape_and_rate(self):
        law = stationary_law(LogisticParams(0.3, 1.0, 0.2, 0.1))
        assert law.lam == pytest.approx(2 * 0.3 / 0.04 - 1)
        assert law.omega == pytest.approx(2 * 1.0 / 0.04)

    def test_pdf_domain(self):
        with pytest.raises(InvalidParameterError):
            stationary_pdf(CIRParams(0.05, 0.5, 0.1, 0.5), 0.0)


class TestCirMean:
    def test_constant_when_started_at_mean(self):
        p = CIRParams(0.05, 0.89, 0.1, 0.89)
        t = np.linspace(0, 1e4, 1001)
        assert np.all(cir_mean(t, p) == 0.89)

    def test_initial_value(self):
        assert cir_mean(0.0, CIRParams(0.3, 0.5, 0.1, 0.2)) == 0.2

    def test_long_run(self):
        p = CIRParams(0.3, 0.5, 0.1, 0.2)
        assert cir_mean(1e3 / p.a, p) == pytest.approx(0.5, abs=1e-9)


class TestCoefficientPair:
    def test_composition_reproduces_named_cir(self):
        p = CIRParams(0.02, 0.45, 0.063, 0.45)
        pair = as_coefficient_pair(p, 0.1)
        y = np.linspace(0, 2, 41)
        assert np.allclose(pair.drift(y), p.a * (p.b - y), rtol=1e-14, atol=1e-16)
        assert np.allclose(pair.diffusion(y), p.sigma * np.sqrt(y), rtol=1e-14, atol=1e-16)
        assert pair.drift(np.array([p.b]))[0] == pytest.approx(0.0, abs=1e-17)

    def test_unscaled_diffusion_value(self):
        pair = as_coefficient_pair(CIRParams(0.02, 0.45, 0.063, 0.45), 0.1)
        assert float(pair.diff_tilde(0.45)) == pytest.approx(0.13364318164425924, rel=1e-12)
        assert float(pair.diff_tilde(0.0)) == 0.0

    def test_composition_reproduces_named_logistic(self):
        p = LogisticParams(0.3, 1.0, 0.2, 0.1)
        pair = as_coefficient_pair(p, 0.25)
        y = np.linspace(0, 1, 11)
        assert np.allclose(pair.drift(y), y * (p.a - p.b * y))
        assert np.allclose(pair.diffusion(y), p.sigma * y)

    def test_zero_scale_is_degenerate(self):
        pair = as_coefficient_pair(CIRParams(0.02, 0.45, 0.063, 0.45), 0.0)
        assert pair.degenerate
        assert np.all(pair.drift(np.linspace(0, 1, 5)) == 0)
        assert "switched off" in check_natural_assumptions(pair).notes[-1]

    def test_scaled_model_keeps_feller_ratio(self):
        p = CIRParams(0.02, 0.45, 0.063, 0.45)
        eff = p.scaled(0.1)
        assert eff.feller_ratio == pytest.approx(p.feller_ratio)
        unscaled = as_coefficient_pair(eff, 0.1)
        assert float(unscaled.drift_tilde(0.3)) == pytest.approx(p.a * (p.b - 0.3))
        assert float(unscaled.diff_tilde(0.3)) == pytest.approx(p.sigma * math.sqrt(0.3))


def test_gray_params_effective_sigma():
    g = GrayParams(0.5, 0.4, 0.063, 0.1)
    assert g.sigma == pytest.approx(0.063 * math.sqrt(0.1))
    with pytest.raises(InvalidParameterError):
        GrayParams(0.5, 0.4, 0.1, 1.0)

import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from sis_perturb.asymptotics import (
    Regime,
    batch_means_stderr,
    classify_gray,
    classify_natural,
    ergodic_average,
    gray_level,
    gray_r0,
    oscillates_about,
)
from sis_perturb.diffusions import CIRParams, GrayParams, LogisticParams, stationary_mean
from sis_perturb.errors import InconsistentParameterError, InvalidParameterError
from sis_perturb.simulate import SamplePath, TimeGrid, simulate_cir, simulate_gray_sis
from sis_perturb.sis_core import deterministic_limit

rates = st.floats(0.01, 5.0, allow_nan=False)


class TestNatural:
    def test_figure_one_extinct(self):
        v = classify_natural(0.89, 0.92)
        assert v.regime is Regime.EXTINCT
        assert v.r0 == pytest.approx(0.9674, abs=1e-4)
        assert v.level is None

    def test_figure_two_persistent(self):
        v = classify_natural(0.5, 0.4)
        assert v.regime is Regime.PERSISTENT
        assert v.r0 == pytest.approx(1.25)
        assert v.level == pytest.approx(0.2, abs=1e-15)

    def test_boundary_inconclusive(self):
        assert classify_natural(0.3, 0.3).regime is Regime.INCONCLUSIVE

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            classify_natural(0.5, 0.0)
        with pytest.raises(InvalidParameterError):
            classify_natural(-0.1, 0.4)

    @given(m=rates, g=rates, j=st.integers(-10, 10))
    def test_power_of_two_scaling_is_exact(self, m, g, j):
        k = 2.0**j
        a, b = classify_natural(m, g), classify_natural(k * m, k * g)
        assert a.regime is b.regime
        assert a.level == b.level

    @given(m=rates, g=rates, k=st.floats(1e-3, 1e3))
    def test_scaling_invariance(self, m, g, k):
        assume(abs(m / g - 1.0) > 1e-9)
        a, b = classify_natural(m, g), classify_natural(k * m, k * g)
        assert a.regime is b.regime
        if a.level is not None:
            assert b.level == pytest.approx(a.level, rel=1e-12, abs=1e-15)

    @given(m=rates, g=rates)
    def test_level_is_deterministic_limit(self, m, g):
        v = classify_natural(m, g)
        if v.regime is Regime.PERSISTENT:
            assert v.level == pytest.approx(deterministic_limit(m, g), rel=1e-14, abs=1e-15)

    @given(sigma=st.floats(1e-3, 0.2))
    def test_noise_amplitude_does_not_matter(self, sigma):
        cir = CIRParams(0.05, 0.5, sigma, 0.5)
        assert classify_natural(stationary_mean(cir), 0.4) == classify_natural(0.5, 0.4)
        # logistic with (2a - sigma^2)/(2b) held at 0.28
        b = 1.0
        a = 0.28 * b + 0.5 * sigma**2
        m = stationary_mean(LogisticParams(a, b, sigma, 0.1))
        assert classify_natural(m, 0.2).regime is classify_natural(0.28, 0.2).regime
        assert classify_natural(m, 0.2).level == pytest.approx(1 - 0.2 / 0.28, abs=1e-12)

    def test_json_record(self):
        rec = json.loads(classify_natural(0.5, 0.4).to_json())
        assert rec["regime"] == "Persistent"
        assert rec["R0>1"] is True


class TestGray:
    def test_persistent_example(self):
        v = classify_gray(0.5, 0.4, 0.1)
        assert v.regime is Regime.PERSISTENT
        assert v.r0 == pytest.approx(1.2375)
        # xi = (sqrt(beta^2 - 2 sigma^2 gamma) - beta + sigma^2)/sigma^2
        assert v.level == pytest.approx(100 * (math.sqrt(0.242) - 0.49), abs=1e-12)
        assert v.level == pytest.approx(0.1934955, abs=1e-6)

    def test_extinct_small_noise(self):
        v = classify_gray(0.5, 0.92, 0.1)
        assert v.r0 == pytest.approx(0.5435 - 0.00543, abs=1e-4)
        assert v.regime is Regime.EXTINCT
        assert dict(v.conditions)["R0<1 and sigma^2<beta"]

    def test_extinct_large_noise(self):
        v = classify_gray(0.5, 0.4, 1.2)
        assert v.regime is Regime.EXTINCT
        assert dict(v.conditions)["sigma^2>max(beta,beta/gamma)"]

    def test_inconclusive_gap(self):
        # R0 < 1 but beta < sigma^2 < beta/gamma
        v = classify_gray(0.5, 0.4, 0.8)
        assert v.r0 < 1
        assert v.regime is Regime.INCONCLUSIVE

    def test_level_undefined(self):
        with pytest.raises(InconsistentParameterError):
            gray_level(0.5, 0.4, 0.6)

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            classify_gray(0.5, 0.4, -0.1)

    @settings(max_examples=100)
    @given(beta=rates, gamma=rates)
    def test_zero_noise_matches_deterministic(self, beta, gamma):
        assume(beta != gamma)
        v = classify_gray(beta, gamma, 0.0)
        if beta < gamma:
            assert v.regime is Regime.EXTINCT
        else:
            assert v.regime is Regime.PERSISTENT
            assert v.level == pytest.approx(deterministic_limit(beta, gamma), rel=1e-14)

    @given(beta=rates, gamma=rates)
    def test_level_continuous_at_zero_noise(self, beta, gamma):
        assume(beta > gamma * 1.01)
        s = 1e-6 * beta
        assert gray_level(beta, gamma, s) == pytest.approx((beta - gamma) / beta, abs=1e-9)
        # unrationalised form agrees away from zero
        s = 0.1 * beta
        if beta**2 - 2 * s**2 * gamma > 0:
            raw = (math.sqrt(beta**2 - 2 * s**2 * gamma) - beta + s**2) / s**2
            assert gray_level(beta, gamma, s) == pytest.approx(raw, rel=1e-9)

    def test_r0(self):
        assert gray_r0(0.5, 0.4, 0.0) == 1.25

    def test_long_path_crosses_level(self):
        xi = classify_gray(0.5, 0.4, 0.1).level
        path = simulate_gray_sis(GrayParams(0.5, 0.4, 0.1 / math.sqrt(0.5), 0.5), 0.8, TimeGrid(2000.0, 200000), 42)
        assert oscillates_about(path.values, xi)


class TestAverages:
    def test_constant(self):
        assert ergodic_average(np.full(10, 0.3)) == pytest.approx(0.3, abs=1e-16)

    def test_linear_exact(self):
        grid = TimeGrid(1.0, 7)
        assert ergodic_average(SamplePath(grid, grid.times())) == pytest.approx(0.5, abs=1e-15)

    def test_too_short(self):
        with pytest.raises(InvalidParameterError):
            ergodic_average([1.0])

    def test_cir_long_run_within_three_stderr(self):
        p = CIRParams(0.5, 0.6, 0.4, 0.6)
        path = simulate_cir(p, TimeGrid(8000.0, 400000), seed=77)
        assert abs(ergodic_average(path) - p.b) < 3 * batch_means_stderr(path.values)

    def test_oscillation(self):
        t = np.linspace(0, 50, 5001)
        assert oscillates_about(0.2 + 0.1 * np.sin(t), 0.2)
        assert not oscillates_about(0.5 + 0.1 * np.sin(t), 0.2)
        # crossings only during burn-in do not count
        assert not oscillates_about(np.r_[np.linspace(0, 1, 100), np.ones(300)], 0.5)

import math

import numpy as np
import pytest

from qoradapt import rng
from qoradapt.forecast import (
    MAPE_PROFILES,
    ZERO_PROFILE,
    CompositeCarbonProvider,
    ConstantProvider,
    MapeProfile,
    PerfectProvider,
    SeasonalProvider,
    fit_seasonal,
    mape,
    noisy_carbon_forecast,
    perfect_forecast,
    seasonal_forecast,
)

CISO = MAPE_PROFILES["CISO"]


def daily(n, mean=300.0, amp=0.3):
    i = np.arange(n)
    return mean * (1 + amp * np.sin(2 * np.pi * i / 24))


class TestPerfect:
    def test_identity(self):
        v = np.arange(10.0)
        assert np.array_equal(perfect_forecast(v, 0, 10).values, v)

    def test_single_and_empty(self):
        v = np.arange(10.0)
        assert perfect_forecast(v, 3, 1).values.tolist() == [3.0]
        assert len(perfect_forecast(v, 10, 0)) == 0

    def test_range_error(self):
        with pytest.raises(IndexError):
            perfect_forecast(np.ones(5), 3, 3)


class TestMape:
    def test_hand_values(self):
        assert mape([100, 100], [110, 90]) == pytest.approx(10.0)
        assert mape([5, 7], [5, 7]) == 0.0

    def test_zero_actual_skipped(self):
        assert mape([0, 100], [5, 100]) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            mape([0, 0], [1, 1])
        with pytest.raises(ValueError):
            mape([1, 2], [1])


class TestSeasonal:
    def test_constant_series(self):
        m = fit_seasonal(np.full(400, 7.0), (24, 168))
        assert np.allclose(m.coef[1:], 0.0, atol=1e-10)
        assert np.allclose(seasonal_forecast(m, 400, 50).values, 7.0)

    def test_in_basis_signal_recovered(self):
        y = daily(24 * 30)
        m = fit_seasonal(y, (24,))
        t = np.arange(24 * 30, 24 * 40)
        pred = seasonal_forecast(m, t[0], len(t)).values
        truth = 300 * (1 + 0.3 * np.sin(2 * np.pi * t / 24))
        assert np.sqrt(np.mean((pred - truth) ** 2)) / np.sqrt(np.mean(truth**2)) < 1e-6

    def test_beats_constant_mean_out_of_sample(self):
        n = 24 * 365
        i = np.arange(2 * n)
        noise = 0.1 * 90 * rng.normals(5, 0, i)
        y = 300 + 90 * np.sin(2 * np.pi * i / 24) + noise
        train, test = y[:n], y[n:]
        m = fit_seasonal(train, (24, 168))
        pred = seasonal_forecast(m, n, n).values
        assert mape(test, pred) < mape(test, np.full(n, train.mean()))

    def test_short_history_drops_longest_period(self):
        m = fit_seasonal(daily(24 * 20), (24, 168, 8760))
        assert m.periods == (24, 168) and m.dropped == (8760,)
        assert m.warning

    def test_clamped_at_zero(self):
        m = fit_seasonal(np.sin(2 * np.pi * np.arange(96) / 24), (24,))
        assert seasonal_forecast(m, 0, 48).values.min() >= 0.0

    def test_start_offset_aligns_phase(self):
        y = daily(24 * 10)
        m0 = fit_seasonal(y, (24,))
        m5 = fit_seasonal(y[5:], (24,), start=5)
        assert np.allclose(m0.predict(np.arange(300)), m5.predict(np.arange(300)), atol=1e-8)


class TestNoisy:
    def test_zero_profile_is_truth(self):
        v = daily(96)
        assert np.array_equal(noisy_carbon_forecast(v, 0, 96, ZERO_PROFILE, 1).values, v)

    def test_deterministic(self):
        v = daily(200)
        a = noisy_carbon_forecast(v, 10, 96, CISO, 3).values
        b = noisy_carbon_forecast(v, 10, 96, CISO, 3).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, noisy_carbon_forecast(v, 10, 96, CISO, 4).values)

    def test_formula(self):
        v = daily(96)
        got = noisy_carbon_forecast(v, 0, 96, CISO, 9).values
        h = np.arange(96)
        sigma = np.array(CISO.day_mape)[h // 24] / 100 * math.sqrt(math.pi / 2)
        assert np.allclose(got, np.maximum(v * (1 + sigma * rng.normals(9, 0, h)), 0.0))

    def test_horizon_limit(self):
        with pytest.raises(IndexError):
            noisy_carbon_forecast(daily(200), 0, 97, CISO, 0)

    def test_non_negative(self):
        heavy = MapeProfile("heavy", (90.0, 90.0, 90.0, 90.0))
        assert noisy_carbon_forecast(daily(96), 0, 96, heavy, 2).values.min() >= 0.0

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            MapeProfile("x", (1.0, 2.0, 3.0))
        with pytest.raises(ValueError):
            MapeProfile("x", (1.0, -2.0, 3.0, 4.0))


class TestProviders:
    def test_constant(self):
        p = ConstantProvider(1e6, 48)
        assert np.all(p.forecast(5, 10).values == 1e6)
        with pytest.raises(IndexError):
            p.forecast(40, 10)

    def test_seasonal_provider(self):
        m = fit_seasonal(daily(24 * 20), (24,))
        p = SeasonalProvider(m, 24 * 20)
        assert np.allclose(p.forecast(24, 24).values, daily(48)[24:], rtol=1e-6)

    def test_composite_midnight_short_only(self):
        v = daily(24 * 10)
        p = CompositeCarbonProvider(v, CISO, None, 1)
        got = p.forecast(24, 24).values
        assert np.array_equal(got, noisy_carbon_forecast(v, 24, 96, CISO, 1).values[:24])

    def test_composite_switches_to_seasonal(self):
        v = daily(24 * 30)
        m = fit_seasonal(v, (24,))
        p = CompositeCarbonProvider(v, CISO, m, 1)
        got = p.forecast(0, len(v)).values
        assert np.array_equal(got[:96], noisy_carbon_forecast(v, 0, 96, CISO, 1).values)
        assert np.array_equal(got[96:], seasonal_forecast(m, 96, len(v) - 96).values)

    def test_composite_same_day_queries_agree(self):
        v = daily(24 * 10)
        p = CompositeCarbonProvider(v, CISO, fit_seasonal(v, (24,)), 2)
        a = p.forecast(48, 30).values
        b = p.forecast(53, 20).values
        assert np.array_equal(a[5:25], b)

    def test_composite_exact_components_equal_perfect(self):
        v = daily(24 * 30)
        p = CompositeCarbonProvider(v, ZERO_PROFILE, fit_seasonal(v, (24,)), 0)
        for origin in (0, 7, 100, 500):
            h = len(v) - origin
            assert np.allclose(p.forecast(origin, h).values, perfect_forecast(v, origin, h).values, rtol=1e-8)

    def test_composite_mid_day_start(self):
        v = daily(24 * 10)
        p = CompositeCarbonProvider(v, CISO, fit_seasonal(v, (24,)), 3, start_hour=6)
        assert p.issued_at(0) == -6 and p.issued_at(18) == 18
        got = p.forecast(0, 24).values
        assert len(got) == 24 and got.min() >= 0
        # interval 0 sits six hours into day one of the virtual forecast
        sigma = CISO.sigma()[0]
        assert got[0] == pytest.approx(v[0] * (1 + sigma * rng.normals(3, -6, 6)))

    def test_perfect_provider(self):
        p = PerfectProvider(np.arange(5.0))
        assert p.num_intervals == 5
        assert p.forecast(1, 2).values.tolist() == [1.0, 2.0]

"""Request and carbon-intensity forecasts.

Three sources are available. The true trace serves as a perfect oracle. A
harmonic regression captures daily/weekly/annual seasonality. Multiplicative
Gaussian noise, calibrated to a per-day MAPE profile, models short-term
carbon forecasts. Providers combine them behind one ``forecast(origin,
horizon)`` call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from . import rng

DAY = 24
SHORT_TERM_DAYS = 4
HARMONICS = 2


@dataclass(frozen=True)
class ForecastSeries:
    origin: int
    values: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class MapeProfile:
    """Target MAPE in percent for day-ahead buckets 1..4."""

    region: str
    day_mape: tuple[float, float, float, float]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.day_mape)
        if len(vals) != SHORT_TERM_DAYS:
            raise ValueError(f"expected {SHORT_TERM_DAYS} day-ahead values, got {len(vals)}")
        if any(v < 0 for v in vals):
            raise ValueError("MAPE values must be >= 0")
        object.__setattr__(self, "day_mape", vals)

    def sigma(self) -> np.ndarray:
        """Gaussian relative sigma per day bucket, since E|N(0, s)| = s * sqrt(2/pi)."""
        return np.asarray(self.day_mape) / 100.0 * math.sqrt(math.pi / 2.0)


# CarbonCast day-ahead MAPEs for 96-hour carbon-intensity forecasts
MAPE_PROFILES = {
    "CISO": MapeProfile("CISO", (8.08, 11.19, 12.93, 13.62)),
    "PJM": MapeProfile("PJM", (3.69, 4.93, 5.87, 6.67)),
    "ERCOT": MapeProfile("ERCOT", (9.78, 10.93, 11.61, 12.23)),
    "NYISO": MapeProfile("NYISO", (6.91, 9.06, 9.95, 10.42)),
    "SE": MapeProfile("SE", (4.29, 5.64, 6.43, 6.74)),
    "DE": MapeProfile("DE", (7.81, 10.69, 12.80, 15.55)),
    "PL": MapeProfile("PL", (3.12, 4.14, 4.72, 5.50)),
    "ES": MapeProfile("ES", (10.12, 16.00, 19.37, 21.12)),
    "NL": MapeProfile("NL", (6.06, 7.87, 9.08, 9.99)),
    "AU-QLD": MapeProfile("AU-QLD", (3.93, 3.98, 4.06, 5.87)),
}

ZERO_PROFILE = MapeProfile("none", (0.0, 0.0, 0.0, 0.0))


def _check_range(n: int, origin: int, horizon: int):
    if origin < 0 or horizon < 0 or origin + horizon > n:
        raise IndexError(f"forecast [{origin}, {origin + horizon}) outside trace of length {n}")


def perfect_forecast(trace, origin: int, horizon: int) -> ForecastSeries:
    values = np.asarray(getattr(trace, "values", trace), dtype=float)
    _check_range(len(values), origin, horizon)
    return ForecastSeries(origin, values[origin : origin + horizon].copy())


def mape(actual, forecast) -> float:
    """Mean absolute percentage error, skipping points where ``actual`` is 0."""
    a = np.asarray(actual, dtype=float)
    f = np.asarray(forecast, dtype=float)
    if a.shape != f.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {f.shape}")
    valid = a > 0
    if not valid.any():
        raise ValueError("MAPE undefined: no positive actual values")
    return float(100.0 * np.mean(np.abs(a[valid] - f[valid]) / a[valid]))


# -- seasonal model -----------------------------------------------------------


@dataclass(frozen=True)
class SeasonalModel:
    periods: tuple[int, ...]
    coef: np.ndarray
    dropped: tuple[int, ...] = ()

    @property
    def warning(self) -> bool:
        return bool(self.dropped)

    def design(self, t) -> np.ndarray:
        return _design(np.asarray(t, dtype=float), self.periods)

    def predict(self, t) -> np.ndarray:
        return self.design(t) @ self.coef


def _design(t: np.ndarray, periods: Sequence[int]) -> np.ndarray:
    cols = [np.ones_like(t)]
    for p in periods:
        for k in range(1, HARMONICS + 1):
            w = 2.0 * np.pi * k * t / p
            cols.append(np.sin(w))
            cols.append(np.cos(w))
    return np.stack(cols, axis=1)


def fit_seasonal(history, periods: Sequence[int] = (24, 168, 8760), start: int = 0) -> SeasonalModel:
    """Least-squares fit of an intercept plus two harmonics per period.

    ``start`` is the interval index of ``history[0]`` so that predictions
    line up with the grid. Periods needing more than half the history are
    dropped, longest first, and recorded in ``dropped``.
    """
    y = np.asarray(history, dtype=float)
    if y.size == 0:
        raise ValueError("empty history")
    kept = sorted(int(p) for p in periods)
    dropped = []
    while kept and len(y) < 2 * kept[-1]:
        dropped.append(kept.pop())
    t = start + np.arange(len(y), dtype=float)
    X = _design(t, kept)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return SeasonalModel(tuple(kept), coef, tuple(dropped))


def seasonal_forecast(model: SeasonalModel, origin: int, horizon: int) -> ForecastSeries:
    t = origin + np.arange(horizon)
    return ForecastSeries(origin, np.maximum(model.predict(t), 0.0))


# -- noisy short-term carbon forecasts -----------------------------------------


def noisy_carbon_forecast(
    true_trace,
    origin: int,
    horizon: int,
    profile: MapeProfile,
    seed: int,
    intervals_per_day: int = DAY,
) -> ForecastSeries:
    """Truth times ``1 + eps`` with ``eps ~ N(0, sigma_d)`` for day-ahead bucket ``d``.

    Draws come from stream ``origin`` and counter ``h`` of the counter-based
    generator, so the same (seed, origin, h) always yields the same value.
    """
    values = np.asarray(getattr(true_trace, "values", true_trace), dtype=float)
    if horizon > SHORT_TERM_DAYS * intervals_per_day:
        raise IndexError(f"horizon {horizon} exceeds {SHORT_TERM_DAYS} days")
    _check_range(len(values), origin, horizon)
    h = np.arange(horizon)
    sigma = profile.sigma()[h // intervals_per_day]
    eps = sigma * rng.normals(seed, origin, h) if horizon else np.zeros(0)
    truth = values[origin : origin + horizon]
    return ForecastSeries(origin, np.maximum(truth * (1.0 + eps), 0.0))


# -- providers -----------------------------------------------------------------


class ForecastProvider(Protocol):
    num_intervals: int

    def forecast(self, origin: int, horizon: int) -> ForecastSeries: ...


@dataclass(frozen=True)
class PerfectProvider:
    values: np.ndarray

    @property
    def num_intervals(self) -> int:
        return len(self.values)

    def forecast(self, origin: int, horizon: int) -> ForecastSeries:
        return perfect_forecast(self.values, origin, horizon)


@dataclass(frozen=True)
class ConstantProvider:
    """Always predicts ``level``; used for the artificial request traces."""

    level: float
    num_intervals: int

    def forecast(self, origin: int, horizon: int) -> ForecastSeries:
        _check_range(self.num_intervals, origin, horizon)
        return ForecastSeries(origin, np.full(horizon, float(self.level)))


@dataclass(frozen=True)
class SeasonalProvider:
    model: SeasonalModel
    num_intervals: int

    def forecast(self, origin: int, horizon: int) -> ForecastSeries:
        _check_range(self.num_intervals, origin, horizon)
        return seasonal_forecast(self.model, origin, horizon)


@dataclass(frozen=True)
class CompositeCarbonProvider:
    """Noisy short-term values up to 96 h after the latest midnight, seasonal beyond.

    ``start_hour`` is the hour of day of interval 0. Short-term forecasts are
    issued at midnight, so every query within a day sees the same noisy
    values for a given interval.
    """

    true_values: np.ndarray
    profile: MapeProfile
    model: Optional[SeasonalModel]
    seed: int
    intervals_per_day: int = DAY
    start_hour: int = 0
    _long: Optional[ForecastProvider] = field(default=None, compare=False)

    @property
    def num_intervals(self) -> int:
        return len(self.true_values)

    def issued_at(self, origin: int) -> int:
        """Most recent midnight at or before ``origin``."""
        phase = (origin + self.start_hour) % self.intervals_per_day
        return origin - phase

    def forecast(self, origin: int, horizon: int) -> ForecastSeries:
        n = self.num_intervals
        _check_range(n, origin, horizon)
        midnight = self.issued_at(origin)
        short_end = min(n, midnight + SHORT_TERM_DAYS * self.intervals_per_day)
        out = np.empty(horizon)
        k = max(0, min(horizon, short_end - origin))
        if k:
            lo = max(midnight, 0)
            noisy = noisy_carbon_forecast(
                self.true_values, lo, short_end - lo, self.profile, self.seed, self.intervals_per_day
            ).values
            if midnight < 0:
                # the grid starts mid-day: keep the day buckets of the virtual midnight
                noisy = _shifted_noise(self, midnight, lo, short_end)
            out[:k] = noisy[origin - lo : origin - lo + k]
        if k < horizon:
            if self.model is None:
                raise ValueError("no long-term model for intervals beyond the short-term range")
            out[k:] = seasonal_forecast(self.model, origin + k, horizon - k).values
        return ForecastSeries(origin, out)


def _shifted_noise(p: CompositeCarbonProvider, midnight: int, lo: int, hi: int) -> np.ndarray:
    h = np.arange(lo - midnight, hi - midnight)
    sigma = p.profile.sigma()[h // p.intervals_per_day]
    eps = sigma * rng.normals(p.seed, midnight, h)
    return np.maximum(np.asarray(p.true_values[lo:hi]) * (1.0 + eps), 0.0)

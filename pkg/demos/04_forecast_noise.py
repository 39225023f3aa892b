"""
Calibrated forecast noise
=========================

Short-term carbon forecasts are the truth times (1 + eps), with eps drawn so
each day-ahead bucket hits a target MAPE. Beyond four days a harmonic model
takes over.
"""
import numpy as np

from qoradapt.forecast import MAPE_PROFILES, fit_seasonal, mape, noisy_carbon_forecast, seasonal_forecast

hours = np.arange(24 * 60)
truth = 300 * (1 + 0.3 * np.sin(2 * np.pi * hours / 24)) + 20 * np.sin(2 * np.pi * hours / 168)

profile = MAPE_PROFILES["CISO"]
draws = np.array([noisy_carbon_forecast(truth, 0, 96, profile, s).values for s in range(2000)])
for day in range(4):
    sl = slice(24 * day, 24 * (day + 1))
    realized = np.mean([mape(truth[sl], d[sl]) for d in draws])
    print(f"day {day + 1}: target {profile.day_mape[day]:5.2f}%  realized {realized:5.2f}%")

# a daily+weekly harmonic fit on six weeks, tested on the following two
model = fit_seasonal(truth[: 24 * 42], (24, 168))
held_out = truth[24 * 42 :]
pred = seasonal_forecast(model, 24 * 42, len(held_out)).values
print(f"seasonal model MAPE on held-out weeks: {mape(held_out, pred):.2e}%")
print(f"constant-mean MAPE: {mape(held_out, np.full(len(held_out), truth[: 24 * 42].mean())):.2f}%")

# Residual variograms and the two kriging predictors
# ====================================================
#
# After detrending (mean + cross-track trend removed), the residuals keep
# spatial structure. The empirical semivariogram measures it; a fitted
# exponential model feeds both kriging systems:
#
#   * ordinary kriging of the residuals (used by regression kriging),
#   * drift-constrained universal kriging of the raw measurements.

import numpy as np

from asfkit.kriging import detrend, ok_weights, rk_predict, uk_predict
from asfkit.simulator import load_scenario, simulate
from asfkit.survey import mad_filter
from asfkit.trend import eval_trend, fit_cross_track_trend, select_section
from asfkit.variogram import empirical_variogram, fit_model, variogram_report

from _shared import scenario_path

cfg = load_scenario(scenario_path())
sim = simulate(cfg)
filtered, _ = mad_filter(sim.build_track)
section = select_section(filtered, cfg.frame,
                         cfg.turn_s_m - cfg.turn_span_m / 2,
                         cfg.turn_s_m + cfg.turn_span_m / 2)

tx = cfg.fields[0].tx.id
trend, _, _ = fit_cross_track_trend(section, cfg.frame, tx)
survey = detrend(filtered, cfg.frame, trend, tx)
print(f"tx {tx}: mu0 = {survey.mu0:.3f} us, residual std "
      f"{survey.eps.std():.4f} us, sum eps = {survey.eps.sum():+.2e}")

# %% empirical variogram of the residuals + weighted LS model fit
emp = empirical_variogram(survey.points, survey.eps,
                          bin_width=cfg.grid_spacing_m, max_lag=1000.0)
fit = fit_model(emp, "exponential")
print("\n" + variogram_report(emp, fit))

# %% kriging weights sum to one; the drift constraint reproduces the trend
pts = survey.points[:120]
target = pts.mean(axis=0) + (35.0, 10.0)
w = ok_weights(pts, target, fit.model)
print(f"ordinary kriging on {len(pts)} points: sum w = {w.w.sum():.12f}, "
      f"lagrange multiplier {w.multipliers[0]:+.3e}")

# %% the two predictors at one target
l_target = 80.0
rk = rk_predict(survey, target, l_target, fit.model)
uk = uk_predict(survey, target, l_target, fit.model)
print(f"\nprediction at l = {l_target:.0f} m: "
      f"rk {rk:.3f} us, uk {uk:.3f} us, "
      f"trend surface {survey.mu0 + eval_trend(trend, l_target):.3f} us")

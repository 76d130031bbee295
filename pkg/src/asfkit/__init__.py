"""asfkit: ASF correction maps and TOA positioning for narrow waterways.

Survey processing (MAD outlier filter, cross-track trend extraction by
smoothing spline), gridded ASF map generation (linear interpolation,
universal kriging, regression kriging), a Gauss-Newton TOA positioning
harness, and a seeded synthetic-scenario simulator.
"""

from .geometry import LocalCoord, WaterwayFrame, to_global, to_local
from .kriging import (DetrendedSurvey, KrigingWeights, detrend, ok_weights,
                      rk_predict, uk_predict)
from .mapgen import (AsfMap, GridSpec, build_map_linear, build_map_rk,
                     build_map_uk, load_map, lookup_asf, save_map)
from .positioning import (AccuracyReport, PositionFix, Transmitter,
                          evaluate_routes, solve_fix)
from .simulator import (ScenarioConfig, SimulationResult, load_scenario,
                        save_scenario, simulate, truth_asf)
from .survey import SurveyMeasurement, SurveyTrack, load_track, mad_filter, write_track
from .trend import (CrossTrackTrend, DeviationSample, eval_trend,
                    fit_smoothing_spline, make_deviations, select_p_loocv)
from .variogram import (EmpiricalVariogram, VariogramModel,
                        empirical_variogram, fit_model, gamma)

__version__ = "0.1.0"

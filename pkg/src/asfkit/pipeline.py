"""End-to-end orchestration: survey in, maps out, accuracy report out.

This is the library face of the command-line tool: everything here is a
pure function over the domain objects so tests and notebooks can run the
same pipeline without touching the filesystem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import local_coords
from .kriging import DetrendedSurvey, detrend
from .mapgen import AsfMap, GridSpec, build_map_linear, build_map_rk, build_map_uk
from .positioning import AccuracyReport, evaluate_routes
from .simulator import (ScenarioConfig, SimulationResult, scenario_grid,
                        simulate, without_cross_leg)
from .survey import SurveyTrack, mad_filter
from .trend import (CrossTrackTrend, LoocvResult, fit_cross_track_trend,
                    select_section)
from .variogram import (EmpiricalVariogram, VariogramFit, empirical_variogram,
                        fit_model)

BUILD_METHODS = ("linear", "uk", "rk")


@dataclass
class FilterParams:
    window_sec: float = 60.0
    mad_k: float = 2.0


@dataclass
class TrendParams:
    center_band_m: float = 5.0
    p_grid: np.ndarray | None = None


@dataclass
class VariogramParams:
    kind: str = "exponential"
    bin_width_m: float | None = None   # default: one grid spacing
    max_lag_m: float | None = None     # default: half the survey extent


@dataclass
class TxMapSet:
    """Everything built for one transmitter."""

    trend: CrossTrackTrend
    asf_center: float
    loocv: LoocvResult
    detrended: DetrendedSurvey
    empirical: EmpiricalVariogram
    variogram: VariogramFit
    maps: dict[str, AsfMap]


@dataclass
class BuildResult:
    """Per-transmitter map sets plus the filtered survey that fed them."""

    filtered: SurveyTrack
    rejected: list[int]
    per_tx: dict[str, TxMapSet]

    def maps_for(self, method: str) -> dict[str, AsfMap]:
        return {tx: s.maps[method] for tx, s in self.per_tx.items()}


def build_maps(track: SurveyTrack, cfg: ScenarioConfig,
               methods=BUILD_METHODS, grid: GridSpec | None = None,
               filter_params: FilterParams | None = None,
               trend_params: TrendParams | None = None,
               vario_params: VariogramParams | None = None) -> BuildResult:
    """Run filter -> trend -> variogram -> map generation for one survey.

    The scenario config supplies the waterway frame, the cross-track
    survey section bounds and the grid geometry; for real (non-simulated)
    surveys, write a config with the same keys.
    """
    fp = filter_params or FilterParams()
    tp = trend_params or TrendParams()
    vp = vario_params or VariogramParams()
    grid = grid or scenario_grid(cfg)

    filtered, rejected = mad_filter(track, fp.window_sec, fp.mad_k)
    section = select_section(filtered, cfg.frame,
                             cfg.turn_s_m - cfg.turn_span_m / 2.0,
                             cfg.turn_s_m + cfg.turn_span_m / 2.0)

    bin_width = vp.bin_width_m or grid.spacing
    if vp.max_lag_m is None:
        span = np.ptp(filtered.pos, axis=0)
        max_lag = float(np.hypot(span[0], span[1])) / 2.0
    else:
        max_lag = vp.max_lag_m

    per_tx = {}
    for tx in track.tx_ids:
        trend, center, loocv = fit_cross_track_trend(
            section, cfg.frame, tx, tp.center_band_m, tp.p_grid)
        det = detrend(filtered, cfg.frame, trend, tx)
        emp = empirical_variogram(det.points, det.eps, bin_width, max_lag)
        fit = fit_model(emp, vp.kind)

        maps = {}
        for method in methods:
            if method == "linear":
                maps[method] = build_map_linear(filtered, grid, tx)
            elif method == "uk":
                maps[method] = build_map_uk(det, fit.model, grid, tx)
            elif method == "rk":
                maps[method] = build_map_rk(det, fit.model, grid, tx)
            else:
                raise ValueError(f"unknown map method {method!r}")
        per_tx[tx] = TxMapSet(trend=trend, asf_center=center, loocv=loocv,
                              detrended=det, empirical=emp, variogram=fit,
                              maps=maps)
    return BuildResult(filtered=filtered, rejected=rejected, per_tx=per_tx)


@dataclass
class BenchmarkRun:
    """One full simulate -> build -> evaluate cycle."""

    sim: SimulationResult
    build: BuildResult
    nocross_maps: dict[str, AsfMap]
    report: AccuracyReport

    def rms(self, method: str) -> float:
        return self.report.methods[method].rms_m


def run_benchmark(cfg: ScenarioConfig, include_nocross: bool = True
                  ) -> BenchmarkRun:
    """Simulate a scenario, build all maps from the build route and score
    each method on the held-out routes.

    The ``linear-nocross`` method repeats the linear baseline with the
    cross-track sweep stripped from the build survey, reproducing the
    conventional along-track-only workflow.
    """
    sim = simulate(cfg)
    build = build_maps(sim.build_track, cfg)

    maps_by_method = {m: build.maps_for(m) for m in BUILD_METHODS}
    nocross_maps: dict[str, AsfMap] = {}
    if include_nocross:
        stripped = without_cross_leg(sim.build_track, cfg)
        filtered, _ = mad_filter(stripped)
        grid = scenario_grid(cfg)
        nocross_maps = {tx: build_map_linear(filtered, grid, tx)
                        for tx in stripped.tx_ids}
        maps_by_method["linear-nocross"] = nocross_maps

    report = evaluate_routes(sim.eval_tracks, cfg.transmitters,
                             maps_by_method)
    return BenchmarkRun(sim=sim, build=build, nocross_maps=nocross_maps,
                        report=report)

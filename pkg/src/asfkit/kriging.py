"""Kriging weight systems and predictors for ASF map generation.

Two predictors are provided, sharing one fitted variogram model:

* regression kriging — the measurements are split into a detrended mean,
  a cross-track trend value and a stochastic residual; the residuals are
  ordinary-kriged (an (N+1) system with a unit unbiasedness row) and the
  trend is added back analytically at the target.
* universal kriging — the raw measurements are kriged with the
  cross-track trend as an additional drift constraint row, an (N+2)
  system; the prediction is the weighted combination of raw values.

All survey points take part in every prediction (global neighborhood);
the system matrix is factored once and back-substituted per target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial import cKDTree

from .geometry import WaterwayFrame, local_coords
from .survey import SurveyTrack
from .trend import CrossTrackTrend, eval_trend
from .variogram import VariogramModel, semivariance_matrix

log = logging.getLogger(__name__)

# Survey points closer than this are merged before building the system.
MERGE_TOL_M = 0.01
# Above this condition estimate a tiny nugget is added to the diagonal.
COND_LIMIT = 1e12
JITTER_NUGGET = 1e-10


class KrigingError(ValueError):
    """Kriging system cannot be solved."""


class DegenerateDriftError(KrigingError):
    """All drift values equal: the universal-kriging constraint row is
    collinear with the unit row.  Use the regression-kriging path."""


@dataclass
class DetrendedSurvey:
    """Survey decomposed as asf = mu0 + trend(l) + eps (per transmitter)."""

    points: np.ndarray       # (N, 2) east/north m
    l: np.ndarray            # (N,) cross-track m
    asf: np.ndarray          # (N,) us
    drift: np.ndarray        # (N,) trend values at l, us
    eps: np.ndarray          # (N,) residuals, us
    mu0: float               # detrended average, us
    trend: CrossTrackTrend


@dataclass
class KrigingWeights:
    """Weights plus the Lagrange multipliers of the constraint rows."""

    w: np.ndarray
    multipliers: np.ndarray


def detrend(track: SurveyTrack, frame: WaterwayFrame,
            trend: CrossTrackTrend, tx: str) -> DetrendedSurvey:
    """Split one transmitter's ASF into mean + cross-track trend + residual."""
    if len(track) == 0:
        raise KrigingError("empty survey")
    j = track.tx_index(tx)
    _, l = local_coords(frame, track.pos)
    asf = track.asf[:, j].copy()
    drift = eval_trend(trend, l)
    mu0 = float(np.mean(asf - drift))
    return DetrendedSurvey(points=track.pos.copy(), l=l, asf=asf,
                           drift=drift, eps=asf - mu0 - drift,
                           mu0=mu0, trend=trend)


def merge_coincident(points, *columns, tol: float = MERGE_TOL_M):
    """Average clusters of points closer than tol; returns merged arrays.

    Kriging matrices are singular for coincident points, so clusters are
    collapsed to their centroid and each extra column is averaged the
    same way.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    if pairs.size == 0:
        return (pts,) + tuple(np.asarray(c, dtype=float) for c in columns)

    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        parent[find(i)] = find(j)
    roots = np.array([find(i) for i in range(n)])
    _, group = np.unique(roots, return_inverse=True)
    ngroups = group.max() + 1
    counts = np.bincount(group).astype(float)

    def average(col):
        col = np.asarray(col, dtype=float)
        out = np.zeros(ngroups)
        np.add.at(out, group, col)
        return out / counts

    merged_pts = np.column_stack([average(pts[:, 0]), average(pts[:, 1])])
    return (merged_pts,) + tuple(average(c) for c in columns)


def _closest_pair(points) -> tuple[int, int, float]:
    tree = cKDTree(points)
    d, idx = tree.query(points, k=2)
    i = int(np.argmin(d[:, 1]))
    return i, int(idx[i, 1]), float(d[i, 1])


class _KrigingSystem:
    """Factored (N + n_constraints) kriging matrix with per-target solves."""

    def __init__(self, points: np.ndarray, model: VariogramModel,
                 drift: np.ndarray | None = None):
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0]
        if n < 1:
            raise KrigingError("kriging needs at least one survey point")
        self.points = pts
        self.model = model
        self.drift = None if drift is None else np.asarray(drift, dtype=float)
        self.n = n
        nc = 1 if drift is None else 2
        self.size = n + nc

        self._matrix = self._assemble(model)
        cond = np.linalg.cond(self._matrix)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            jittered = VariogramModel(kind=model.kind,
                                      nugget=model.nugget + JITTER_NUGGET,
                                      partial_sill=model.partial_sill,
                                      range_m=model.range_m)
            log.warning("kriging matrix condition %.3g > %.0g; adding "
                        "%.0g us^2 nugget", cond, COND_LIMIT, JITTER_NUGGET)
            self.model = jittered
            self._matrix = self._assemble(jittered)
            cond = np.linalg.cond(self._matrix)
        self.condition = float(cond)
        if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
            self._raise_singular()
        self._factors = lu_factor(self._matrix)
        if np.any(np.diag(self._factors[0]) == 0.0):
            self._raise_singular()

    def _raise_singular(self):
        msg = (f"singular kriging system (condition estimate "
               f"{self.condition:.3g})")
        if self.n > 1:
            i, j, d = _closest_pair(self.points)
            msg += (f"; closest survey points {i} and {j} are {d:.4g} m "
                    f"apart (coincident-point suspects)")
        raise KrigingError(msg)

    def _assemble(self, model) -> np.ndarray:
        n, m = self.n, np.zeros((self.size, self.size))
        m[:n, :n] = semivariance_matrix(model, self.points, self.points)
        m[:n, n] = 1.0
        m[n, :n] = 1.0
        if self.drift is not None:
            m[:n, n + 1] = self.drift
            m[n + 1, :n] = self.drift
        return m

    def _rhs(self, targets, drift_targets=None) -> np.ndarray:
        t = np.atleast_2d(np.asarray(targets, dtype=float))
        rhs = np.zeros((self.size, t.shape[0]))
        rhs[:self.n] = semivariance_matrix(self.model, self.points, t)
        rhs[self.n] = 1.0
        if self.drift is not None:
            rhs[self.n + 1] = np.asarray(drift_targets, dtype=float)
        return rhs

    def solve(self, targets, drift_targets=None) -> np.ndarray:
        """(size, M) solution columns for M targets."""
        return lu_solve(self._factors, self._rhs(targets, drift_targets))

    def weights(self, target, drift_target=None) -> KrigingWeights:
        col = self.solve(np.asarray(target)[None, :],
                         None if drift_target is None else [drift_target])[:, 0]
        return KrigingWeights(w=col[:self.n], multipliers=col[self.n:])


class ResidualKriging:
    """Ordinary kriging of detrended residuals; trend added back at the
    target (regression kriging, factored once for many targets)."""

    def __init__(self, survey: DetrendedSurvey, model: VariogramModel):
        pts, eps = merge_coincident(survey.points, survey.eps)
        self.survey = survey
        self.eps = eps
        self.system = _KrigingSystem(pts, model)

    def predict(self, targets, l_targets) -> np.ndarray:
        sol = self.system.solve(targets)
        w = sol[:self.system.n]
        trend_vals = eval_trend(self.survey.trend,
                                np.atleast_1d(np.asarray(l_targets, float)))
        return self.survey.mu0 + trend_vals + w.T @ self.eps


class UniversalKriging:
    """Drift-constrained kriging of the raw measurements."""

    def __init__(self, survey: DetrendedSurvey, model: VariogramModel):
        pts, asf, drift = merge_coincident(survey.points, survey.asf,
                                           survey.drift)
        if pts.shape[0] < 2:
            raise KrigingError("universal kriging needs at least 2 points")
        if np.ptp(drift) <= 1e-12 * max(1.0, float(np.max(np.abs(drift)))):
            raise DegenerateDriftError(
                "cross-track trend values are all equal over the survey; "
                "the drift row duplicates the unit row and the system is "
                "singular -- use regression kriging for this data")
        self.asf = asf
        self.system = _KrigingSystem(pts, model, drift=drift)

    def predict(self, targets, drift_targets) -> np.ndarray:
        sol = self.system.solve(targets, drift_targets)
        return sol[:self.system.n].T @ self.asf


def ok_weights(points, target, model: VariogramModel) -> KrigingWeights:
    """Ordinary-kriging weights of N residual points for one target."""
    return _KrigingSystem(np.asarray(points, float), model).weights(
        np.asarray(target, float))


def rk_predict(survey: DetrendedSurvey, target, l_target: float,
               model: VariogramModel) -> float:
    """Regression-kriging prediction at one target position."""
    rk = ResidualKriging(survey, model)
    return float(rk.predict(np.asarray(target, float)[None, :],
                            [l_target])[0])


def uk_predict(survey: DetrendedSurvey, target, l_target: float,
               model: VariogramModel) -> float:
    """Universal-kriging prediction at one target position."""
    uk = UniversalKriging(survey, model)
    drift_t = eval_trend(survey.trend, l_target)
    return float(uk.predict(np.asarray(target, float)[None, :],
                            [drift_t])[0])

"""Cross-track ASF trend: natural cubic smoothing spline with LOOCV.

The trend is fit to cross-track deviation samples (l_k, z_k) as the
natural cubic smoothing spline minimizing

    (1 - p) * sum_k (z_k - f(l_k))^2  +  p * integral f''(l)^2 dl

with smoothing parameter p in [0, 1).  NOTE the convention: p multiplies
the *roughness* term, which is the reverse of several common spline
tools; p -> 0 interpolates the data, p -> 1 approaches the least-squares
straight line.

The minimizer is computed by the Reinsch banded system.  Writing
lam = p / (1 - p), w_k the sample weights (duplicate-l samples are
pre-averaged with weight = count), h_i the knot gaps, Q the n x (n-2)
second-difference matrix and R the (n-2) tridiagonal Gram matrix of the
natural-spline roughness, the interior second derivatives g'' solve

    (R + lam * Q^T W^-1 Q) g'' = Q^T z,      g = z - lam * W^-1 Q g''

and the boundary second derivatives are zero (natural spline).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solveh_banded

from .geometry import WaterwayFrame, local_coords
from .survey import SurveyTrack


class TrendFitError(ValueError):
    """Spline fit impossible (too few knots, bad smoothing parameter)."""


class CenterBandError(ValueError):
    """No samples near the waterway centerline; widen the band."""


@dataclass(frozen=True)
class DeviationSample:
    """Cross-track distance (m) and ASF deviation (us) of one sample."""

    l: float
    z: float


@dataclass
class CrossTrackTrend:
    """Piecewise-cubic cross-track trend.

    ``coeffs[i] = (a, b, c, d)`` gives the cubic on [knots[i], knots[i+1]]
    as a + b*t + c*t^2 + d*t^3 with t = l - knots[i].  Outside the knot
    span the trend extends linearly with the boundary slope (consistent
    with the natural boundary condition f'' = 0 at the ends).
    """

    knots: np.ndarray
    coeffs: np.ndarray
    p: float

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    def __call__(self, l):
        return eval_trend(self, l)

    def shifted(self, offset: float) -> "CrossTrackTrend":
        """Trend with a constant added to its value everywhere."""
        coeffs = self.coeffs.copy()
        coeffs[:, 0] += offset
        return CrossTrackTrend(knots=self.knots.copy(), coeffs=coeffs, p=self.p)


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    l = np.asarray([d.l for d in data], dtype=float)
    z = np.asarray([d.z for d in data], dtype=float)
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(z))):
        raise TrendFitError("deviation samples must be finite")
    return l, z


def _dedup(l: np.ndarray, z: np.ndarray):
    """Average duplicate-l samples; weight = duplicate count."""
    knots, inverse, counts = np.unique(l, return_inverse=True,
                                       return_counts=True)
    zsum = np.zeros(knots.size)
    np.add.at(zsum, inverse, z)
    return knots, zsum / counts, counts.astype(float)


def fit_smoothing_spline(data, p: float) -> CrossTrackTrend:
    """Fit the natural cubic smoothing spline at smoothing parameter p.

    Parameters
    ----------
    data : sequence of DeviationSample (>= 2 distinct l values).
    p : smoothing parameter in [0, 1); p multiplies the roughness term.
    """
    if not 0.0 <= p < 1.0:
        raise TrendFitError(f"smoothing parameter p={p} outside [0, 1)")
    l, z = _as_arrays(data)
    knots, zbar, w = _dedup(l, z)
    n = knots.size
    if n < 2:
        raise TrendFitError("need at least 2 distinct cross-track distances")

    if n == 2:
        # No interior knot: the minimizer is the line through both
        # (averaged) points -- zero roughness, minimal RSS.
        h = knots[1] - knots[0]
        coeffs = np.array([[zbar[0], (zbar[1] - zbar[0]) / h, 0.0, 0.0]])
        return CrossTrackTrend(knots=knots, coeffs=coeffs, p=p)

    lam = p / (1.0 - p)
    h = np.diff(knots)
    iw = 1.0 / w

    # Q columns: (1/h_j, -1/h_j - 1/h_{j+1}, 1/h_{j+1}) at rows j, j+1, j+2.
    q0 = 1.0 / h[:-1]
    q2 = 1.0 / h[1:]
    q1 = -(q0 + q2)

    # Pentadiagonal bands of Q^T W^-1 Q.
    d0 = q0**2 * iw[:-2] + q1**2 * iw[1:-1] + q2**2 * iw[2:]
    d1 = q1[:-1] * q0[1:] * iw[1:-2] + q2[:-1] * q1[1:] * iw[2:-1]
    d2 = q2[:-2] * q0[2:] * iw[2:-2]

    # R bands (roughness Gram matrix of the interior second derivatives).
    r0 = (h[:-1] + h[1:]) / 3.0
    r1 = h[1:-1] / 6.0

    m = n - 2
    ab = np.zeros((3, m))
    ab[2] = r0 + lam * d0
    if m > 1:
        ab[1, 1:] = r1 + lam * d1
    if m > 2:
        ab[0, 2:] = lam * d2

    rhs = q0 * zbar[:-2] + q1 * zbar[1:-1] + q2 * zbar[2:]
    try:
        gpp_int = solveh_banded(ab, rhs, lower=False)
    except np.linalg.LinAlgError as exc:       # pragma: no cover - SPD system
        raise TrendFitError(f"singular spline system: {exc}") from exc

    qg = np.zeros(n)
    qg[:-2] += q0 * gpp_int
    qg[1:-1] += q1 * gpp_int
    qg[2:] += q2 * gpp_int
    g = zbar - lam * iw * qg

    gpp = np.zeros(n)
    gpp[1:-1] = gpp_int
    return CrossTrackTrend(knots=knots, coeffs=_coeffs_from_values(knots, g, gpp), p=p)


def _coeffs_from_values(knots, g, gpp) -> np.ndarray:
    """Interval cubics from knot values and second derivatives."""
    h = np.diff(knots)
    a = g[:-1]
    c = gpp[:-1] / 2.0
    d = np.diff(gpp) / (6.0 * h)
    b = np.diff(g) / h - h * (2.0 * gpp[:-1] + gpp[1:]) / 6.0
    return np.column_stack([a, b, c, d])


def eval_trend(trend: CrossTrackTrend, l):
    """Evaluate the trend; linear extrapolation beyond the knot span."""
    l_arr = np.asarray(l, dtype=float)
    scalar = l_arr.ndim == 0
    l_arr = np.atleast_1d(l_arr)
    knots, coeffs = trend.knots, trend.coeffs

    idx = np.clip(np.searchsorted(knots, l_arr, side="right") - 1,
                  0, len(knots) - 2)
    t = l_arr - knots[idx]
    a, b, c, d = (coeffs[idx, j] for j in range(4))
    out = a + t * (b + t * (c + t * d))

    below = l_arr < knots[0]
    if np.any(below):
        out[below] = coeffs[0, 0] + coeffs[0, 1] * (l_arr[below] - knots[0])
    above = l_arr > knots[-1]
    if np.any(above):
        h = knots[-1] - knots[-2]
        ae, be, ce, de = coeffs[-1]
        f_end = ae + h * (be + h * (ce + h * de))
        slope_end = be + 2.0 * ce * h + 3.0 * de * h * h
        out[above] = f_end + slope_end * (l_arr[above] - knots[-1])

    return float(out[0]) if scalar else out


def trend_objective(trend: CrossTrackTrend, data) -> float:
    """Value of (1-p)*RSS + p*roughness for a fitted trend on data."""
    l, z = _as_arrays(data)
    rss = float(np.sum((z - eval_trend(trend, l)) ** 2))
    h = np.diff(trend.knots)
    # f'' is linear on each interval: 2c at the left end, 2c + 6dh at the
    # right end; integral of its square is h/3 * (y0^2 + y0*y1 + y1^2).
    y0 = 2.0 * trend.coeffs[:, 2]
    y1 = y0 + 6.0 * trend.coeffs[:, 3] * h
    rough = float(np.sum(h / 3.0 * (y0**2 + y0 * y1 + y1**2)))
    return (1.0 - trend.p) * rss + trend.p * rough


def default_p_grid(num: int = 25) -> np.ndarray:
    """Candidate smoothing parameters p = s/(1+s), s log-spaced 1e-6..1e6."""
    s = np.logspace(-6.0, 6.0, num)
    return s / (1.0 + s)


@dataclass
class LoocvResult:
    """Selected smoothing parameter and the full CV curve."""

    p: float
    grid: np.ndarray
    cv: np.ndarray


def select_p_loocv(data, grid=None) -> LoocvResult:
    """Pick the smoothing parameter minimizing leave-one-out CV error.

    Each sample is literally held out and the spline refit on the rest;
    the CV score of a candidate p is the sum of squared held-out
    prediction errors.  Ties (within 1e-12 relative) break toward the
    largest p, i.e. the smoothest of the equally good fits.
    """
    data = list(data)
    if len(data) < 3:
        raise TrendFitError("LOOCV needs at least 3 samples")
    l, _ = _as_arrays(data)
    if np.unique(l).size < 3:
        raise TrendFitError("LOOCV needs at least 3 distinct cross-track "
                            "distances")
    grid = default_p_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise TrendFitError("empty candidate grid")

    cv = np.zeros(grid.size)
    folds = [(data[:k] + data[k + 1:], data[k]) for k in range(len(data))]
    for gi, p in enumerate(grid):
        err = 0.0
        for rest, held in folds:
            f = fit_smoothing_spline(rest, p)
            err += (held.z - eval_trend(f, held.l)) ** 2
        cv[gi] = err

    cv_min = float(np.min(cv))
    tol = 1e-12 * (1.0 + cv_min)
    tied = np.flatnonzero(cv <= cv_min + tol)
    best = tied[np.argmax(grid[tied])]
    return LoocvResult(p=float(grid[best]), grid=grid, cv=cv)


def select_section(track: SurveyTrack, frame: WaterwayFrame,
                   s_min: float, s_max: float) -> SurveyTrack:
    """Samples whose along-track coordinate lies in [s_min, s_max].

    Used to cut the cross-track survey region out of a full route before
    building deviation samples.
    """
    s, _ = local_coords(frame, track.pos)
    keep = np.flatnonzero((s >= s_min) & (s <= s_max))
    if keep.size == 0:
        raise ValueError(f"no samples with along-track s in "
                         f"[{s_min}, {s_max}]")
    return track.subset(keep)


def make_deviations(track: SurveyTrack, frame: WaterwayFrame, tx: str,
                    center_band: float = 5.0
                    ) -> tuple[list[DeviationSample], float]:
    """Cross-track ASF deviations relative to the centerline ASF.

    The center reference is the median ASF over samples with
    |l| <= center_band.  Returns the deviation samples and the center
    value so it can be re-attached after trend fitting.
    """
    if center_band <= 0:
        raise ValueError("center_band must be positive")
    j = track.tx_index(tx)
    _, l = local_coords(frame, track.pos)
    asf = track.asf[:, j]
    central = np.abs(l) <= center_band
    if not np.any(central):
        raise CenterBandError(
            f"no samples within {center_band} m of the centerline; "
            "widen the band")
    center = float(np.median(asf[central]))
    return ([DeviationSample(l=float(li), z=float(ai - center))
             for li, ai in zip(l, asf)], center)


def center_trend(trend: CrossTrackTrend, asf_center: float
                 ) -> tuple[CrossTrackTrend, float]:
    """Normalize so the trend is zero at the centerline.

    The value at l = 0 is moved from the trend into the returned center
    ASF, making the detrended mean interpretable as the centerline level.
    """
    c0 = eval_trend(trend, 0.0)
    return trend.shifted(-c0), asf_center + c0


def fit_cross_track_trend(section: SurveyTrack, frame: WaterwayFrame, tx: str,
                          center_band: float = 5.0, grid=None
                          ) -> tuple[CrossTrackTrend, float, LoocvResult]:
    """Full trend pipeline for one transmitter on a cross-track section.

    Builds deviation samples, selects p by LOOCV, fits, and normalizes the
    trend to zero at the centerline.  Returns (trend, asf_center, loocv).
    """
    devs, center = make_deviations(section, frame, tx, center_band)
    sel = select_p_loocv(devs, grid)
    trend = fit_smoothing_spline(devs, sel.p)
    trend, center = center_trend(trend, center)
    return trend, center, sel


def save_trend(trend: CrossTrackTrend, path) -> None:
    """Write a trend as a round-trippable knot/coefficient table."""
    lines = ["# cross-track ASF trend: piecewise cubic in cross-track meters",
             f"p {trend.p!r}",
             f"knots {trend.knots.size}"]
    lines += [repr(float(k)) for k in trend.knots]
    lines.append("coeffs")
    lines += [" ".join(repr(float(v)) for v in row) for row in trend.coeffs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trend(path) -> CrossTrackTrend:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("p "):
        raise TrendFitError(f"{path}: not a trend file")
    p = float(lines[0].split()[1])
    nknots = int(lines[1].split()[1])
    knots = np.array([float(ln) for ln in lines[2:2 + nknots]])
    if lines[2 + nknots] != "coeffs":
        raise TrendFitError(f"{path}: missing coeffs section")
    coeffs = np.array([[float(v) for v in ln.split()]
                       for ln in lines[3 + nknots:3 + nknots + nknots - 1]])
    return CrossTrackTrend(knots=knots, coeffs=coeffs, p=p)

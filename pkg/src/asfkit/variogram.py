"""Empirical semivariance estimation and parametric variogram models.

The empirical variogram uses the classical Matheron estimator: half the
mean squared value difference over point pairs binned by separation.
Model fitting is weighted least squares with pair counts as weights.
The paper-side default is an exponential model with nugget; spherical
and gaussian forms are provided for completeness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist, pdist

MODEL_KINDS = ("exponential", "spherical", "gaussian")


class VariogramError(ValueError):
    """Empirical variogram cannot be formed from the given points."""


@dataclass(frozen=True)
class VariogramModel:
    """Isotropic semivariance model: gamma(0) = 0, gamma(h>0) climbs from
    the nugget toward nugget + partial_sill with correlation length range_m."""

    kind: str
    nugget: float
    partial_sill: float
    range_m: float

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown variogram kind {self.kind!r}")
        if self.nugget < 0 or self.partial_sill < 0 or self.range_m <= 0:
            raise ValueError("variogram parameters violate "
                             "nugget >= 0, partial_sill >= 0, range > 0")

    def gamma_h(self, h):
        """Semivariance at separation h (scalar or array), us^2."""
        h = np.asarray(h, dtype=float)
        c0, c1, a = self.nugget, self.partial_sill, self.range_m
        if self.kind == "exponential":
            g = c0 + c1 * (1.0 - np.exp(-h / a))
        elif self.kind == "gaussian":
            g = c0 + c1 * (1.0 - np.exp(-((h / a) ** 2)))
        else:  # spherical
            hr = np.minimum(h / a, 1.0)
            g = c0 + c1 * (1.5 * hr - 0.5 * hr**3)
        return np.where(h == 0.0, 0.0, g)


def gamma(model: VariogramModel, xa, xb) -> float:
    """Semivariance between two positions; exactly 0 at zero separation."""
    h = float(np.hypot(xa[0] - xb[0], xa[1] - xb[1]))
    return float(model.gamma_h(h))


def semivariance_matrix(model: VariogramModel, a, b) -> np.ndarray:
    """gamma evaluated between every point of a and every point of b."""
    return model.gamma_h(cdist(np.atleast_2d(a), np.atleast_2d(b)))


@dataclass
class EmpiricalVariogram:
    """Binned Matheron estimate: lag centers, semivariances, pair counts."""

    lags: np.ndarray
    semivariance: np.ndarray
    counts: np.ndarray


def empirical_variogram(points, values, bin_width: float,
                        max_lag: float) -> EmpiricalVariogram:
    """Matheron semivariance estimate over distance bins.

    Bins are [i*bin_width, (i+1)*bin_width) up to max_lag, reported at
    their centers; empty bins are dropped.
    """
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if pts.shape[0] < 2:
        raise VariogramError("need at least 2 points")
    if bin_width <= 0:
        raise VariogramError("bin_width must be positive")

    d = pdist(pts)
    sq = pdist(vals[:, None], metric="sqeuclidean")
    within = d <= max_lag
    if not np.any(within):
        raise VariogramError(f"all point pairs farther apart than "
                             f"max_lag={max_lag}")
    d, sq = d[within], sq[within]

    which = np.minimum((d / bin_width).astype(int),
                       int(np.ceil(max_lag / bin_width)) - 1)
    nbins = which.max() + 1
    counts = np.bincount(which, minlength=nbins)
    sums = np.bincount(which, weights=sq, minlength=nbins)
    occupied = counts > 0
    centers = (np.arange(nbins) + 0.5) * bin_width
    return EmpiricalVariogram(
        lags=centers[occupied],
        semivariance=sums[occupied] / (2.0 * counts[occupied]),
        counts=counts[occupied])


@dataclass
class VariogramFit:
    """Fitted model, its weighted residual norm, and a degeneracy flag."""

    model: VariogramModel
    residual_norm: float
    degenerate: bool = False


def _wls_norm(kind, params, emp) -> float:
    c0, c1, a = params
    m = VariogramModel(kind=kind, nugget=max(c0, 0.0),
                       partial_sill=max(c1, 0.0), range_m=max(a, 1e-12))
    r = np.sqrt(emp.counts) * (m.gamma_h(emp.lags) - emp.semivariance)
    return float(np.sqrt(np.sum(r**2)))


def fit_model(emp: EmpiricalVariogram, kind: str = "exponential"
              ) -> VariogramFit:
    """Weighted least-squares fit of a parametric model to binned data.

    Weights are the pair counts.  Parameters are constrained to
    nugget >= 0, partial_sill >= 0, range > 0.  All-zero semivariances
    short-circuit to a flagged degenerate zero model.
    """
    if emp.lags.size < 3:
        raise VariogramError("need at least 3 occupied lag bins to fit")
    if np.all(emp.semivariance == 0.0):
        bin_width = 2.0 * emp.lags[0]
        return VariogramFit(
            model=VariogramModel(kind=kind, nugget=0.0, partial_sill=0.0,
                                 range_m=bin_width),
            residual_norm=0.0, degenerate=True)

    sill0 = float(np.mean(emp.semivariance[-max(1, emp.lags.size // 3):]))
    c0_0 = max(float(emp.semivariance[0]) * 0.5, 0.0)
    c1_0 = max(sill0 - c0_0, 1e-6 * max(sill0, 1e-30))
    # First lag where the estimate reaches ~63% of the sill guess.
    reach = emp.semivariance >= c0_0 + 0.632 * c1_0
    a0 = float(emp.lags[np.argmax(reach)]) if np.any(reach) \
        else float(emp.lags[-1]) / 2.0
    a0 = max(a0, float(emp.lags[0]) * 0.5)
    x0 = np.array([c0_0, c1_0, a0])

    sw = np.sqrt(emp.counts.astype(float))

    def residuals(x):
        m = VariogramModel(kind=kind, nugget=x[0], partial_sill=x[1],
                           range_m=x[2])
        return sw * (m.gamma_h(emp.lags) - emp.semivariance)

    # Parameters beyond the observed lag span are unidentifiable and make
    # the kriging systems wild, so the range is capped at the last lag and
    # the sill at a few times the largest estimate.
    sv_max = float(np.max(emp.semivariance))
    upper = [2.0 * sv_max, 4.0 * sv_max, float(emp.lags[-1])]
    x0 = np.minimum(x0, upper)
    sol = least_squares(residuals, x0,
                        bounds=([0.0, 0.0, 1e-9], upper))
    fitted = VariogramModel(kind=kind, nugget=float(sol.x[0]),
                            partial_sill=float(sol.x[1]),
                            range_m=float(sol.x[2]))
    norm = float(np.sqrt(np.sum(sol.fun**2)))
    # least_squares never climbs above its start, but guard anyway.
    if norm > _wls_norm(kind, x0, emp):
        fitted = VariogramModel(kind=kind, nugget=float(x0[0]),
                                partial_sill=float(x0[1]),
                                range_m=float(x0[2]))
        norm = _wls_norm(kind, x0, emp)
    return VariogramFit(model=fitted, residual_norm=norm)


def variogram_report(emp: EmpiricalVariogram, fit: VariogramFit) -> str:
    """Plain-text bin table plus fitted parameters, for plotting."""
    lines = ["# lag_m semivariance_us2 pairs"]
    lines += [f"{lag:.3f} {sv:.9g} {int(n)}"
              for lag, sv, n in zip(emp.lags, emp.semivariance, emp.counts)]
    m = fit.model
    lines.append(f"# fit kind={m.kind} nugget={m.nugget:.9g} "
                 f"partial_sill={m.partial_sill:.9g} range={m.range_m:.9g} "
                 f"residual_norm={fit.residual_norm:.9g} "
                 f"degenerate={int(fit.degenerate)}")
    return "\n".join(lines) + "\n"

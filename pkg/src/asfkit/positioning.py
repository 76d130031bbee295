"""TOA positioning with ASF map corrections and accuracy scoring.

The measurement model for transmitter n at position x with receiver
clock bias b (microseconds) is

    toa_n = |x - x_n| / c + asf_n(x) + b,      c = 299.792458 m/us.

Fixes are solved by Gauss-Newton on (x, b).  The ASF map term is
re-evaluated every iteration but its spatial gradient is left out of the
Jacobian: the ranges dominate and the bilinear correction varies slowly
at the 100-m grid scale.  At least three UTC-synchronized transmitters
are required for a 2-D fix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mapgen import AsfMap, lookup_asf
from .survey import SurveyTrack

SPEED_M_PER_US = 299.792458

STEP_TOL_M = 1e-4
MAX_ITERATIONS = 25
DIVERGENCE_STREAK = 5
GEOMETRY_COND_LIMIT = 1e6


class PositioningError(ValueError):
    """Fix cannot be attempted (too few usable transmitters)."""


@dataclass(frozen=True)
class Transmitter:
    """UTC-synchronized transmitter at a fixed east/north position."""

    id: str
    pos: tuple[float, float]


@dataclass
class PositionFix:
    """Solved 2-D position, clock bias and solver diagnostics."""

    pos: np.ndarray
    clock_bias: float
    residuals: dict[str, float]
    iterations: int
    converged: bool
    condition: float
    poor_geometry: bool


def solve_fix(toas: dict[str, float], txs, maps: dict[str, AsfMap] | None,
              initial, *, step_tol_m: float = STEP_TOL_M,
              max_iterations: int = MAX_ITERATIONS) -> PositionFix:
    """Gauss-Newton position fix from per-transmitter TOAs.

    Parameters
    ----------
    toas : transmitter id -> time of arrival, us.
    txs : iterable of Transmitter.
    maps : transmitter id -> AsfMap.  Transmitters without a map entry
        are excluded; pass None to solve with no ASF correction at all.
    initial : starting position guess (east/north m).

    Convergence: step norm (clock-bias component scaled by c to meters)
    below ``step_tol_m``.  Five consecutive growing steps flag the fix
    as diverged.  A Jacobian condition estimate above 1e6 sets the
    ``poor_geometry`` warning flag.
    """
    by_id = {tx.id: tx for tx in txs}
    usable = [tid for tid in toas
              if tid in by_id and (maps is None or tid in maps)]
    if len(usable) < 3:
        raise PositioningError(
            f"2-D positioning needs >= 3 transmitters with TOA and map "
            f"coverage, have {len(usable)}")

    tx_pos = np.array([by_id[tid].pos for tid in usable])
    toa = np.array([toas[tid] for tid in usable])

    def asf_at(p):
        if maps is None:
            return np.zeros(len(usable))
        return np.array([lookup_asf(maps[tid], p, clamp=True)
                         for tid in usable])

    x = np.asarray(initial, dtype=float).copy()
    b = 0.0
    converged = False
    worst_cond = 0.0
    iterations = 0
    asf = asf_at(x)

    # The ASF correction is held fixed while Gauss-Newton solves the pure
    # ranging problem, then re-evaluated at the solution; that outer fixed
    # point contracts because the (masked, bilinear) correction varies
    # slowly, whereas re-looking-up inside every ranging step can ping-pong
    # across cells where the correction changes.
    while iterations < max_iterations and not converged:
        x_round = x.copy()
        prev_step = math.inf
        growth = 0
        inner_done = False
        while iterations < max_iterations and not inner_done:
            iterations += 1
            delta = x - tx_pos
            ranges = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), 1e-9)
            res = toa - ranges / SPEED_M_PER_US - asf - b
            jac = np.column_stack([delta / (SPEED_M_PER_US * ranges[:, None]),
                                   np.ones(len(usable))])
            worst_cond = max(worst_cond, float(np.linalg.cond(jac)))
            step, *_ = np.linalg.lstsq(jac, res, rcond=None)
            x += step[:2]
            b += step[2]
            step_norm = math.hypot(step[0], step[1],
                                   step[2] * SPEED_M_PER_US)
            if step_norm < step_tol_m:
                inner_done = True
            elif step_norm > prev_step:
                growth += 1
                if growth >= DIVERGENCE_STREAK:
                    break
            else:
                growth = 0
            prev_step = step_norm

        if not inner_done:
            break
        new_asf = asf_at(x)
        moved = math.hypot(x[0] - x_round[0], x[1] - x_round[1])
        if np.max(np.abs(new_asf - asf)) * SPEED_M_PER_US < step_tol_m \
                or moved < step_tol_m:
            converged = True
        asf = new_asf

    delta = x - tx_pos
    ranges = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), 1e-9)
    final_res = toa - ranges / SPEED_M_PER_US - asf_at(x) - b

    return PositionFix(pos=x, clock_bias=float(b),
                       residuals={tid: float(r)
                                  for tid, r in zip(usable, final_res)},
                       iterations=iterations, converged=converged,
                       condition=worst_cond,
                       poor_geometry=worst_cond > GEOMETRY_COND_LIMIT)


def fix_cost_and_gradient(toas: dict[str, float], txs,
                          maps: dict[str, AsfMap] | None, x, b
                          ) -> tuple[float, np.ndarray]:
    """Sum-of-squares cost and its Gauss-Newton gradient at (x, b).

    The gradient uses the same range-only Jacobian as the solver;
    exposed for convergence verification against finite differences.
    """
    by_id = {tx.id: tx for tx in txs}
    usable = [tid for tid in toas
              if tid in by_id and (maps is None or tid in maps)]
    tx_pos = np.array([by_id[tid].pos for tid in usable])
    toa = np.array([toas[tid] for tid in usable])
    x = np.asarray(x, dtype=float)
    delta = x - tx_pos
    ranges = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), 1e-9)
    asf = np.zeros(len(usable)) if maps is None else np.array(
        [lookup_asf(maps[tid], x, clamp=True) for tid in usable])
    res = toa - ranges / SPEED_M_PER_US - asf - b
    jac = np.column_stack([delta / (SPEED_M_PER_US * ranges[:, None]),
                           np.ones(len(usable))])
    return float(res @ res), -2.0 * (jac.T @ res)


@dataclass
class MethodAccuracy:
    """Accuracy summary for one map-generation method."""

    method: str
    rms_m: float
    p95_m: float
    count: int
    errors_m: np.ndarray


@dataclass
class EpochRecord:
    """One evaluation epoch: truth plus the per-method fixes."""

    route: str
    t: float
    truth: tuple[float, float]
    fixes: dict[str, tuple[float, float]]
    errors: dict[str, float]


@dataclass
class AccuracyReport:
    """Per-method accuracy over the evaluation routes."""

    methods: dict[str, MethodAccuracy]
    epochs: list[EpochRecord] = field(default_factory=list)

    def summary(self) -> str:
        lines = ["method        rms_m    p95_m    epochs"]
        for name, acc in self.methods.items():
            lines.append(f"{name:<12} {acc.rms_m:8.3f} {acc.p95_m:8.3f} "
                         f"{acc.count:9d}")
        return "\n".join(lines) + "\n"

    def epochs_csv(self) -> str:
        methods = list(self.methods)
        cols = ["route", "t_sec", "truth_east_m", "truth_north_m"]
        for m in methods:
            cols += [f"{m}_east_m", f"{m}_north_m", f"{m}_error_m"]
        lines = [",".join(cols)]
        for ep in self.epochs:
            row = [ep.route, repr(ep.t), repr(ep.truth[0]), repr(ep.truth[1])]
            for m in methods:
                fx = ep.fixes[m]
                row += [repr(fx[0]), repr(fx[1]), repr(ep.errors[m])]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def evaluate_routes(tracks, txs, maps_by_method: dict[str, dict[str, AsfMap]]
                    ) -> AccuracyReport:
    """Score positioning accuracy of each map set along held-out routes.

    Ground truth comes from the tracks' recorded positions.  Every epoch
    first acquires an uncorrected range-only fix from the transmitter
    centroid (the common-mode ASF goes into the clock estimate, so it
    lands within the differential-ASF error of the truth), and each
    method's corrected solve is seeded from that acquisition.  With only
    three transmitters the corrected problem has no redundancy, so a
    warm-start chain can lock a whole route into a false but
    self-consistent ASF-feedback basin; per-epoch acquisition keeps every
    epoch independent.  RMS is accumulated streaming; the per-epoch error
    series is kept for the report CSV.
    """
    tracks = list(tracks)
    if not tracks or all(len(tr) == 0 for tr in tracks):
        raise PositioningError("empty evaluation set")
    methods = list(maps_by_method)
    centroid = np.mean([tx.pos for tx in txs], axis=0)

    sumsq = {m: 0.0 for m in methods}
    errors = {m: [] for m in methods}
    epochs: list[EpochRecord] = []

    for track in tracks:
        acquired: np.ndarray | None = None
        for i in range(len(track)):
            toas = {tx: float(track.toa[i, j])
                    for j, tx in enumerate(track.tx_ids)}
            truth = track.pos[i]
            fixes = {}
            errs = {}
            acq = solve_fix(toas, txs, None,
                            acquired if acquired is not None else centroid)
            if acq.converged:
                acquired = acq.pos
            for m in methods:
                fix = solve_fix(toas, txs, maps_by_method[m], acq.pos)
                err = float(np.hypot(fix.pos[0] - truth[0],
                                     fix.pos[1] - truth[1]))
                fixes[m] = (float(fix.pos[0]), float(fix.pos[1]))
                errs[m] = err
                sumsq[m] += err * err
                errors[m].append(err)
            epochs.append(EpochRecord(route=track.label, t=float(track.t[i]),
                                      truth=(float(truth[0]), float(truth[1])),
                                      fixes=fixes, errors=errs))

    out = {}
    for m in methods:
        errs = np.asarray(errors[m])
        out[m] = MethodAccuracy(method=m,
                                rms_m=math.sqrt(sumsq[m] / errs.size),
                                p95_m=float(np.percentile(errs, 95.0)),
                                count=int(errs.size), errors_m=errs)
    return AccuracyReport(methods=out, epochs=epochs)

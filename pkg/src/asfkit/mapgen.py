"""Gridded ASF map assembly and lookup.

Maps are axis-aligned to the waterway frame: row index runs along the
track, column index across it, so the cross-track distance is constant
per column and the cross-track trend applies column-wise.  Three
builders produce the same grid from one survey: Delaunay/barycentric
linear interpolation (the conventional baseline), universal kriging and
regression kriging.

Map file format (text, one value row per grid row, 9 significant
digits; cross-track distance is positive to port of the along-track
heading)::

    tx <id>
    method <linear|uk|rk|truth>
    origin_east_m <...>   origin_north_m <...>
    heading_deg <...>     spacing_m <...>
    rows <r>              cols <c>
    values                <r rows of c numbers>
    mask                  <r rows of c 0/1 flags>
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .geometry import WaterwayFrame, global_coords, local_coords, to_global, LocalCoord
from .kriging import (DetrendedSurvey, ResidualKriging, UniversalKriging,
                      merge_coincident)
from .survey import SurveyTrack
from .trend import eval_trend
from .variogram import VariogramModel

MAP_METHODS = ("linear", "uk", "rk", "truth")


class MapBuildError(ValueError):
    """Map cannot be built from the given survey."""


class MapLookupError(ValueError):
    """Position outside the map (beyond the one-cell clamp margin)."""


@dataclass(frozen=True)
class GridSpec:
    """Map grid in waterway-frame coordinates.

    Node (i, j) sits at along-track s0 + i*spacing and cross-track
    l0 + j*spacing.
    """

    frame: WaterwayFrame
    s0: float
    l0: float
    rows: int
    cols: int
    spacing: float = 100.0

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.rows < 2 or self.cols < 2:
            raise ValueError("grid needs at least 2 rows and 2 cols")

    def node_locals(self) -> tuple[np.ndarray, np.ndarray]:
        """(s_i, l_j) axis coordinates."""
        return (self.s0 + self.spacing * np.arange(self.rows),
                self.l0 + self.spacing * np.arange(self.cols))

    def node_positions(self) -> np.ndarray:
        """All node positions, row-major, shape (rows*cols, 2)."""
        s, l = self.node_locals()
        ss, ll = np.meshgrid(s, l, indexing="ij")
        return global_coords(self.frame, ss.ravel(), ll.ravel())


@dataclass
class AsfMap:
    """Per-transmitter grid of ASF corrections.

    ``mask[i, j]`` is True for interpolated nodes and False where the
    value was filled by extrapolation (linear maps only; kriged and
    truth maps are valid everywhere).
    """

    tx: str
    origin: tuple[float, float]
    heading_deg: float
    spacing: float
    values: np.ndarray
    mask: np.ndarray
    method: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.method not in MAP_METHODS:
            raise ValueError(f"unknown map method {self.method!r}")
        if self.values.shape != self.mask.shape:
            raise ValueError("values and mask shapes differ")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("non-finite value at an unmasked node")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def frame(self) -> WaterwayFrame:
        """Frame whose origin is grid node (0, 0)."""
        return WaterwayFrame.from_heading(self.origin, self.heading_deg)


def _map_from_grid(grid: GridSpec, tx: str, values, mask, method) -> AsfMap:
    origin = to_global(grid.frame, LocalCoord(s=grid.s0, l=grid.l0))
    return AsfMap(tx=tx, origin=(float(origin[0]), float(origin[1])),
                  heading_deg=grid.frame.heading_deg, spacing=grid.spacing,
                  values=values, mask=mask, method=method)


class LinearInterpolator:
    """Delaunay/barycentric interpolation with nearest-point fill outside
    the survey hull.  Inside-hull queries reproduce planar fields."""

    def __init__(self, points, values):
        pts, vals = merge_coincident(points, values)
        if pts.shape[0] < 3:
            raise MapBuildError("linear interpolation needs >= 3 distinct "
                                "survey points")
        try:
            self.tri = Delaunay(pts)
        except QhullError as exc:
            raise MapBuildError(
                "survey points do not triangulate (collinear layout?); "
                f"qhull says: {str(exc).splitlines()[0]}") from exc
        self.values = vals
        self.kdtree = cKDTree(pts)

    def __call__(self, targets) -> tuple[np.ndarray, np.ndarray]:
        """(values, inside_hull) at the target positions."""
        t = np.atleast_2d(np.asarray(targets, dtype=float))
        simplex = self.tri.find_simplex(t)
        inside = simplex >= 0
        out = np.empty(t.shape[0])

        if np.any(inside):
            s = simplex[inside]
            bary_t = self.tri.transform[s]
            b = np.einsum("ijk,ik->ij", bary_t[:, :2], t[inside] - bary_t[:, 2])
            weights = np.column_stack([b, 1.0 - b.sum(axis=1)])
            out[inside] = np.sum(
                self.values[self.tri.simplices[s]] * weights, axis=1)
        if np.any(~inside):
            _, nearest = self.kdtree.query(t[~inside])
            out[~inside] = self.values[nearest]
        return out, inside


def build_map_linear(track: SurveyTrack, grid: GridSpec, tx: str) -> AsfMap:
    """Baseline map: barycentric interpolation of the raw (filtered) ASF."""
    interp = LinearInterpolator(track.pos, track.asf[:, track.tx_index(tx)])
    vals, inside = interp(grid.node_positions())
    return _map_from_grid(grid, tx,
                          vals.reshape(grid.rows, grid.cols),
                          inside.reshape(grid.rows, grid.cols), "linear")


def _support_mask(survey: DetrendedSurvey, grid: GridSpec) -> np.ndarray:
    """Nodes beyond the surveyed along-track span or cross-track range are
    extrapolations (of the kriging model and of the trend's linear
    continuation past the last knot) and are flagged so lookups do not
    steer by them."""
    s, l = grid.node_locals()
    s_data, _ = local_coords(grid.frame, survey.points)
    margin = 0.5 * grid.spacing
    reach_l = float(np.max(np.abs(survey.l))) + margin
    mask = np.ones((grid.rows, grid.cols), dtype=bool)
    mask[(s < float(np.min(s_data)) - margin)
         | (s > float(np.max(s_data)) + margin), :] = False
    mask[:, np.abs(l) > reach_l] = False
    return mask


def build_map_rk(survey: DetrendedSurvey, model: VariogramModel,
                 grid: GridSpec, tx: str) -> AsfMap:
    """Regression-kriging map: mean + trend + ordinary-kriged residual."""
    rk = ResidualKriging(survey, model)
    _, l = grid.node_locals()
    l_nodes = np.tile(l, grid.rows)
    vals = rk.predict(grid.node_positions(), l_nodes)
    return _map_from_grid(grid, tx, vals.reshape(grid.rows, grid.cols),
                          _support_mask(survey, grid), "rk")


def build_map_uk(survey: DetrendedSurvey, model: VariogramModel,
                 grid: GridSpec, tx: str) -> AsfMap:
    """Universal-kriging map: drift-constrained weighting of raw ASF."""
    uk = UniversalKriging(survey, model)
    _, l = grid.node_locals()
    drift_nodes = eval_trend(survey.trend, np.tile(l, grid.rows))
    vals = uk.predict(grid.node_positions(), drift_nodes)
    return _map_from_grid(grid, tx, vals.reshape(grid.rows, grid.cols),
                          _support_mask(survey, grid), "uk")


def rasterize_field(grid: GridSpec, tx: str, fn) -> AsfMap:
    """Truth map from an analytic field fn(positions) -> values."""
    vals = np.asarray(fn(grid.node_positions()), dtype=float)
    return _map_from_grid(grid, tx, vals.reshape(grid.rows, grid.cols),
                          np.ones((grid.rows, grid.cols), dtype=bool), "truth")


def lookup_asf(asf_map: AsfMap, p, clamp: bool = False) -> float:
    """Bilinear map value at a position.

    Extrapolated (mask-False) corners are dropped and the remaining
    bilinear weights renormalized; if all four corners are extrapolated
    their values are used as-is.  Positions up to one cell outside the
    grid are clamped to the edge; farther out raises
    :class:`MapLookupError` unless ``clamp`` is set (positioning uses
    ``clamp=True`` so iterates far from the waterway still see a finite
    correction).
    """
    frame = asf_map.frame
    d0 = p[0] - frame.origin[0]
    d1 = p[1] - frame.origin[1]
    u = (d0 * frame.along_unit[0] + d1 * frame.along_unit[1]) / asf_map.spacing
    v = (d0 * frame.cross_unit[0] + d1 * frame.cross_unit[1]) / asf_map.spacing

    rows, cols = asf_map.rows, asf_map.cols
    if not clamp:
        margin = 1.0 + 1e-9
        if (u < -margin or u > rows - 1 + margin
                or v < -margin or v > cols - 1 + margin):
            raise MapLookupError(
                f"position {tuple(p)} is {max(-u, u - rows + 1, -v, v - cols + 1):.3g} "
                f"cells outside the {rows}x{cols} map for {asf_map.tx}")
    u = min(max(u, 0.0), rows - 1.0)
    v = min(max(v, 0.0), cols - 1.0)

    i0 = min(int(u), rows - 2)
    j0 = min(int(v), cols - 2)
    fu, fv = u - i0, v - j0
    wts = np.array([(1 - fu) * (1 - fv), (1 - fu) * fv,
                    fu * (1 - fv), fu * fv])
    corners = [(i0, j0), (i0, j0 + 1), (i0 + 1, j0), (i0 + 1, j0 + 1)]
    valid = np.array([asf_map.mask[i, j] for i, j in corners])
    vals = np.array([asf_map.values[i, j] for i, j in corners])

    if np.any(valid) and not np.all(valid):
        wts = np.where(valid, wts, 0.0)
    total = wts.sum()
    if total <= 0.0:
        # Query sits exactly on masked corner(s): fall back to all values.
        wts = np.array([(1 - fu) * (1 - fv), (1 - fu) * fv,
                        fu * (1 - fv), fu * fv])
        total = 1.0
    if not np.all(np.isfinite(vals[wts > 0])):
        raise MapLookupError(f"no finite map values around {tuple(p)}")
    return float(np.dot(wts, vals) / total)


def save_map(asf_map: AsfMap, path) -> None:
    """Write a map file; save -> load -> save is byte-identical."""
    lines = ["# ASF correction map (cross-track positive to port)",
             f"tx {asf_map.tx}",
             f"method {asf_map.method}",
             f"origin_east_m {asf_map.origin[0]!r}",
             f"origin_north_m {asf_map.origin[1]!r}",
             f"heading_deg {asf_map.heading_deg!r}",
             f"spacing_m {asf_map.spacing!r}",
             f"rows {asf_map.rows}",
             f"cols {asf_map.cols}",
             "values"]
    lines += [" ".join(f"{v:.9g}" for v in row) for row in asf_map.values]
    lines.append("mask")
    lines += [" ".join("1" if m else "0" for m in row) for row in asf_map.mask]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_map(path) -> AsfMap:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.startswith("#")]
    head = {}
    i = 0
    while i < len(lines) and lines[i] != "values":
        key, _, val = lines[i].partition(" ")
        head[key] = val
        i += 1
    try:
        rows, cols = int(head["rows"]), int(head["cols"])
        values = np.array([[float(v) for v in lines[i + 1 + r].split()]
                           for r in range(rows)])
        assert lines[i + 1 + rows] == "mask"
        mask = np.array([[tok == "1" for tok in lines[i + 2 + rows + r].split()]
                         for r in range(rows)])
        return AsfMap(tx=head["tx"], method=head["method"],
                      origin=(float(head["origin_east_m"]),
                              float(head["origin_north_m"])),
                      heading_deg=float(head["heading_deg"]),
                      spacing=float(head["spacing_m"]),
                      values=values, mask=mask)
    except (KeyError, AssertionError, IndexError, ValueError) as exc:
        raise MapBuildError(f"{path}: malformed map file: {exc}") from exc

"""Waterway-local coordinate frame and projections.

Global positions are planar east/north meters (a local tangent-plane
projection; geodetic conversion is the caller's job).  The waterway frame
is a single straight axis: an origin on the centerline, a unit vector
pointing along the track and a unit vector across it.  Cross-track
distance is signed, positive on the ``cross_unit`` side (port side of the
along-track direction with the default constructor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Orthonormality tolerance for frame vectors.
UNIT_TOL = 1e-12


class FrameError(ValueError):
    """Frame vectors are not an orthonormal pair."""


@dataclass(frozen=True)
class WaterwayFrame:
    """Straight-axis local frame: origin plus along/cross unit vectors."""

    origin: tuple[float, float]
    along_unit: tuple[float, float]
    cross_unit: tuple[float, float]

    def __post_init__(self):
        a = np.asarray(self.along_unit, dtype=float)
        c = np.asarray(self.cross_unit, dtype=float)
        if abs(a @ a - 1.0) > UNIT_TOL or abs(c @ c - 1.0) > UNIT_TOL:
            raise FrameError("along_unit and cross_unit must have unit length")
        if abs(a @ c) > UNIT_TOL:
            raise FrameError("along_unit and cross_unit must be orthogonal")

    @classmethod
    def from_heading(cls, origin, heading_deg: float) -> "WaterwayFrame":
        """Build a frame from an origin and an along-track heading.

        ``heading_deg`` is measured clockwise from north (the convention
        used in scenario and map files).  The cross axis is the port-side
        normal, i.e. ``along_unit`` rotated 90 degrees counterclockwise.
        """
        h = math.radians(heading_deg)
        along = (math.sin(h), math.cos(h))
        cross = (-along[1], along[0])
        return cls(origin=(float(origin[0]), float(origin[1])),
                   along_unit=along, cross_unit=cross)

    @property
    def heading_deg(self) -> float:
        """Along-track heading, degrees clockwise from north."""
        e, n = self.along_unit
        return math.degrees(math.atan2(e, n))


@dataclass(frozen=True)
class LocalCoord:
    """Along-track / cross-track coordinates (meters)."""

    s: float
    l: float


def to_local(frame: WaterwayFrame, p) -> LocalCoord:
    """Project a global position onto the waterway frame."""
    d0 = p[0] - frame.origin[0]
    d1 = p[1] - frame.origin[1]
    a, c = frame.along_unit, frame.cross_unit
    return LocalCoord(s=d0 * a[0] + d1 * a[1], l=d0 * c[0] + d1 * c[1])


def to_global(frame: WaterwayFrame, c: LocalCoord) -> np.ndarray:
    """Map local (s, l) coordinates back to a global position."""
    a, x = frame.along_unit, frame.cross_unit
    return np.array([frame.origin[0] + c.s * a[0] + c.l * x[0],
                     frame.origin[1] + c.s * a[1] + c.l * x[1]])


def local_coords(frame: WaterwayFrame, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`to_local` for an (N, 2) array of positions.

    Returns
    -------
    (s, l) : pair of (N,) arrays, along-track and cross-track meters.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts - np.asarray(frame.origin, dtype=float)
    return d @ np.asarray(frame.along_unit), d @ np.asarray(frame.cross_unit)


def global_coords(frame: WaterwayFrame, s, l) -> np.ndarray:
    """Vectorized :func:`to_global`; returns an (N, 2) array."""
    s = np.asarray(s, dtype=float)
    l = np.asarray(l, dtype=float)
    a = np.asarray(frame.along_unit)
    c = np.asarray(frame.cross_unit)
    return (np.asarray(frame.origin)
            + np.outer(s, a) + np.outer(l, c))

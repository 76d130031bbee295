"""Survey data model, CSV ingestion and MAD-based outlier removal.

A survey track is stored column-wise (numpy arrays) for speed; the
row-wise :class:`SurveyMeasurement` view is constructed on demand.

CSV schema (header row mandatory, UTF-8, LF)::

    t_sec,east_m,north_m,asf_<txid>_us,...,toa_<txid>_us,...

Transmitter ids are discovered from the header; the asf and toa column
sets must name the same transmitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TrackFormatError(ValueError):
    """Malformed survey file (bad header, bad row, unsorted time)."""


@dataclass(frozen=True)
class SurveyMeasurement:
    """One survey sample: timestamp, true position, per-transmitter ASF/TOA."""

    t: float
    pos: tuple[float, float]
    asf: dict[str, float]
    toa: dict[str, float]


@dataclass
class SurveyTrack:
    """Ordered survey samples along one route.

    Attributes
    ----------
    label : route name (file stem when loaded from disk).
    tx_ids : transmitter ids, in column order.
    t : (N,) seconds, strictly increasing.
    pos : (N, 2) east/north meters (ground truth).
    asf : (N, T) microseconds, one column per transmitter.
    toa : (N, T) microseconds, one column per transmitter.
    """

    label: str
    tx_ids: list[str]
    t: np.ndarray
    pos: np.ndarray
    asf: np.ndarray
    toa: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.pos = np.asarray(self.pos, dtype=float)
        self.asf = np.asarray(self.asf, dtype=float)
        self.toa = np.asarray(self.toa, dtype=float)
        if self.t.size == 0:
            raise TrackFormatError(f"track {self.label!r} is empty")
        if np.any(np.diff(self.t) <= 0):
            bad = int(np.argmax(np.diff(self.t) <= 0)) + 1
            raise TrackFormatError(
                f"track {self.label!r}: timestamps not strictly increasing "
                f"at sample {bad}")
        if not np.all(np.isfinite(self.asf)):
            raise TrackFormatError(f"track {self.label!r}: non-finite ASF value")

    def __len__(self) -> int:
        return self.t.size

    def tx_index(self, tx: str) -> int:
        try:
            return self.tx_ids.index(tx)
        except ValueError:
            raise KeyError(f"track {self.label!r} has no transmitter {tx!r}") from None

    def measurement(self, i: int) -> SurveyMeasurement:
        return SurveyMeasurement(
            t=float(self.t[i]),
            pos=(float(self.pos[i, 0]), float(self.pos[i, 1])),
            asf={tx: float(self.asf[i, j]) for j, tx in enumerate(self.tx_ids)},
            toa={tx: float(self.toa[i, j]) for j, tx in enumerate(self.tx_ids)},
        )

    @property
    def measurements(self):
        """Row-wise view, materialized lazily."""
        return [self.measurement(i) for i in range(len(self))]

    def subset(self, indices) -> "SurveyTrack":
        """New track keeping the given (sorted) sample indices."""
        idx = np.asarray(indices)
        return SurveyTrack(label=self.label, tx_ids=list(self.tx_ids),
                           t=self.t[idx], pos=self.pos[idx],
                           asf=self.asf[idx], toa=self.toa[idx])


def load_track(path) -> SurveyTrack:
    """Read a survey CSV; raises :class:`TrackFormatError` naming the bad line."""
    from pathlib import Path

    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TrackFormatError(f"{path}: empty file")
    header = [tok.strip() for tok in lines[0].split(",")]
    if header[:3] != ["t_sec", "east_m", "north_m"]:
        raise TrackFormatError(f"{path}: line 1: header must start with "
                               "t_sec,east_m,north_m")
    asf_ids = [h[4:-3] for h in header if h.startswith("asf_") and h.endswith("_us")]
    toa_ids = [h[4:-3] for h in header if h.startswith("toa_") and h.endswith("_us")]
    if not asf_ids or asf_ids != toa_ids:
        raise TrackFormatError(f"{path}: line 1: asf_*/toa_* columns must name "
                               "the same transmitters, in the same order")
    ncol = 3 + 2 * len(asf_ids)
    if len(header) != ncol:
        raise TrackFormatError(f"{path}: line 1: expected {ncol} columns, "
                               f"got {len(header)}")

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        toks = line.split(",")
        if len(toks) != ncol:
            raise TrackFormatError(f"{path}: line {lineno}: expected {ncol} "
                                   f"fields, got {len(toks)}")
        try:
            rows.append([float(tok) for tok in toks])
        except ValueError:
            raise TrackFormatError(
                f"{path}: line {lineno}: non-numeric field") from None
    if not rows:
        raise TrackFormatError(f"{path}: no data rows")

    data = np.asarray(rows, dtype=float)
    ntx = len(asf_ids)
    return SurveyTrack(label=path.stem, tx_ids=asf_ids,
                       t=data[:, 0], pos=data[:, 1:3],
                       asf=data[:, 3:3 + ntx], toa=data[:, 3 + ntx:])


def write_track(track: SurveyTrack, path) -> None:
    """Write a survey CSV that reloads to bit-identical values."""
    cols = (["t_sec", "east_m", "north_m"]
            + [f"asf_{tx}_us" for tx in track.tx_ids]
            + [f"toa_{tx}_us" for tx in track.tx_ids])
    out = [",".join(cols)]
    for i in range(len(track)):
        vals = ([track.t[i], track.pos[i, 0], track.pos[i, 1]]
                + list(track.asf[i]) + list(track.toa[i]))
        out.append(",".join(repr(float(v)) for v in vals))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def mad_filter(track: SurveyTrack, window_sec: float = 60.0,
               k: float = 2.0) -> tuple[SurveyTrack, list[int]]:
    """Remove outliers by median absolute deviation over a sliding window.

    For each transmitter and each sample, the median m and
    MAD = median(|x - m|) are taken over all samples within
    ``window_sec / 2`` seconds of it (centered window).  A sample is an
    outlier when |asf - m| > k * MAD for any transmitter; rejection drops
    the whole row so every per-transmitter map is built from the same
    sample set.  MAD is the raw median deviation, no 1.4826 scaling.

    A single-sample window never rejects; an infinite ``k`` keeps
    everything.

    Returns
    -------
    (filtered, rejected) : the surviving track (original order) and the
        list of rejected row indices into the input track.
    """
    if window_sec <= 0:
        raise ValueError("window_sec must be positive")
    if not k > 0:
        raise ValueError("k must be positive")

    n = len(track)
    half = window_sec / 2.0
    lo = np.searchsorted(track.t, track.t - half, side="left")
    hi = np.searchsorted(track.t, track.t + half, side="right")

    reject = np.zeros(n, dtype=bool)
    for j in range(len(track.tx_ids)):
        col = track.asf[:, j]
        for i in range(n):
            if hi[i] - lo[i] < 2:
                continue
            win = col[lo[i]:hi[i]]
            m = np.median(win)
            mad = np.median(np.abs(win - m))
            thr = k * mad
            # inf * 0 -> nan: comparison is False, sample kept.
            if not math.isnan(thr) and abs(col[i] - m) > thr:
                reject[i] = True

    keep = np.flatnonzero(~reject)
    return track.subset(keep), [int(i) for i in np.flatnonzero(reject)]

"""Synthetic narrow-waterway scenarios.

Generates ground-truth ASF fields with strong cross-track structure, a
build survey that adds a cross-track sweep section to a sparse
along-track leg, held-out evaluation routes, measurement noise and
outliers, and rasterized truth maps.  Everything is deterministic given
the scenario seed: the same seed yields byte-identical survey files and
maps.

The truth field for one transmitter is

    offset + amp * shape(l / half_width) + drift * s / 1000 + gp(x)

with shape(u) = tanh(1.4 u) + 0.35 u^2 (smooth, nonlinear, asymmetric,
zero at the centerline) and gp a seeded sum-of-cosines realization of a
gaussian-covariance random field (sill us^2, range m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import WaterwayFrame, global_coords, local_coords
from .mapgen import AsfMap, GridSpec, rasterize_field
from .positioning import SPEED_M_PER_US, Transmitter
from .survey import SurveyTrack

# Number of cosine modes in the spectral field synthesis.
GP_MODES = 384

PROFILE_TANH_GAIN = 1.4
PROFILE_QUAD_GAIN = 0.35

# Saturation of the clipped-sine sweep: the vessel crosses, then runs
# along the bank for a stretch before turning back.  3.0 makes it dwell
# on each bank for just under four fifths of every half period.
SWEEP_SHARPNESS = 3.0


class ScenarioError(ValueError):
    """Scenario configuration is unusable."""


@dataclass(frozen=True)
class TransmitterField:
    """One transmitter and its truth-field parameters."""

    tx: Transmitter
    offset_us: float
    profile_amp_us: float
    drift_us_per_km: float
    gp_sill_us2: float
    gp_range_m: float


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of a synthetic waterway scenario."""

    name: str
    frame: WaterwayFrame
    half_width_m: float
    length_m: float
    fields: tuple[TransmitterField, ...]
    speed_mps: float = 5.0
    sample_rate_hz: float = 1.0
    turn_s_m: float = 600.0          # center of the cross-track survey
    turn_span_m: float = 200.0       # its along-track extent
    cross_sweeps: int = 4            # full-width traverses in the section
    cross_fraction: float = 0.9      # sweep amplitude as fraction of width
    sweep_sharpness: float = SWEEP_SHARPNESS
    wander_m: float = 3.0            # cross-track wander of straight legs
    wander_wavelength_m: float = 400.0
    profile_quad_gain: float = PROFILE_QUAD_GAIN
    noise_sigma_us: float = 0.05
    turn_noise_factor: float = 2.0   # noise multiplier while turning
    meas_drift_sill_us2: float = 0.0  # slow measurement-drift variance
    meas_drift_tau_s: float = 200.0   # its correlation time
    outlier_rate: float = 0.02
    outlier_mag_us: float = 0.5
    clock_bias_us: float = 5.0
    clock_drift_us_per_s: float = 1e-4
    eval_offsets_m: tuple[float, ...] = (-60.0, -30.0, 30.0, 60.0)
    eval_round_trip: bool = False    # evaluation routes run out and back
    grid_spacing_m: float = 100.0
    grid_margin_m: float = 80.0
    seed: int = 1

    def __post_init__(self):
        if self.half_width_m <= 0 or self.length_m <= 0:
            raise ScenarioError("waterway dimensions must be positive")
        if self.sample_rate_hz <= 0 or self.speed_mps <= 0:
            raise ScenarioError("speed and sample rate must be positive")
        if not self.fields:
            raise ScenarioError("scenario needs at least one transmitter")
        if not (0 < self.turn_s_m < self.length_m):
            raise ScenarioError("cross-track survey center outside waterway")

    @property
    def transmitters(self) -> list[Transmitter]:
        return [f.tx for f in self.fields]

    def field_for(self, tx_id: str) -> TransmitterField:
        for f in self.fields:
            if f.tx.id == tx_id:
                return f
        raise KeyError(f"scenario has no transmitter {tx_id!r}")


def cross_profile(amp_us: float, half_width_m: float, l,
                  quad_gain: float = PROFILE_QUAD_GAIN):
    """Cross-track truth profile; zero at l = 0.  The quadratic term
    (quad_gain) skews the banks; zero makes the profile antisymmetric."""
    u = np.asarray(l, dtype=float) / half_width_m
    return amp_us * (np.tanh(PROFILE_TANH_GAIN * u) + quad_gain * u * u)


def profile_asymmetry(amp_us: float) -> float:
    """truth(l=+w) - truth(l=-w) for a drift-free, noise-free field."""
    return 2.0 * amp_us * math.tanh(PROFILE_TANH_GAIN)


class _SpectralField:
    """Seeded sum-of-cosines realization of a gaussian-covariance field.

    Wave vectors are drawn from the spectral measure of
    C(h) = sill * exp(-(h/range)^2), so the ensemble covariance of

        sqrt(2 sill / M) * sum_m cos(k_m . x + phi_m)

    converges to C as the mode count M grows.  Works in any dimension;
    1-D instances model slow drifts over time.
    """

    def __init__(self, sill: float, range_m: float,
                 rng: np.random.Generator, ndim: int = 2):
        self.sill = sill
        self.ndim = ndim
        if sill > 0.0:
            self.k = rng.standard_normal((GP_MODES, ndim)) * (math.sqrt(2.0)
                                                              / range_m)
            self.phase = rng.uniform(0.0, 2.0 * math.pi, GP_MODES)
            self.scale = math.sqrt(2.0 * sill / GP_MODES)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.ndim == 1 else pts[None, :]
        if self.sill <= 0.0:
            return np.zeros(pts.shape[0])
        return self.scale * np.cos(pts @ self.k.T + self.phase).sum(axis=1)


class TruthFieldSet:
    """Per-transmitter analytic truth fields for one scenario."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self._gp = {}
        for i, f in enumerate(cfg.fields):
            rng = np.random.default_rng([cfg.seed, 7041, i])
            self._gp[f.tx.id] = _SpectralField(f.gp_sill_us2, f.gp_range_m,
                                               rng)

    def value(self, tx_id: str, points) -> np.ndarray:
        f = self.cfg.field_for(tx_id)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s, l = local_coords(self.cfg.frame, pts)
        return (f.offset_us
                + cross_profile(f.profile_amp_us, self.cfg.half_width_m, l,
                                self.cfg.profile_quad_gain)
                + f.drift_us_per_km * s / 1000.0
                + self._gp[tx_id](pts))


def truth_asf(cfg: ScenarioConfig, tx_id: str, p) -> float:
    """Truth field at one position (convenience; builds the field set)."""
    return float(TruthFieldSet(cfg).value(tx_id, np.asarray(p)[None, :])[0])


def _sample_path(cfg: ScenarioConfig, offset_l: float, with_cross: bool,
                 wander_phase: float,
                 round_trip: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Constant-speed samples along one route.

    The base path follows the route's cross-track offset; the build route
    additionally turns across the waterway in a sinusoidal sweep pattern
    (``cross_sweeps`` half-period crossings over ``turn_span_m``), which is
    how a vessel actually loops back and forth and lets it dwell near the
    banks.  A small sinusoidal wander keeps straight legs from being
    exactly collinear.  Returns (t, local) with local holding (s, l) rows.
    """
    s = np.arange(0.0, cfg.length_m + 0.5, 1.0)
    l = np.full_like(s, offset_l)
    if with_cross:
        s_in = cfg.turn_s_m - cfg.turn_span_m / 2.0
        s_out = cfg.turn_s_m + cfg.turn_span_m / 2.0
        if s_in < 0.0 or s_out > cfg.length_m:
            raise ScenarioError("cross-track survey section extends past "
                                "the waterway ends")
        sweep_l = cfg.cross_fraction * cfg.half_width_m
        inside = (s >= s_in) & (s <= s_out)
        phase = (math.pi * cfg.cross_sweeps * (s[inside] - s_in)
                 / (s_out - s_in))
        l[inside] += sweep_l * np.clip(cfg.sweep_sharpness * np.sin(phase),
                                       -1.0, 1.0)
    l += cfg.wander_m * np.sin(2.0 * math.pi * s / cfg.wander_wavelength_m
                               + wander_phase)
    if round_trip:
        l_back = np.full_like(s, offset_l) + cfg.wander_m * np.sin(
            2.0 * math.pi * s / cfg.wander_wavelength_m + wander_phase + 2.1)
        s = np.concatenate([s, s[::-1][1:]])
        l = np.concatenate([l, l_back[::-1][1:]])
    if np.any(np.abs(l) > cfg.half_width_m):
        raise ScenarioError("survey path exits the waterway half-width; "
                            "reduce wander, sweep fraction or route offsets")

    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(s), np.diff(l)))])
    n = int(arc[-1] / cfg.speed_mps * cfg.sample_rate_hz) + 1
    t = np.arange(n) / cfg.sample_rate_hz
    want = np.minimum(t * cfg.speed_mps, arc[-1])
    local = np.column_stack([np.interp(want, arc, s), np.interp(want, arc, l)])
    return t, local


@dataclass
class SimulationResult:
    """Tracks (build route first), outlier labels and truth maps."""

    cfg: ScenarioConfig
    tracks: list[SurveyTrack]
    outlier_rows: list[list[int]]
    truth_maps: dict[str, AsfMap]

    @property
    def build_track(self) -> SurveyTrack:
        return self.tracks[0]

    @property
    def eval_tracks(self) -> list[SurveyTrack]:
        return self.tracks[1:]


def _synth_track(cfg: ScenarioConfig, fields: TruthFieldSet, label: str,
                 route_index: int, offset_l: float, with_cross: bool,
                 round_trip: bool = False) -> tuple[SurveyTrack, list[int]]:
    rng = np.random.default_rng([cfg.seed, 1187, route_index])
    wander_phase = rng.uniform(0.0, 2.0 * math.pi)
    t, local = _sample_path(cfg, offset_l, with_cross, wander_phase,
                            round_trip)
    pos = global_coords(cfg.frame, local[:, 0], local[:, 1])
    n = len(t)
    ntx = len(cfg.fields)

    truth = np.column_stack([fields.value(f.tx.id, pos) for f in cfg.fields])
    # Turning (the cross-track sweep) shakes the small survey vessel, so
    # samples taken inside the sweep section carry inflated noise.
    sigma = np.full(n, cfg.noise_sigma_us)
    if with_cross:
        s_in = cfg.turn_s_m - cfg.turn_span_m / 2.0
        s_out = cfg.turn_s_m + cfg.turn_span_m / 2.0
        turning = (local[:, 0] >= s_in) & (local[:, 0] <= s_out)
        sigma[turning] *= cfg.turn_noise_factor
    noise = rng.standard_normal((n, ntx)) * sigma[:, None]
    # Slowly varying per-station measurement drift (receiver and
    # environment state changing over the course of the survey).  The
    # session mean is removed, as a survey tied to a reference level
    # would do; what remains is the within-survey wander.
    drift = np.zeros((n, ntx))
    if cfg.meas_drift_sill_us2 > 0.0:
        for j in range(ntx):
            proc = _SpectralField(cfg.meas_drift_sill_us2,
                                  cfg.meas_drift_tau_s,
                                  np.random.default_rng(
                                      [cfg.seed, 2953, route_index, j]),
                                  ndim=1)
            drift[:, j] = proc(t)
        drift -= drift.mean(axis=0)
    is_outlier = rng.random((n, ntx)) < cfg.outlier_rate
    signs = np.where(rng.random((n, ntx)) < 0.5, -1.0, 1.0)

    asf = truth + noise + drift
    asf = np.where(is_outlier, truth + drift + signs * cfg.outlier_mag_us, asf)

    tx_pos = np.array([f.tx.pos for f in cfg.fields])
    dx = pos[:, None, :] - tx_pos[None, :, :]
    ranges = np.hypot(dx[..., 0], dx[..., 1])
    clock = cfg.clock_bias_us + cfg.clock_drift_us_per_s * t
    toa = ranges / SPEED_M_PER_US + asf + clock[:, None]

    track = SurveyTrack(label=label, tx_ids=[f.tx.id for f in cfg.fields],
                        t=t, pos=pos, asf=asf, toa=toa)
    rows = sorted(int(i) for i in np.flatnonzero(is_outlier.any(axis=1)))
    return track, rows


def scenario_grid(cfg: ScenarioConfig) -> GridSpec:
    """Map grid covering the waterway plus the configured margin, with a
    column exactly on the centerline."""
    sp = cfg.grid_spacing_m
    i0 = math.ceil(cfg.grid_margin_m / sp)
    rows = i0 + math.ceil((cfg.length_m + cfg.grid_margin_m) / sp) + 1
    jh = math.ceil((cfg.half_width_m + cfg.grid_margin_m) / sp)
    return GridSpec(frame=cfg.frame, s0=-i0 * sp, l0=-jh * sp,
                    rows=rows, cols=2 * jh + 1, spacing=sp)


def simulate(cfg: ScenarioConfig) -> SimulationResult:
    """Generate the build route, evaluation routes and truth maps."""
    fields = TruthFieldSet(cfg)
    tracks = []
    outlier_rows = []
    track, rows = _synth_track(cfg, fields, "route1", 0, 0.0, True)
    tracks.append(track)
    outlier_rows.append(rows)
    for i, off in enumerate(cfg.eval_offsets_m, start=2):
        track, rows = _synth_track(cfg, fields, f"route{i}", i - 1, off, False,
                                   round_trip=cfg.eval_round_trip)
        tracks.append(track)
        outlier_rows.append(rows)

    grid = scenario_grid(cfg)
    truth_maps = {f.tx.id: rasterize_field(grid, f.tx.id,
                                           lambda p, t=f.tx.id: fields.value(t, p))
                  for f in cfg.fields}
    return SimulationResult(cfg=cfg, tracks=tracks, outlier_rows=outlier_rows,
                            truth_maps=truth_maps)


def without_cross_leg(track: SurveyTrack, cfg: ScenarioConfig) -> SurveyTrack:
    """Drop the cross-track sweep samples, keeping the along-track leg.

    Models the conventional survey that never turns across the waterway:
    samples farther from the centerline than the wander envelope go.
    """
    _, l = local_coords(cfg.frame, track.pos)
    keep = np.flatnonzero(np.abs(l) <= cfg.wander_m + 1e-9)
    out = track.subset(keep)
    return SurveyTrack(label=f"{track.label}-nocross", tx_ids=out.tx_ids,
                       t=out.t, pos=out.pos, asf=out.asf, toa=out.toa)


# -- scenario config files ------------------------------------------------

_SCALARS = {
    "half_width_m": float, "length_m": float, "speed_mps": float,
    "sample_rate_hz": float, "turn_s_m": float, "turn_span_m": float,
    "cross_sweeps": int, "cross_fraction": float,
    "sweep_sharpness": float, "wander_m": float,
    "wander_wavelength_m": float, "profile_quad_gain": float,
    "noise_sigma_us": float,
    "turn_noise_factor": float, "meas_drift_sill_us2": float,
    "meas_drift_tau_s": float,
    "outlier_rate": float, "outlier_mag_us": float, "clock_bias_us": float,
    "clock_drift_us_per_s": float, "grid_spacing_m": float,
    "grid_margin_m": float, "seed": int,
    "eval_round_trip": lambda v: bool(int(v)),
}


def save_scenario(cfg: ScenarioConfig, path) -> None:
    """Write the human-editable key-value scenario file."""
    lines = [f"# scenario {cfg.name}",
             f"name {cfg.name}",
             f"frame_origin_east_m {cfg.frame.origin[0]!r}",
             f"frame_origin_north_m {cfg.frame.origin[1]!r}",
             f"frame_heading_deg {cfg.frame.heading_deg!r}"]
    for key in _SCALARS:
        val = getattr(cfg, key)
        lines.append(f"{key} {int(val) if isinstance(val, bool) else val!r}")
    lines.append("eval_offsets_m " + " ".join(repr(v)
                                              for v in cfg.eval_offsets_m))
    lines.append("# tx <id> <east_m> <north_m> <offset_us> <profile_amp_us>"
                 " <drift_us_per_km> <gp_sill_us2> <gp_range_m>")
    for f in cfg.fields:
        lines.append(f"tx {f.tx.id} {f.tx.pos[0]!r} {f.tx.pos[1]!r} "
                     f"{f.offset_us!r} {f.profile_amp_us!r} "
                     f"{f.drift_us_per_km!r} {f.gp_sill_us2!r} "
                     f"{f.gp_range_m!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_scenario(path) -> ScenarioConfig:
    """Parse a scenario file; unknown or malformed keys raise
    :class:`ScenarioError` naming the offender."""
    kv: dict[str, str] = {}
    fields = []
    for lineno, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key == "tx":
            toks = rest.split()
            if len(toks) != 8:
                raise ScenarioError(f"{path}: line {lineno}: tx line needs "
                                    "8 fields (id east north offset amp "
                                    "drift sill range)")
            try:
                vals = [float(v) for v in toks[1:]]
            except ValueError:
                raise ScenarioError(f"{path}: line {lineno}: non-numeric "
                                    f"tx field") from None
            fields.append(TransmitterField(
                tx=Transmitter(id=toks[0], pos=(vals[0], vals[1])),
                offset_us=vals[2], profile_amp_us=vals[3],
                drift_us_per_km=vals[4], gp_sill_us2=vals[5],
                gp_range_m=vals[6]))
        else:
            kv[key] = rest.strip()

    def take(key, conv, required=False):
        if key not in kv:
            if required:
                raise ScenarioError(f"{path}: missing key {key!r}")
            return None
        try:
            return conv(kv.pop(key))
        except ValueError:
            raise ScenarioError(f"{path}: bad value for key {key!r}") from None

    name = take("name", str) or Path(path).stem
    frame = WaterwayFrame.from_heading(
        (take("frame_origin_east_m", float, required=True),
         take("frame_origin_north_m", float, required=True)),
        take("frame_heading_deg", float, required=True))
    kwargs = {"half_width_m": take("half_width_m", float, required=True),
              "length_m": take("length_m", float, required=True)}
    for key, conv in _SCALARS.items():
        if key in kwargs:
            continue
        val = take(key, conv)
        if val is not None:
            kwargs[key] = val
    offsets = take("eval_offsets_m", str)
    if offsets is not None:
        kwargs["eval_offsets_m"] = tuple(float(v) for v in offsets.split())
    if kv:
        raise ScenarioError(f"{path}: unknown key(s) {sorted(kv)}")
    if not fields:
        raise ScenarioError(f"{path}: no tx lines")
    return ScenarioConfig(name=name, frame=frame, fields=tuple(fields),
                          **kwargs)

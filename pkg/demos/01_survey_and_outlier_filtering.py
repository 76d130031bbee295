# Survey data and MAD outlier filtering
# ======================================
#
# Simulate the shipped narrow-waterway scenario, look at the survey track
# the vessel collected, and run the sliding-window MAD filter that removes
# measurement outliers before any map is built.

import numpy as np

from asfkit.geometry import local_coords
from asfkit.simulator import load_scenario, simulate
from asfkit.survey import mad_filter

from _shared import scenario_path

cfg = load_scenario(scenario_path())
print(f"scenario {cfg.name}: {cfg.length_m:.0f} m x ±{cfg.half_width_m:.0f} m, "
      f"{len(cfg.fields)} transmitters, seed {cfg.seed}")

sim = simulate(cfg)
track = sim.build_track
print(f"\nbuild survey {track.label}: {len(track)} samples, "
      f"transmitters {track.tx_ids}")

# where did the vessel actually go?
s, l = local_coords(cfg.frame, track.pos)
print(f"along-track range  {s.min():7.1f} .. {s.max():7.1f} m")
print(f"cross-track range  {l.min():7.1f} .. {l.max():7.1f} m "
      f"(cross sweeps near s = {cfg.turn_s_m:.0f})")

# %% MAD filtering at the survey-processing defaults: 60 s window, 2 x MAD
filtered, rejected = mad_filter(track, window_sec=60.0, k=2.0)
print(f"\nMAD filter: rejected {len(rejected)} of {len(track)} rows "
      f"({100 * len(rejected) / len(track):.1f}%)")

injected = set(sim.outlier_rows[0])
caught = injected & set(rejected)
print(f"simulator injected {len(injected)} outlier rows; "
      f"filter caught {len(caught)} ({100 * len(caught) / max(1, len(injected)):.0f}%)")

# a rejected sample against its neighborhood
if rejected:
    i = next(r for r in rejected if r in injected)
    j = 0
    sel = np.abs(track.t - track.t[i]) <= 30.0
    win = track.asf[sel, j]
    print(f"\nexample rejected row {i} (tx {track.tx_ids[j]}): "
          f"value {track.asf[i, j]:.3f} us vs window median "
          f"{np.median(win):.3f} us, window MAD "
          f"{np.median(np.abs(win - np.median(win))):.4f} us")

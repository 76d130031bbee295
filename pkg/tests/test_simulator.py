import numpy as np
import pytest

from asfkit.geometry import WaterwayFrame, global_coords, local_coords
from asfkit.mapgen import lookup_asf
from asfkit.positioning import SPEED_M_PER_US, Transmitter
from asfkit.simulator import (GP_MODES, ScenarioConfig, ScenarioError,
                              TransmitterField, TruthFieldSet, cross_profile,
                              load_scenario, profile_asymmetry, save_scenario,
                              scenario_grid, simulate, truth_asf,
                              without_cross_leg)
from asfkit.survey import mad_filter, write_track, load_track
from asfkit.variogram import empirical_variogram, fit_model

FRAME = WaterwayFrame.from_heading((0.0, 0.0), 90.0)


def small_config(seed=1, **kw):
    fields = (
        TransmitterField(Transmitter("V", (37588.0, -13681.0)),
                         offset_us=23.5, profile_amp_us=0.15,
                         drift_us_per_km=0.02, gp_sill_us2=kw.pop("sill", 0.001),
                         gp_range_m=kw.pop("gp_range", 300.0)),
        TransmitterField(Transmitter("W", (-48209.0, -57453.0)),
                         offset_us=31.2, profile_amp_us=-0.11,
                         drift_us_per_km=-0.015, gp_sill_us2=0.0008,
                         gp_range_m=250.0),
        TransmitterField(Transmitter("X", (-28470.0, 106252.0)),
                         offset_us=27.8, profile_amp_us=0.09,
                         drift_us_per_km=0.01, gp_sill_us2=0.0012,
                         gp_range_m=200.0),
    )
    base = dict(name="test-scn", frame=FRAME, half_width_m=120.0,
                length_m=1200.0, fields=fields, turn_s_m=600.0,
                turn_span_m=600.0, cross_sweeps=3, seed=seed)
    base.update(kw)
    return ScenarioConfig(**base)


class TestTruthField:
    def test_center_zero_profile_and_offset(self):
        cfg = small_config(sill=0.0)
        fields = TruthFieldSet(cfg)
        # drift-free transmitter would be exactly offset at origin; V has
        # drift 0.02/km but s=0 at the origin
        v = fields.value("V", np.array([[0.0, 0.0]]))[0]
        assert v == pytest.approx(23.5, abs=1e-12)

    def test_cross_asymmetry_analytic(self):
        cfg = small_config(sill=0.0)
        w = cfg.half_width_m
        p_plus = global_coords(FRAME, [500.0], [w])[0]
        p_minus = global_coords(FRAME, [500.0], [-w])[0]
        d = truth_asf(cfg, "V", p_plus) - truth_asf(cfg, "V", p_minus)
        assert d == pytest.approx(profile_asymmetry(0.15), abs=1e-12)

    def test_profile_zero_at_centerline(self):
        assert cross_profile(0.2, 120.0, 0.0) == 0.0

    def test_gp_field_variogram_recovers_sill_and_range(self):
        cfg = small_config(sill=0.002, gp_range=300.0)
        fields = TruthFieldSet(cfg)
        rng = np.random.default_rng(99)
        pts = rng.uniform([0, -2000], [4000, 2000], (4000, 2))
        gp = fields._gp["V"](pts)
        emp = empirical_variogram(pts, gp, bin_width=60.0, max_lag=1200.0)
        fit = fit_model(emp, "gaussian")
        sill = fit.model.nugget + fit.model.partial_sill
        assert sill == pytest.approx(0.002, rel=0.15)
        assert fit.model.range_m == pytest.approx(300.0, rel=0.15)


class TestSynthSurvey:
    def test_zero_noise_equals_truth(self):
        cfg = small_config(noise_sigma_us=0.0, outlier_rate=0.0)
        sim = simulate(cfg)
        fields = TruthFieldSet(cfg)
        track = sim.build_track
        truth = fields.value("V", track.pos)
        assert np.max(np.abs(track.asf[:, 0] - truth)) < 1e-12

    def test_toa_consistency(self):
        cfg = small_config(noise_sigma_us=0.0, outlier_rate=0.0,
                           clock_bias_us=3.0, clock_drift_us_per_s=0.0)
        sim = simulate(cfg)
        track = sim.build_track
        tx = cfg.fields[0].tx
        ranges = np.hypot(track.pos[:, 0] - tx.pos[0],
                          track.pos[:, 1] - tx.pos[1])
        expect = ranges / SPEED_M_PER_US + track.asf[:, 0] + 3.0
        assert np.max(np.abs(track.toa[:, 0] - expect)) < 1e-9

    def test_determinism_same_seed(self, tmp_path):
        sims = [simulate(small_config(seed=7)) for _ in range(2)]
        for a, b in zip(sims[0].tracks, sims[1].tracks):
            assert np.array_equal(a.t, b.t)
            assert np.array_equal(a.pos, b.pos)
            assert np.array_equal(a.asf, b.asf)
            assert np.array_equal(a.toa, b.toa)
        for tx in sims[0].truth_maps:
            assert np.array_equal(sims[0].truth_maps[tx].values,
                                  sims[1].truth_maps[tx].values)
        # byte-identical files
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_track(sims[0].tracks[0], p1)
        write_track(sims[1].tracks[0], p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seeds_differ(self):
        a = simulate(small_config(seed=1)).build_track
        b = simulate(small_config(seed=2)).build_track
        assert not np.array_equal(a.asf, b.asf)

    def test_route_count_and_labels(self):
        sim = simulate(small_config())
        assert [t.label for t in sim.tracks] == [
            "route1", "route2", "route3", "route4", "route5"]
        assert len(sim.eval_tracks) == 4

    def test_paths_stay_inside_waterway(self):
        cfg = small_config()
        sim = simulate(cfg)
        for track in sim.tracks:
            _, l = local_coords(cfg.frame, track.pos)
            assert np.max(np.abs(l)) <= cfg.half_width_m + 1e-9

    def test_path_exits_waterway_raises(self):
        with pytest.raises(ScenarioError, match="exits"):
            simulate(small_config(eval_offsets_m=(0.0, 130.0, -30.0, 30.0)))

    def test_outlier_rows_recovered_by_mad_filter(self):
        cfg = small_config(seed=3, outlier_rate=0.02,
                           outlier_mag_us=0.5, length_m=2000.0)
        sim = simulate(cfg)
        track = sim.build_track
        injected = set(sim.outlier_rows[0])
        assert injected, "scenario should inject some outliers"
        _, rejected = mad_filter(track, 60.0, 2.0)
        recall = len(injected & set(rejected)) / len(injected)
        assert recall >= 0.9

    def test_truth_map_consistent_with_field(self):
        cfg = small_config(sill=0.001)
        sim = simulate(cfg)
        fields = TruthFieldSet(cfg)
        track = sim.build_track
        amap = sim.truth_maps["V"]
        lookups = np.array([lookup_asf(amap, p, clamp=True)
                            for p in track.pos])
        truth = fields.value("V", track.pos)
        # bilinear error bound: max |curvature| * spacing^2 / 8 per axis.
        # profile: amp/w^2 * shape'' with |shape''| <= 2*1.4^2*0.77 + 0.7;
        # gp: |d2/dx2 of sill*exp(-(h/r)^2)| <= 6*sqrt(sill)/r^2 (3-sigma).
        f = cfg.fields[0]
        curv = (abs(f.profile_amp_us) / cfg.half_width_m**2 * 2.86
                + 6.0 * np.sqrt(f.gp_sill_us2) / f.gp_range_m**2)
        bound = 2.0 * curv * cfg.grid_spacing_m**2 / 8.0
        assert np.max(np.abs(lookups - truth)) < bound

    def test_without_cross_leg_strips_sweep(self):
        cfg = small_config()
        sim = simulate(cfg)
        stripped = without_cross_leg(sim.build_track, cfg)
        _, l = local_coords(cfg.frame, stripped.pos)
        assert np.max(np.abs(l)) <= cfg.wander_m + 1e-6
        assert len(stripped) < len(sim.build_track)
        assert stripped.label == "route1-nocross"

    def test_grid_covers_waterway(self):
        cfg = small_config()
        g = scenario_grid(cfg)
        s, l = g.node_locals()
        assert s[0] <= 0 and s[-1] >= cfg.length_m
        assert l[0] <= -cfg.half_width_m and l[-1] >= cfg.half_width_m
        assert 0.0 in l.tolist()


class TestScenarioFiles:
    def test_round_trip(self, tmp_path):
        cfg = small_config(seed=42)
        path = tmp_path / "scn.cfg"
        save_scenario(cfg, path)
        back = load_scenario(path)
        assert back == cfg

    def test_missing_key_named(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("frame_origin_east_m 0\nframe_origin_north_m 0\n"
                        "frame_heading_deg 90\nhalf_width_m 100\n")
        with pytest.raises(ScenarioError, match="length_m"):
            load_scenario(path)

    def test_unknown_key_rejected(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "scn.cfg"
        save_scenario(cfg, path)
        path.write_text(path.read_text() + "mystery_knob 3\n")
        with pytest.raises(ScenarioError, match="mystery_knob"):
            load_scenario(path)

    def test_bad_tx_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("frame_origin_east_m 0\nframe_origin_north_m 0\n"
                        "frame_heading_deg 90\nhalf_width_m 100\n"
                        "length_m 1000\ntx A 1 2 3\n")
        with pytest.raises(ScenarioError, match="tx line"):
            load_scenario(path)

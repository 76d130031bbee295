import numpy as np
import pytest

from asfkit.survey import (SurveyTrack, TrackFormatError, load_track,
                           mad_filter, write_track)


def make_track(t, asf, label="test", tx="A"):
    t = np.asarray(t, dtype=float)
    asf = np.asarray(asf, dtype=float)
    n = t.size
    return SurveyTrack(label=label, tx_ids=[tx], t=t,
                       pos=np.column_stack([t, np.zeros(n)]),
                       asf=asf[:, None], toa=asf[:, None] + 100.0)


class TestTrackIO:
    def test_small_file_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "t_sec,east_m,north_m,asf_A_us,asf_B_us,toa_A_us,toa_B_us\n"
            "0.0,1.0,2.0,0.5,0.6,100.1,101.2\n"
            "1.0,2.0,3.0,0.51,0.61,100.2,101.3\n"
            "2.0,3.0,4.0,0.52,0.62,100.3,101.4\n")
        track = load_track(path)
        assert len(track) == 3
        assert track.tx_ids == ["A", "B"]
        assert track.asf[1, 1] == 0.61
        m = track.measurement(0)
        assert m.asf == {"A": 0.5, "B": 0.6}

    def test_non_numeric_field_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "t_sec,east_m,north_m,asf_A_us,toa_A_us\n"
            "0.0,1.0,2.0,0.5,100.0\n"
            "1.0,1.0,2.0,oops,100.0\n")
        with pytest.raises(TrackFormatError, match="line 3"):
            load_track(path)

    def test_unsorted_time_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "t_sec,east_m,north_m,asf_A_us,toa_A_us\n"
            "1.0,1.0,2.0,0.5,100.0\n"
            "1.0,1.0,2.0,0.5,100.0\n")
        with pytest.raises(TrackFormatError, match="increasing"):
            load_track(path)

    def test_write_read_bit_identical(self, tmp_path):
        rng = np.random.default_rng(5)
        n = 50
        track = SurveyTrack(label="rt", tx_ids=["A", "B"],
                            t=np.cumsum(rng.uniform(0.5, 1.5, n)),
                            pos=rng.normal(0, 1e3, (n, 2)),
                            asf=rng.normal(20, 0.1, (n, 2)),
                            toa=rng.normal(300, 5, (n, 2)))
        path = tmp_path / "track.csv"
        write_track(track, path)
        back = load_track(path)
        assert np.array_equal(back.t, track.t)
        assert np.array_equal(back.pos, track.pos)
        assert np.array_equal(back.asf, track.asf)
        assert np.array_equal(back.toa, track.toa)
        # and the files themselves are stable
        path2 = tmp_path / "track2.csv"
        write_track(back, path2)
        assert path.read_bytes() == path2.read_bytes()


class TestMadFilter:
    def brute_force(self, t, v, window, k):
        """Independent windowed median/MAD rejection, plain loops."""
        rejected = []
        for i in range(len(t)):
            win = [v[j] for j in range(len(t))
                   if abs(t[j] - t[i]) <= window / 2]
            if len(win) < 2:
                continue
            m = float(np.median(win))
            mad = float(np.median([abs(x - m) for x in win]))
            thr = k * mad
            if not np.isnan(thr) and abs(v[i] - m) > thr:
                rejected.append(i)
        return rejected

    def test_constant_series_kept(self):
        track = make_track(np.arange(100.0), np.full(100, 0.5))
        out, rejected = mad_filter(track)
        assert rejected == []
        assert len(out) == 100

    def test_single_spike_rejected(self):
        asf = np.full(61, 0.5)
        asf[30] = 0.9
        track = make_track(np.arange(61.0), asf)
        out, rejected = mad_filter(track, window_sec=60.0, k=2.0)
        assert rejected == self.brute_force(track.t, asf, 60.0, 2.0) == [30]
        assert len(out) == 60

    def test_matches_brute_force_on_noisy_data(self):
        rng = np.random.default_rng(11)
        t = np.cumsum(rng.uniform(0.5, 1.5, 300))
        v = 0.5 + 0.02 * np.sin(t / 40) + rng.normal(0, 0.01, t.size)
        v[rng.choice(t.size, 6, replace=False)] += 0.3
        track = make_track(t, v)
        _, rejected = mad_filter(track, window_sec=60.0, k=2.0)
        assert rejected == self.brute_force(t, v, 60.0, 2.0)

    def test_infinite_k_keeps_everything(self):
        rng = np.random.default_rng(3)
        track = make_track(np.arange(50.0), rng.normal(0.5, 0.1, 50))
        out, rejected = mad_filter(track, k=np.inf)
        assert rejected == []
        assert np.array_equal(out.asf, track.asf)

    def test_output_is_subsequence(self):
        rng = np.random.default_rng(19)
        v = rng.normal(0.5, 0.05, 200)
        track = make_track(np.arange(200.0), v)
        out, rejected = mad_filter(track)
        keep = sorted(set(range(200)) - set(rejected))
        assert np.array_equal(out.asf[:, 0], v[keep])
        assert np.array_equal(out.t, track.t[keep])

    def test_scale_invariance_of_rejections(self):
        rng = np.random.default_rng(23)
        v = np.abs(rng.normal(0.5, 0.05, 150)) + 0.1
        v[20] += 1.0
        track = make_track(np.arange(150.0), v)
        _, rej1 = mad_filter(track)
        _, rej2 = mad_filter(make_track(np.arange(150.0), 7.5 * v))
        assert rej1 == rej2

    def test_idempotent_when_nothing_removed(self):
        track = make_track(np.arange(80.0), np.full(80, 1.25))
        once, rej = mad_filter(track)
        assert rej == []
        twice, rej2 = mad_filter(once)
        assert rej2 == []
        assert np.array_equal(twice.asf, once.asf)

    def test_whole_row_rejection_across_transmitters(self):
        n = 61
        asf = np.column_stack([np.full(n, 0.5), np.full(n, 1.0)])
        asf[10, 1] = 1.8   # spike only on tx B
        track = SurveyTrack(label="x", tx_ids=["A", "B"],
                            t=np.arange(float(n)),
                            pos=np.zeros((n, 2)) + np.arange(n)[:, None],
                            asf=asf, toa=asf + 50)
        out, rejected = mad_filter(track)
        assert rejected == [10]
        assert len(out) == n - 1

    def test_bad_parameters(self):
        track = make_track(np.arange(10.0), np.full(10, 1.0))
        with pytest.raises(ValueError):
            mad_filter(track, window_sec=0.0)
        with pytest.raises(ValueError):
            mad_filter(track, k=0.0)

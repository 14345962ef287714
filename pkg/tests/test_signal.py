import numpy as np
import pytest

from pbflab.signal import (
    IntensityMap,
    SignalSeries,
    accumulate_map,
    load_map,
    load_series,
    sample_photodiode,
    save_map,
    save_series,
    threshold_events,
)
from pbflab.thermal import DEFAULT_MATERIAL, uniform_field


def make_series(values, x=None, y=None, layer=0, dt=1e-5):
    values = np.asarray(values, dtype=float)
    n = len(values)
    x = np.zeros(n) if x is None else np.asarray(x, dtype=float)
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    return SignalSeries(times=np.arange(n) * dt, values=values,
                        positions=np.column_stack([x, y]),
                        layer_index=np.full(n, layer, dtype=int))


class TestSamplePhotodiode:
    def test_uniform_field_definition(self):
        f = uniform_field(30, 30, 4, 1e-5, 1000.0, DEFAULT_MATERIAL)
        r_fov = 8e-5
        gain = 2.5e-7
        got = sample_photodiode(f, (1.5e-4, 1.5e-4), r_fov, gain)
        # count in-FOV cells explicitly
        xs = (np.arange(30) + 0.5) * 1e-5 - 1.5e-4
        mask = (xs[:, None] ** 2 + xs[None, :] ** 2) <= r_fov ** 2
        area = mask.sum() * 1e-5 ** 2
        assert got == pytest.approx(gain * 1000.0 ** 4 * area, rel=1e-12)

    def test_doubling_temperature_times_16(self):
        f = uniform_field(20, 20, 4, 1e-5, 900.0, DEFAULT_MATERIAL)
        g = uniform_field(20, 20, 4, 1e-5, 1800.0, DEFAULT_MATERIAL)
        a = sample_photodiode(f, (1e-4, 1e-4), 6e-5, 1.0)
        b = sample_photodiode(g, (1e-4, 1e-4), 6e-5, 1.0)
        assert b == pytest.approx(16.0 * a, rel=1e-9)

    def test_monotone_in_cell_temperature(self):
        f = uniform_field(20, 20, 4, 1e-5, 900.0, DEFAULT_MATERIAL)
        base = sample_photodiode(f, (1e-4, 1e-4), 6e-5, 1.0)
        f.temperatures[10, 10, -1] += 50.0
        assert sample_photodiode(f, (1e-4, 1e-4), 6e-5, 1.0) > base

    def test_out_of_fov_cell_ignored(self):
        f = uniform_field(40, 40, 4, 1e-5, 900.0, DEFAULT_MATERIAL)
        base = sample_photodiode(f, (2e-4, 2e-4), 5e-5, 1.0)
        f.temperatures[0, 0, -1] = 3000.0
        assert sample_photodiode(f, (2e-4, 2e-4), 5e-5, 1.0) == pytest.approx(base)


class TestAccumulateMap:
    def test_single_sample_one_cell(self):
        s = make_series([5.0], x=[0.33], y=[0.77])
        m = accumulate_map([s], cell=0.05, statistic="sum")
        assert (m.values > 0).sum() == 1
        assert m.counts.sum() == 1

    def test_max_idempotent(self):
        rng = np.random.default_rng(5)
        s = make_series(rng.uniform(1, 9, 50), x=rng.uniform(0, 1, 50),
                        y=rng.uniform(0, 1, 50))
        extent = ((0.0, 1.0), (0.0, 1.0))
        one = accumulate_map([s], 0.1, "max", extent=extent)
        two = accumulate_map([s, s], 0.1, "max", extent=extent)
        assert np.array_equal(one.values, two.values)

    def test_sum_additive_over_concatenation(self):
        rng = np.random.default_rng(6)
        a = make_series(rng.uniform(1, 9, 30), x=rng.uniform(0, 1, 30),
                        y=rng.uniform(0, 1, 30))
        b = make_series(rng.uniform(1, 9, 40), x=rng.uniform(0, 1, 40),
                        y=rng.uniform(0, 1, 40))
        extent = ((0.0, 1.0), (0.0, 1.0))
        ab = accumulate_map([a, b], 0.1, "sum", extent=extent)
        a_only = accumulate_map([a], 0.1, "sum", extent=extent)
        b_only = accumulate_map([b], 0.1, "sum", extent=extent)
        assert np.allclose(ab.values, a_only.values + b_only.values)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        series = [make_series(rng.uniform(1, 9, 20), x=rng.uniform(0, 1, 20),
                              y=rng.uniform(0, 1, 20)) for _ in range(4)]
        extent = ((0.0, 1.0), (0.0, 1.0))
        fwd = accumulate_map(series, 0.1, "mean", extent=extent)
        rev = accumulate_map(series[::-1], 0.1, "mean", extent=extent)
        assert np.allclose(fwd.values, rev.values)

    def test_empty_series_zero_filled(self):
        m = accumulate_map([], 0.1, "max")
        assert m.values.size == 0
        assert m.counts.sum() == 0
        m2 = accumulate_map([], 0.1, "max", extent=((0, 1), (0, 1)))
        assert m2.values.shape == (10, 10)
        assert np.all(m2.values == 0)


class TestThresholdEvents:
    def test_constant_below_no_events(self):
        s = make_series(np.full(100, 5.0))
        assert len(threshold_events(s, 10.0, "above")) == 0

    def test_single_spike_at_maximum(self):
        v = np.full(100, 5.0)
        v[40:45] = [8, 12, 15, 12, 8]
        s = make_series(v)
        events = threshold_events(s, 10.0, "above")
        assert len(events) == 1
        assert events[0] == pytest.approx(s.times[42])

    def test_three_spikes_fifty_apart(self):
        v = np.full(200, 5.0)
        for k in (30, 80, 130):
            v[k] = 20.0
        s = make_series(v)
        assert len(threshold_events(s, 10.0, "above", merge_window=10)) == 3

    def test_below_direction(self):
        v = np.full(100, 20.0)
        v[60:63] = [9, 4, 9]
        s = make_series(v)
        events = threshold_events(s, 10.0, "below")
        assert len(events) == 1
        assert events[0] == pytest.approx(s.times[61])

    def test_nearby_crossings_merge_to_extremum(self):
        v = np.full(60, 5.0)
        v[20] = 12.0
        v[24] = 18.0  # within one window of the first crossing
        s = make_series(v)
        events = threshold_events(s, 10.0, "above", merge_window=10)
        assert len(events) == 1
        assert events[0] == pytest.approx(s.times[24])


class TestIO:
    def test_series_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        s = make_series(rng.uniform(0, 9, 25), x=rng.uniform(-1, 1, 25),
                        y=rng.uniform(-1, 1, 25), layer=3)
        path = tmp_path / "series.txt"
        save_series(s, path, provenance={"seed": 1})
        t = load_series(path)
        assert np.array_equal(t.times, s.times)
        assert np.array_equal(t.values, s.values)
        assert np.array_equal(t.positions, s.positions)
        assert np.array_equal(t.layer_index, s.layer_index)

    def test_map_round_trip_and_loadable_plain(self, tmp_path):
        rng = np.random.default_rng(9)
        s = make_series(rng.uniform(1, 9, 40), x=rng.uniform(0, 1, 40),
                        y=rng.uniform(0, 1, 40))
        m = accumulate_map([s], 0.1, "max", extent=((0, 1), (0, 1)))
        path = tmp_path / "map.txt"
        save_map(m, path)
        back = load_map(path)
        assert np.array_equal(back.values, m.values)
        assert np.array_equal(back.counts, m.counts)
        assert back.statistic == "max"
        # body is a plain grid: a standard comment-aware loader sees exactly it
        plain = np.loadtxt(path, comments="#")
        assert np.array_equal(plain, m.values)

    def test_series_invariants_enforced(self):
        with pytest.raises(ValueError):
            SignalSeries(times=np.array([0.0, 0.0]), values=np.array([1.0, 2.0]),
                         positions=np.zeros((2, 2)), layer_index=np.zeros(2, dtype=int))
        with pytest.raises(ValueError):
            SignalSeries(times=np.array([0.0, 1.0]), values=np.array([1.0, -2.0]),
                         positions=np.zeros((2, 2)), layer_index=np.zeros(2, dtype=int))

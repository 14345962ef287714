import math

import numpy as np
import pytest

from pbflab.scanpath import (
    CircleDomain,
    MachineParams,
    PatternRangeError,
    DEFAULT_MACHINE,
    generate_build,
    generate_layer,
    laser_on_path_length,
    load_patterns,
    position_at,
    save_patterns,
    turning_points,
)

DOMAIN = CircleDomain(center=(0.0, 0.0), radius=1.5)


def chord_lengths(radius, hatch):
    """Independent geometric oracle: lengths of all chords of the hatch family."""
    n_max = int(math.floor(radius / hatch))
    out = []
    for n in range(-n_max, n_max + 1):
        d = n * hatch
        if radius * radius - d * d > 0:
            out.append(2.0 * math.sqrt(radius * radius - d * d))
    return [c for c in out if c > 1e-9]


class TestMachineParams:
    def test_defaults_valid(self):
        assert DEFAULT_MACHINE.laser_power == 170.0
        assert DEFAULT_MACHINE.scan_speed == 1085.0

    def test_all_violations_reported(self):
        with pytest.raises(ValueError) as err:
            MachineParams(laser_power=-1, scan_speed=0, hatch_distance=0.1,
                          layer_thickness=0.02, rotation_increment=200.0)
        msg = str(err.value)
        assert "laser_power" in msg and "scan_speed" in msg
        assert "rotation_increment" in msg


class TestGenerateLayer:
    def test_layer0_base_angle_identity(self):
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 0)
        assert p.angle == 0.0

    def test_layer1_rotated_by_increment(self):
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 1)
        assert p.angle == pytest.approx(67.0)

    def test_line_count_and_offsets(self):
        # radius 1.5, hatch 0.1, angle 0: 29 chords at y = -1.4 ... 1.4
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 0)
        on = [s for s in p.segments if s.laser_on]
        assert len(on) == 29
        ys = sorted(s.start[1] for s in on)
        assert ys == pytest.approx([round(-1.4 + 0.1 * k, 10) for k in range(29)])

    def test_segments_contiguous_and_at_speed(self):
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 3)
        p.validate(scan_speed=DEFAULT_MACHINE.scan_speed)
        for a, b in zip(p.segments, p.segments[1:]):
            assert b.t_start == a.t_end
        # serpentine: consecutive laser-on chords run in opposite directions
        on = [s for s in p.segments if s.laser_on]
        for a, b in zip(on, on[1:]):
            da = np.subtract(a.end, a.start)
            db = np.subtract(b.end, b.start)
            assert float(da @ db) < 0

    def test_on_length_matches_chord_sum(self):
        for k in (0, 1, 5):
            p = generate_layer(DEFAULT_MACHINE, DOMAIN, k)
            assert laser_on_path_length(p) == pytest.approx(
                sum(chord_lengths(DOMAIN.radius, DEFAULT_MACHINE.hatch_distance)),
                rel=1e-12)

    def test_z_from_layer_index(self):
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 7)
        assert p.z == pytest.approx(7 * 0.02)

    def test_tiny_circle_gives_explicit_empty_pattern(self):
        domain = CircleDomain(center=(0.0, 0.0), radius=1e-12)
        p = generate_layer(DEFAULT_MACHINE, domain, 0)
        assert p.is_empty
        assert p.segments == ()

    def test_angle_increment_mod_180(self):
        patterns = generate_build(DEFAULT_MACHINE, DOMAIN, 12)
        for a, b in zip(patterns, patterns[1:]):
            diff = (b.angle - a.angle) % 180.0
            assert diff == pytest.approx(67.0)

    def test_rotation_congruence(self):
        # rotating the domain center and the base angle together yields a
        # congruent pattern (compare after rotating back)
        rng = np.random.default_rng(7)
        for _ in range(5):
            delta = float(rng.uniform(5.0, 85.0))
            center = rng.uniform(-2, 2, size=2)
            base = MachineParams(laser_power=170, scan_speed=1085,
                                 hatch_distance=0.1, layer_thickness=0.02,
                                 base_angle=20.0)
            rot = MachineParams(laser_power=170, scan_speed=1085,
                                hatch_distance=0.1, layer_thickness=0.02,
                                base_angle=(20.0 + delta) % 180.0)
            c, s = math.cos(math.radians(delta)), math.sin(math.radians(delta))
            rot_center = (c * center[0] - s * center[1],
                          s * center[0] + c * center[1])
            p0 = generate_layer(base, CircleDomain(tuple(center), 1.1), 0)
            p1 = generate_layer(rot, CircleDomain(rot_center, 1.1), 0)
            assert len(p0.segments) == len(p1.segments)
            for a, b in zip(p0.segments, p1.segments):
                # rotate b back by -delta
                for pa, pb in ((a.start, b.start), (a.end, b.end)):
                    bx = c * pb[0] + s * pb[1]
                    by = -s * pb[0] + c * pb[1]
                    assert math.hypot(bx - pa[0], by - pa[1]) < 1e-9


class TestPositionAt:
    def setup_method(self):
        self.p = generate_layer(DEFAULT_MACHINE, DOMAIN, 0)

    def test_segment_start(self):
        seg = self.p.segments[3]
        pos, on = position_at(self.p, seg.t_start)
        assert pos == pytest.approx(seg.start)
        assert on == seg.laser_on

    def test_segment_midpoint(self):
        seg = self.p.segments[0]
        tm = 0.5 * (seg.t_start + seg.t_end)
        pos, _ = position_at(self.p, tm)
        mid = (0.5 * (seg.start[0] + seg.end[0]), 0.5 * (seg.start[1] + seg.end[1]))
        assert pos == pytest.approx(mid)

    def test_out_of_range_raises(self):
        with pytest.raises(PatternRangeError):
            position_at(self.p, self.p.t_end + 1.0)

    def test_time_between_layer_patterns_raises(self):
        patterns = generate_build(DEFAULT_MACHINE, DOMAIN, 2, dead_time=0.5)
        gap_t = patterns[0].t_end + 0.25
        with pytest.raises(PatternRangeError):
            position_at(patterns[0], gap_t)
        with pytest.raises(PatternRangeError):
            position_at(patterns[1], gap_t)


class TestTurningPoints:
    def test_single_line_no_events(self):
        m = MachineParams(laser_power=170, scan_speed=1085, hatch_distance=1.0,
                          layer_thickness=0.02)
        p = generate_layer(m, CircleDomain((0, 0), 0.6), 0)
        assert len([s for s in p.segments if s.laser_on]) == 1
        assert turning_points(p) == []

    def test_event_counts(self):
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 0)
        events = turning_points(p)
        reentry = [e for e in events if e.kind == "re-entry"]
        departure = [e for e in events if e.kind == "departure"]
        assert len(reentry) == 28
        assert len(departure) == 28

    def test_events_on_circle_boundary(self):
        p = generate_layer(DEFAULT_MACHINE, DOMAIN, 4)
        for e in turning_points(p):
            r = math.hypot(e.position[0], e.position[1])
            assert abs(r - DOMAIN.radius) < 1e-6


class TestPatternIO:
    def test_round_trip_exact(self, tmp_path):
        patterns = generate_build(DEFAULT_MACHINE, DOMAIN, 3)
        path = tmp_path / "pattern.txt"
        save_patterns(patterns, path)
        loaded = load_patterns(path)
        assert len(loaded) == 3
        for a, b in zip(patterns, loaded):
            assert a.layer_index == b.layer_index
            assert a.z == b.z
            assert a.angle == b.angle
            assert a.segments == b.segments

    def test_two_layer_angles_differ_by_increment(self, tmp_path):
        patterns = generate_build(DEFAULT_MACHINE, DOMAIN, 2)
        path = tmp_path / "p.txt"
        save_patterns(patterns, path)
        loaded = load_patterns(path)
        assert (loaded[1].angle - loaded[0].angle) % 180.0 == pytest.approx(67.0)

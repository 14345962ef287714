import math

import numpy as np
import pytest

from pbflab.porosity import (
    DefectRecord,
    RateModel,
    band_compare,
    ingest_defects,
    ring_profile,
    save_defects,
    synth_defects,
)
from pbflab.thermal.stepper import SurfaceMetricMap


def voxel_oracle_defect_volumes(defects, radius, dr, band, bin_mm=1e-3):
    """Independent ring sums: bin centroid radii at 1 um, then sum bins per ring."""
    n_rings = int(math.floor(radius / dr + 1e-12))
    edges = [k * dr for k in range(n_rings + 1)]
    if edges[-1] < radius - 1e-12:
        edges.append(radius)
    edges = np.asarray(edges)
    n = len(edges) - 1
    n_bins = int(math.ceil(radius / bin_mm)) + 1
    bin_vol = np.zeros(n_bins)
    for d in defects:
        x, y, z = d.centroid
        if not (band[0] <= z < band[1]):
            continue
        r = math.hypot(x, y)
        if r > radius + 1e-6:
            continue
        bin_vol[min(int(r / bin_mm), n_bins - 1)] += d.volume
    out = np.zeros(n)
    centers = (np.arange(n_bins) + 0.5) * bin_mm
    for b in range(n_bins):
        if bin_vol[b] == 0:
            continue
        k = min(int(centers[b] / dr), n - 1)
        out[k] += bin_vol[b]
    return out


def random_defects(rng, n, radius=1.5, z=(0.0, 6.5)):
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0, 2 * np.pi, n)
    out = []
    for k in range(n):
        out.append(DefectRecord.from_volume(
            (r[k] * math.cos(phi[k]), r[k] * math.sin(phi[k]),
             rng.uniform(*z)),
            rng.uniform(1e-6, 1e-4)))
    return out


class TestIngest:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "defects.txt"
        path.write_text("# nothing here\nx y z volume\n")
        res = ingest_defects(path)
        assert res.records == []
        assert res.rejects == []

    def test_single_row_identity_transform(self, tmp_path):
        path = tmp_path / "defects.txt"
        path.write_text("x y z volume\n0.5 0 15 1e-5\n")
        res = ingest_defects(path)
        assert len(res.records) == 1
        assert res.records[0].centroid == pytest.approx((0.5, 0.0, 15.0))
        assert res.records[0].volume == pytest.approx(1e-5)

    def test_offset_transform(self, tmp_path):
        path = tmp_path / "defects.txt"
        path.write_text("x y z volume\n0 0 15 1e-5\n")
        res = ingest_defects(path, frame_transform=(1.0, 1.0, 0.0))
        assert res.records[0].centroid == pytest.approx((1.0, 1.0, 15.0))

    def test_malformed_rows_rejected_not_dropped(self, tmp_path):
        path = tmp_path / "defects.txt"
        path.write_text("x y z volume\n"
                        "0.1 0.2 15 1e-5\n"
                        "0.1 0.2 15\n"
                        "a b c d\n"
                        "0.3 0.1 16 -2e-5\n")
        res = ingest_defects(path)
        assert len(res.records) == 1
        assert len(res.rejects) == 3
        reasons = [r[1] for r in res.rejects]
        assert any("fields" in r for r in reasons)
        assert any("non-numeric" in r for r in reasons)
        assert any("volume" in r for r in reasons)

    def test_all_rows_malformed_raises(self, tmp_path):
        path = tmp_path / "defects.txt"
        path.write_text("x y z volume\nbad row here now\n")
        with pytest.raises(ValueError, match="no valid rows"):
            ingest_defects(path)

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(ValueError, match="cannot read"):
            ingest_defects(tmp_path / "missing.txt")

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        records = random_defects(rng, 20)
        path = tmp_path / "defects.txt"
        save_defects(records, path)
        back = ingest_defects(path)
        assert len(back.records) == len(records)
        for a, b in zip(records, back.records):
            assert a.centroid == pytest.approx(b.centroid)
            assert a.volume == pytest.approx(b.volume)


class TestRingProfile:
    def test_no_defects_all_ones(self):
        p = ring_profile([], radius=1.5, dr=0.2, band=(14.0, 20.5))
        assert np.all(p.relative_density == 1.0)

    def test_single_defect_hand_value(self):
        # one 1e-4 mm^3 defect at r = 0.1 in a 6.5 mm band:
        # ring 0 RD = (pi 0.2^2 6.5 - 1e-4) / (pi 0.2^2 6.5)
        d = DefectRecord.from_volume((0.1, 0.0, 15.0), 1e-4)
        p = ring_profile([d], radius=1.5, dr=0.2, band=(14.0, 20.5))
        v_ring = math.pi * 0.04 * 6.5
        assert p.relative_density[0] == pytest.approx(
            (v_ring - 1e-4) / v_ring, rel=1e-12)
        assert p.relative_density[0] == pytest.approx(0.9998776, abs=5e-7)
        assert np.all(p.relative_density[1:] == 1.0)

    def test_nominal_geometry_eight_rings(self):
        p = ring_profile([], radius=1.5, dr=0.2, band=(0, 1))
        assert p.n_rings == 8
        assert p.r_inner[-1] == pytest.approx(1.4)
        assert p.r_outer[-1] == pytest.approx(1.5)

    def test_ring_volumes_sum_to_cylinder(self):
        p = ring_profile([], radius=1.5, dr=0.2, band=(14.0, 20.5))
        assert p.ring_volume.sum() == pytest.approx(
            math.pi * 1.5 ** 2 * 6.5, rel=1e-12)

    def test_density_definition_exact(self):
        rng = np.random.default_rng(3)
        defects = random_defects(rng, 200)
        p = ring_profile(defects, radius=1.5, dr=0.2, band=(0.0, 6.5))
        lhs = p.relative_density * p.ring_volume + p.defect_volume
        assert np.allclose(lhs, p.ring_volume, rtol=1e-12)

    def test_permutation_and_rotation_invariance(self):
        rng = np.random.default_rng(4)
        defects = random_defects(rng, 150)
        base = ring_profile(defects, radius=1.5, dr=0.2, band=(0.0, 6.5))
        perm = list(defects)
        rng.shuffle(perm)
        assert np.array_equal(
            base.relative_density,
            ring_profile(perm, radius=1.5, dr=0.2, band=(0.0, 6.5)).relative_density)
        ang = 1.234
        c, s = math.cos(ang), math.sin(ang)
        rotated = [DefectRecord.from_volume(
            (c * d.centroid[0] - s * d.centroid[1],
             s * d.centroid[0] + c * d.centroid[1], d.centroid[2]), d.volume)
            for d in defects]
        rot = ring_profile(rotated, radius=1.5, dr=0.2, band=(0.0, 6.5))
        assert np.allclose(rot.relative_density, base.relative_density, rtol=1e-9)

    def test_voxel_oracle_agreement(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            defects = random_defects(rng, 120)
            p = ring_profile(defects, radius=1.5, dr=0.2, band=(0.0, 6.5))
            oracle = voxel_oracle_defect_volumes(defects, 1.5, 0.2, (0.0, 6.5))
            rd_oracle = (p.ring_volume - oracle) / p.ring_volume
            assert np.allclose(p.relative_density, rd_oracle, rtol=1e-9, atol=0)

    def test_overflow_bucket(self):
        d = DefectRecord.from_volume((2.0, 0.0, 0.5), 1e-5)
        p = ring_profile([d], radius=1.5, dr=0.2, band=(0.0, 1.0))
        assert p.overflow_count == 1
        assert p.overflow_volume == pytest.approx(1e-5)
        assert np.all(p.relative_density == 1.0)

    def test_band_is_half_open(self):
        d_in = DefectRecord.from_volume((0.1, 0.0, 0.0), 1e-5)
        d_out = DefectRecord.from_volume((0.1, 0.0, 1.0), 1e-5)
        p = ring_profile([d_in, d_out], radius=1.5, dr=0.2, band=(0.0, 1.0))
        assert p.defect_volume[0] == pytest.approx(1e-5)


class TestBandCompare:
    def test_z_shifted_sets_identical(self):
        rng = np.random.default_rng(6)
        low = random_defects(rng, 80, z=(14.0, 20.5))
        high = [DefectRecord.from_volume(
            (d.centroid[0], d.centroid[1], d.centroid[2] + 30.0), d.volume)
            for d in low]
        profiles = band_compare(low + high, [(14.0, 20.5), (44.0, 50.5)])
        assert np.allclose(profiles[0].relative_density,
                           profiles[1].relative_density, rtol=1e-12)

    def test_defects_only_in_first_band(self):
        rng = np.random.default_rng(7)
        low = random_defects(rng, 50, z=(14.0, 20.5))
        profiles = band_compare(low, [(14.0, 20.5), (44.0, 50.5)])
        assert profiles[0].defect_volume.sum() > 0
        assert np.all(profiles[1].relative_density == 1.0)

    def test_edge_depleted_fixture_shows_rising_rd(self):
        # put pores only in the inner half: outer rings must beat inner rings
        rng = np.random.default_rng(8)
        defects = []
        for _ in range(300):
            r = 0.7 * math.sqrt(rng.random())
            phi = rng.uniform(0, 2 * math.pi)
            defects.append(DefectRecord.from_volume(
                (r * math.cos(phi), r * math.sin(phi), rng.uniform(0, 6.5)), 5e-5))
        for band in [(0.0, 3.0), (3.0, 6.5)]:
            p = ring_profile(defects, radius=1.5, dr=0.2, band=band)
            assert p.relative_density[5:].mean() > p.relative_density[:3].mean()

    def test_overlapping_bands_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            band_compare([], [(0.0, 2.0), (1.0, 3.0)])


def flat_metric_map(value=0.0, cell=0.1, half=1.8):
    n = int(2 * half / cell)
    return SurfaceMetricMap(values=np.full((n, n), float(value)),
                            cell_mm=cell, origin_mm=(-half, -half))


class TestSynthDefects:
    def test_k_zero_homogeneous_rate(self):
        m = flat_metric_map(value=123.0)
        defects = synth_defects(m, RateModel(p0=40.0, k=0.0), seed=1,
                                radius=1.5, z_range=(0.0, 2.0))
        volume = math.pi * 1.5 ** 2 * 2.0
        n = len(defects)
        # Poisson(40 * V): mean ~565, sd ~24
        assert abs(n - 40.0 * volume) < 5 * math.sqrt(40.0 * volume)
        # uniform in angle: quadrant counts roughly equal
        quad = sum(1 for d in defects if d.centroid[0] > 0 and d.centroid[1] > 0)
        assert abs(quad - n / 4) < 5 * math.sqrt(n / 4)

    def test_large_metric_with_large_k_suppresses(self):
        m = flat_metric_map(value=10.0)
        defects = synth_defects(m, RateModel(p0=40.0, k=10.0), seed=1,
                                radius=1.5, z_range=(0.0, 2.0))
        assert len(defects) == 0

    def test_deterministic_under_seed(self):
        m = flat_metric_map(value=0.5)
        a = synth_defects(m, RateModel(p0=30.0, k=0.3), seed=42, radius=1.5,
                          z_range=(0.0, 1.0))
        b = synth_defects(m, RateModel(p0=30.0, k=0.3), seed=42, radius=1.5,
                          z_range=(0.0, 1.0))
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert x.centroid == y.centroid
            assert x.volume == y.volume

    def test_all_defects_inside_footprint_and_band(self):
        m = flat_metric_map()
        defects = synth_defects(m, RateModel(p0=50.0, k=0.0), seed=3,
                                radius=1.5, z_range=(14.0, 20.5))
        for d in defects:
            assert math.hypot(d.centroid[0], d.centroid[1]) <= 1.5 + 0.15
            assert 14.0 <= d.centroid[2] < 20.5

    def test_map_must_cover_footprint(self):
        small = SurfaceMetricMap(values=np.zeros((5, 5)), cell_mm=0.1,
                                 origin_mm=(-0.25, -0.25))
        with pytest.raises(ValueError, match="footprint"):
            synth_defects(small, RateModel(p0=10.0, k=0.0), seed=1, radius=1.5)

    def test_edge_elevated_metric_raises_edge_rd(self):
        # metric grows with radius -> fewer pores at the edge -> RD rises
        cell, half = 0.05, 1.8
        n = int(2 * half / cell)
        xs = -half + (np.arange(n) + 0.5) * cell
        r = np.hypot(xs[:, None], xs[None, :])
        m = SurfaceMetricMap(values=np.clip((r - 0.6) / 0.9, 0, 1) * 6.0,
                             cell_mm=cell, origin_mm=(-half, -half))
        wins = 0
        for seed in range(30):
            defects = synth_defects(m, RateModel(p0=400.0, k=0.8), seed=seed,
                                    radius=1.5, z_range=(0.0, 6.5),
                                    volume_median=2e-5)
            p = ring_profile(defects, radius=1.5, dr=0.2, band=(0.0, 6.5))
            rd = p.relative_density[3:8]
            rho = np.corrcoef(np.argsort(np.argsort(rd)), np.arange(len(rd)))[0, 1]
            wins += rho > 0
        assert wins >= 29

"""Composed simulation studies driven by a :class:`RunConfig`.

``build_study`` scans a full multi-layer cylinder while recording the
photodiode signal and the per-cell melt dwell; ``two_pass_probe_study``
runs the four-probe / two-pass geometry that contrasts center and edge
thermal histories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import thermal as th
from .config import RunConfig
from .scanpath import CircleDomain, ScanPattern, ScanSegment, generate_build
from .signal import SignalSeries, make_photodiode_sampler
from .thermal import LaserState, max_stable_dt, uniform_field
from .thermal.probes import ProbeHistory, longest_above

__all__ = ["BuildStudyResult", "ProbeStudyResult", "build_study",
           "two_pass_probe_study", "PROBE_NAMES"]

PROBE_NAMES = ("center_a", "edge_approach", "edge_departure", "center_b")


@dataclass
class BuildStudyResult:
    patterns: list[ScanPattern]
    series: SignalSeries
    liquidus_map: th.SurfaceMetricMap
    field: th.ThermalField
    origin_mm: tuple[float, float]
    deposited_energy: float


@dataclass
class ProbeStudyResult:
    histories: list[ProbeHistory]      # ordered as PROBE_NAMES
    pattern: ScanPattern
    longest_above_liquidus: list[float]
    turn_x: float

    def history(self, name: str) -> ProbeHistory:
        return self.histories[PROBE_NAMES.index(name)]


def _laser_from(cfg: RunConfig) -> LaserState:
    return LaserState(
        focus=(0.0, 0.0, 0.0),
        power=cfg.get("machine", "laser_power"),
        r_spot=cfg.get("machine", "spot_radius") * 1e-6,
        absorptivity=cfg.get("solver", "absorptivity"),
    )


def build_study(cfg: RunConfig, layers: int | None = None,
                backend: str | None = None) -> BuildStudyResult:
    """Multi-layer cylinder scan with signal and melt-dwell recording."""
    machine = cfg.machine()
    material = cfg.material()
    radius = cfg.get("domain", "radius")
    margin = cfg.get("solver", "margin")
    dx = cfg.get("solver", "dx_build") * 1e-6
    half = radius + margin
    n_lateral = max(int(round(2 * half * 1e-3 / dx)), 2)
    nz = max(int(round(cfg.get("solver", "substrate_depth") * 1e-3 / dx)), 2)
    origin_mm = (-half, -half)

    field = uniform_field(n_lateral, n_lateral, nz, dx,
                          cfg.get("solver", "initial_temperature"), material,
                          boundary=cfg.boundary())
    patterns = generate_build(machine, CircleDomain((0.0, 0.0), radius),
                              layers or cfg.get("domain", "layers"),
                              dead_time=cfg.get("domain", "dead_time"))
    sampler = make_photodiode_sampler(
        r_fov=cfg.get("signal", "fov_radius") * 1e-6,
        gain=cfg.get("signal", "gain"),
        noise_sigma=cfg.get("signal", "noise_sigma"),
        rng=np.random.default_rng(cfg.get("run", "seed")))
    res = th.run(
        patterns, field, _laser_from(cfg),
        sample_dt=cfg.get("signal", "sample_dt_build"),
        origin_mm=origin_mm,
        dt=cfg.get("solver", "safety_factor") * max_stable_dt(field),
        settle_time=cfg.get("solver", "settle_time"),
        photodiode=sampler,
        track_liquidus=True,
        backend=backend)
    return BuildStudyResult(
        patterns=patterns,
        series=SignalSeries.from_samples(res.samples),
        liquidus_map=res.liquidus_map,
        field=res.field,
        origin_mm=origin_mm,
        deposited_energy=res.deposited_energy)


def two_pass_pattern(cfg: RunConfig, x0: float, y_a: float) -> ScanPattern:
    """Out-and-back pair of hatch lines with a laser-off turn between them."""
    machine = cfg.machine()
    v = machine.scan_speed
    length = cfg.get("solver", "probe_line_length")
    hatch = machine.hatch_distance
    x1 = x0 + length
    y_b = y_a + hatch
    dt_line = length / v
    dt_turn = hatch / v
    segs = (
        ScanSegment((x0, y_a), (x1, y_a), 0.0, dt_line, laser_on=True),
        ScanSegment((x1, y_a), (x1, y_b), dt_line, dt_line + dt_turn, laser_on=False),
        ScanSegment((x1, y_b), (x0, y_b), dt_line + dt_turn,
                    2 * dt_line + dt_turn, laser_on=True),
    )
    return ScanPattern(layer_index=0, z=0.0, angle=0.0, segments=segs)


def two_pass_probe_study(cfg: RunConfig, backend: str | None = None) -> ProbeStudyResult:
    """Four probes against a direct plus nearby-return pass.

    Probes sit on the two hatch lines: two mid-line (direct pass then a
    neighbor pass, and vice versa) and two near the turn where the passes
    follow each other closely (approach side: direct then post-heating;
    departure side: pre-heating then direct).
    """
    material = cfg.material()
    machine = cfg.machine()
    dx = cfg.get("solver", "dx_probe") * 1e-6
    length = cfg.get("solver", "probe_line_length")
    hatch = machine.hatch_distance
    d_edge = cfg.get("solver", "probe_edge_offset")

    x_margin = 0.25
    lx = length + 2 * x_margin
    ly = 2.0
    lz = 0.2
    nx = max(int(round(lx * 1e-3 / dx)), 2)
    ny = max(int(round(ly * 1e-3 / dx)), 2)
    nz = max(int(round(lz * 1e-3 / dx)), 2)

    y_a = ly / 2 - hatch / 2
    pattern = two_pass_pattern(cfg, x_margin, y_a)
    x1 = x_margin + length
    xc = x_margin + length / 2
    y_b = y_a + hatch
    z_top = nz * dx * 1e3
    probes = [
        (xc, y_a, z_top),           # center_a
        (x1 - d_edge, y_a, z_top),  # edge_approach
        (x1 - d_edge, y_b, z_top),  # edge_departure
        (xc, y_b, z_top),           # center_b
    ]

    field = uniform_field(nx, ny, nz, dx,
                          cfg.get("solver", "initial_temperature"), material,
                          boundary=cfg.boundary())
    res = th.run(
        [pattern], field, _laser_from(cfg),
        probes_mm=probes,
        sample_dt=cfg.get("signal", "sample_dt_probe"),
        dt=cfg.get("solver", "safety_factor") * max_stable_dt(field),
        settle_time=cfg.get("solver", "settle_time"),
        backend=backend)
    longest = [longest_above(h.times, h.temperatures, material.t_liquidus)
               for h in res.histories]
    return ProbeStudyResult(histories=res.histories, pattern=pattern,
                            longest_above_liquidus=longest, turn_x=x1)

"""Run configuration: a single key-value text file with strict validation.

The file uses INI sections; every key has a documented default, so the
end-to-end study runs with no arguments.  Parsing rejects unknown sections
and keys and reports *all* violated invariants at once, never just the
first.  Serialization is canonical (fixed order, repr floats), so
parse -> serialize -> parse is the identity and the serialized text can be
hashed for provenance.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass

from .scanpath import CircleDomain, MachineParams
from .thermal import BoundarySpec, FaceCondition, MaterialProps

__all__ = ["ConfigError", "RunConfig", "default_config", "parse_config",
           "serialize_config", "config_hash"]


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _band_list(text: str) -> list[tuple[float, float]]:
    bands = []
    for part in text.split(","):
        lo, _, hi = part.strip().partition(":")
        bands.append((float(lo), float(hi)))
    return bands


def _band_text(bands: list[tuple[float, float]]) -> str:
    return ",".join(f"{lo!r}:{hi!r}" for lo, hi in bands)


# schema: section -> key -> (parser, default, unit note)
SCHEMA: dict[str, dict[str, tuple]] = {
    "machine": {
        "laser_power": (float, 170.0, "W"),
        "scan_speed": (float, 1085.0, "mm/s"),
        "hatch_distance": (float, 0.1, "mm"),
        "layer_thickness": (float, 0.02, "mm"),
        "rotation_increment": (float, 67.0, "deg per layer"),
        "spot_radius": (float, 80.0, "um, 1/e^2 radius"),
        "base_angle": (float, 0.0, "deg"),
    },
    "material": {
        "density": (float, 7800.0, "kg/m^3"),
        "conductivity": (float, 13.8, "W/(m K)"),
        "heat_capacity": (float, 460.0, "J/(kg K)"),
        "solidus": (float, 1677.0, "K"),
        "liquidus": (float, 1713.0, "K"),
        "latent_heat": (float, 247000.0, "J/kg"),
    },
    "domain": {
        "radius": (float, 1.5, "mm part footprint"),
        "layers": (int, 20, "count"),
        "dead_time": (float, 0.0, "s between layers"),
    },
    "solver": {
        "dx_build": (float, 50.0, "um, multi-layer study grid"),
        "dx_probe": (float, 10.0, "um, two-pass probe study grid"),
        "safety_factor": (float, 0.4, "fraction of the stability bound"),
        "absorptivity": (float, 0.35, "coupling efficiency"),
        "initial_temperature": (float, 373.15, "K"),
        "boundary_bottom": (str, "fixed:373.15", "adiabatic | fixed:<K>"),
        "boundary_sides": (str, "adiabatic", "adiabatic | fixed:<K>"),
        "boundary_top": (str, "adiabatic", "adiabatic | fixed:<K>"),
        "substrate_depth": (float, 0.3, "mm below the scanned surface"),
        "margin": (float, 0.2, "mm lateral margin around the part"),
        "probe_line_length": (float, 2.0, "mm, two-pass study"),
        "probe_edge_offset": (float, 0.1, "mm from the turn"),
        "settle_time": (float, 0.0008, "s cooldown after the last segment"),
    },
    "signal": {
        "fov_radius": (float, 240.0, "um"),
        "gain": (float, 0.0166, "units m^-2 K^-4 (steady pass ~ 10000 units)"),
        "sample_dt_build": (float, 4e-05, "s"),
        "sample_dt_probe": (float, 5e-06, "s"),
        "threshold": (float, 12000.0, "units"),
        "direction": (str, "above", "above | below"),
        "noise_sigma": (float, 0.0, "units, additive Gaussian"),
        "map_cell": (float, 0.15, "mm"),
        "map_statistic": (str, "max", "max | mean | sum"),
    },
    "analysis": {
        "ring_dr": (float, 0.2, "mm"),
        "bands": (_band_list, [(14.0, 20.5), (44.0, 50.5)], "mm, lo:hi[,lo:hi...]"),
        "eps": (float, 0.55, "clustering radius"),
        "min_samples": (int, 5, "clustering density"),
        "window": (int, 10, "samples per anomaly window"),
        "turn_radius": (float, 0.35, "mm"),
        "defect_p0": (float, 300.0, "pores per mm^3"),
        "defect_k": (float, 600.0, "per second of melt dwell"),
        "defect_volume_median": (float, 1e-05, "mm^3"),
        "defect_volume_sigma": (float, 0.5, "lognormal sigma"),
    },
    "run": {
        "seed": (int, 1234, "rng seed"),
    },
}


@dataclass
class RunConfig:
    """Validated configuration values, nested as ``values[section][key]``."""

    values: dict[str, dict[str, object]]

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    def get(self, section: str, key: str):
        return self.values[section][key]

    # -- typed views ---------------------------------------------------------

    def machine(self) -> MachineParams:
        m = self.values["machine"]
        return MachineParams(
            laser_power=m["laser_power"], scan_speed=m["scan_speed"],
            hatch_distance=m["hatch_distance"], layer_thickness=m["layer_thickness"],
            rotation_increment=m["rotation_increment"], spot_radius=m["spot_radius"],
            base_angle=m["base_angle"])

    def material(self) -> MaterialProps:
        m = self.values["material"]
        return MaterialProps(
            density=m["density"], conductivity=m["conductivity"],
            heat_capacity=m["heat_capacity"], t_solidus=m["solidus"],
            t_liquidus=m["liquidus"], latent_heat=m["latent_heat"])

    def part_domain(self) -> CircleDomain:
        return CircleDomain(center=(0.0, 0.0), radius=self.values["domain"]["radius"])

    def boundary(self) -> BoundarySpec:
        s = self.values["solver"]
        sides = FaceCondition.parse(s["boundary_sides"])
        return BoundarySpec(
            x_lo=sides, x_hi=sides, y_lo=sides, y_hi=sides,
            z_lo=FaceCondition.parse(s["boundary_bottom"]),
            z_hi=FaceCondition.parse(s["boundary_top"]))


def default_config() -> RunConfig:
    values = {sec: {k: spec[1] for k, spec in keys.items()}
              for sec, keys in SCHEMA.items()}
    return RunConfig(values=values)


def _validate(values: dict, problems: list[str]) -> None:
    cfg = RunConfig(values=values)
    for builder in (cfg.machine, cfg.material, cfg.part_domain, cfg.boundary):
        try:
            builder()
        except ValueError as exc:
            problems.append(str(exc))

    def positive(section, key):
        if not values[section][key] > 0:
            problems.append(f"[{section}] {key} must be > 0, "
                            f"got {values[section][key]!r}")

    for sec, key in [("domain", "layers"), ("solver", "dx_build"),
                     ("solver", "dx_probe"), ("solver", "substrate_depth"),
                     ("solver", "probe_line_length"), ("signal", "fov_radius"),
                     ("signal", "gain"), ("signal", "sample_dt_build"),
                     ("signal", "sample_dt_probe"), ("signal", "map_cell"),
                     ("analysis", "ring_dr"), ("analysis", "eps"),
                     ("analysis", "min_samples"), ("analysis", "turn_radius"),
                     ("analysis", "defect_volume_median")]:
        positive(sec, key)
    if values["domain"]["dead_time"] < 0:
        problems.append("[domain] dead_time must be >= 0")
    if not 0 < values["solver"]["safety_factor"] <= 1:
        problems.append("[solver] safety_factor must be in (0, 1]")
    if not 0 < values["solver"]["absorptivity"] <= 1:
        problems.append("[solver] absorptivity must be in (0, 1]")
    if values["signal"]["direction"] not in ("above", "below"):
        problems.append("[signal] direction must be 'above' or 'below'")
    if values["signal"]["map_statistic"] not in ("max", "mean", "sum"):
        problems.append("[signal] map_statistic must be max, mean or sum")
    if values["signal"]["noise_sigma"] < 0:
        problems.append("[signal] noise_sigma must be >= 0")
    if values["analysis"]["window"] < 2:
        problems.append("[analysis] window must be >= 2")
    for lo, hi in values["analysis"]["bands"]:
        if not hi > lo:
            problems.append(f"[analysis] band {lo!r}:{hi!r} must have hi > lo")
    spans = sorted(values["analysis"]["bands"])
    for (lo0, hi0), (lo1, _) in zip(spans, spans[1:]):
        if lo1 < hi0:
            problems.append("[analysis] bands must not overlap")


def parse_config(source) -> RunConfig:
    """Parse and validate a config file (path or text).

    Unknown sections/keys, type errors, and invariant violations are all
    collected into one :class:`ConfigError`.
    """
    parser = configparser.ConfigParser(interpolation=None)
    text = source if isinstance(source, str) and "\n" in source else None
    try:
        if text is not None:
            parser.read_string(text)
        else:
            with open(source) as fh:
                parser.read_file(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config file: {exc}"]) from exc
    except configparser.Error as exc:
        raise ConfigError([f"config syntax error: {exc}"]) from exc

    problems: list[str] = []
    values = {sec: {k: spec[1] for k, spec in keys.items()}
              for sec, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                problems.append(f"unknown key [{section}] {key}")
                continue
            caster = SCHEMA[section][key][0]
            try:
                values[section][key] = caster(raw)
            except (ValueError, TypeError):
                problems.append(f"[{section}] {key}: cannot parse {raw!r}")
    if not problems:
        _validate(values, problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(values=values)


def serialize_config(cfg: RunConfig) -> str:
    out = io.StringIO()
    for section, keys in SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, spec in keys.items():
            v = cfg.values[section][key]
            if spec[0] is _band_list:
                text = _band_text(v)
            elif spec[0] is float:
                text = repr(float(v))
            else:
                text = str(v)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:12]

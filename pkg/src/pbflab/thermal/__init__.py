"""Transient 3-D heat conduction with a moving Gaussian surface source.

The mushy-zone latent heat is handled with an apparent heat capacity whose
bump integrates exactly to the latent heat of fusion; time stepping is an
explicit stencil update in specific-enthalpy form.  The per-step kernel has
a compiled (Cython) and a NumPy implementation, selected at import.
"""

from .material import (
    MaterialProps,
    DEFAULT_MATERIAL,
    apparent_heat_capacity,
    specific_enthalpy,
    temperature_from_enthalpy,
)
from .field import (
    FaceCondition,
    BoundarySpec,
    ThermalField,
    LaserState,
    uniform_field,
)
from .source import source_flux
from .stepper import (
    StabilityError,
    ThermalRunResult,
    SurfaceMetricMap,
    available_backends,
    get_backend_name,
    max_stable_dt,
    default_dt,
    step,
    run,
)
from .probes import (
    ProbeHistory,
    ProbeMetrics,
    probe_metrics,
    measure_above,
    integral_above,
    longest_above,
)

__all__ = [
    "MaterialProps",
    "DEFAULT_MATERIAL",
    "apparent_heat_capacity",
    "specific_enthalpy",
    "temperature_from_enthalpy",
    "FaceCondition",
    "BoundarySpec",
    "ThermalField",
    "LaserState",
    "uniform_field",
    "source_flux",
    "StabilityError",
    "ThermalRunResult",
    "SurfaceMetricMap",
    "available_backends",
    "get_backend_name",
    "max_stable_dt",
    "default_dt",
    "step",
    "run",
    "ProbeHistory",
    "ProbeMetrics",
    "probe_metrics",
    "measure_above",
    "integral_above",
    "longest_above",
]

"""Desk-scale laser powder bed fusion laboratory.

Subsystems: hatch scan path generation (`scanpath`), transient thermal
simulation with a moving Gaussian surface source (`thermal`), on-axis
photodiode signal synthesis and intensity maps (`signal`), radial porosity
profiling (`porosity`), and anomaly-window clustering (`cluster`).
"""

__version__ = "0.1.0"

"""Geometric shaping of constant-modulus 4D modulation formats.

Library layout:

- ``constellation``: the labeled-constellation value type, normalization,
  moments, distance spectra, Gray checks, orthant symmetry, file I/O.
- ``formats``: the parametric ring-switching family and baseline formats.
- ``air``: achievable-rate estimators for the AWGN channel.
- ``optimize``: joint coordinates-and-labeling optimization and the
  two-parameter family sweep.
- ``link``: analytic multi-span link model with modulation-dependent
  nonlinear interference.
- ``cli``: the ``prs4d`` command-line front-end.
"""

from .air import AirEstimate, AwgnSpec, gmi_approx, gmi_mc, mi_mc, snr_gain_at_rate
from .constellation import (
    DistanceSpectrum,
    LabeledConstellation,
    MomentSet,
    distance_spectrum,
    gray_check,
    is_constant_modulus,
    moment_set,
    normalize,
    orthant_expand,
    project_2d,
    read_constellation,
    standardized_moment,
    write_constellation,
)
from .formats import PrsParams, by_name, prs_from_params, table1_reference
from .link import LinkSpec, air_vs_distance, effective_snr, optimal_launch_power
from .optimize import OptimizerConfig, OptTrace, joint_optimize, prs_param_sweep

__all__ = [
    "AirEstimate",
    "AwgnSpec",
    "DistanceSpectrum",
    "LabeledConstellation",
    "LinkSpec",
    "MomentSet",
    "OptTrace",
    "OptimizerConfig",
    "PrsParams",
    "air_vs_distance",
    "by_name",
    "distance_spectrum",
    "effective_snr",
    "gmi_approx",
    "gmi_mc",
    "gray_check",
    "is_constant_modulus",
    "joint_optimize",
    "mi_mc",
    "moment_set",
    "normalize",
    "optimal_launch_power",
    "orthant_expand",
    "prs_from_params",
    "prs_param_sweep",
    "project_2d",
    "read_constellation",
    "snr_gain_at_rate",
    "standardized_moment",
    "table1_reference",
    "write_constellation",
]

__version__ = "0.1.0"

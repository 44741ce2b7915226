"""Simplified TDMR channel: 2-D interference with edge-jitter noise.

Symmetric mutual information by exact summation, Monte Carlo and
quadrature, plus exact ML detection.
"""

from tdmr.lattice import MAX_CELLS, GridTopology, build_grid, interference_matrix
from tdmr.channel import ChannelParams, covariance_matrix, sample_readback
from tdmr.density import (
    FactoredCovariance,
    PatternTable,
    build_pattern_table,
    factor_covariance,
    log_conditional_density,
    mixture_log_density,
)
from tdmr.detector import DecisionRaster, decision_raster, distance, ml_detect
from tdmr.infotheory import (
    MIEstimate,
    QuadratureSpec,
    conditional_entropy,
    mc_symmetric_mi,
    quad_symmetric_mi,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_CELLS",
    "GridTopology",
    "build_grid",
    "interference_matrix",
    "ChannelParams",
    "covariance_matrix",
    "sample_readback",
    "FactoredCovariance",
    "PatternTable",
    "build_pattern_table",
    "factor_covariance",
    "log_conditional_density",
    "mixture_log_density",
    "DecisionRaster",
    "decision_raster",
    "distance",
    "ml_detect",
    "MIEstimate",
    "QuadratureSpec",
    "conditional_entropy",
    "mc_symmetric_mi",
    "quad_symmetric_mi",
    "sweep",
]

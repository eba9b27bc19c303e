"""Search-free wideband direction-of-arrival estimation with annihilating filters.

The main entry points are :func:`frida.estimators.frida` and the baselines
:func:`frida.estimators.music` and :func:`frida.estimators.srp_phat`, which
share one ``(snapshots, geometry, bands, K)`` interface.
"""

from .errors import DegenerateMappingError, FridaError, NumericalFailure, ParameterError
from .estimators import ESTIMATORS, EstimatorResult, frida, get_estimator, music, srp_phat
from .geometry import ArrayGeometry, build_triangular_array, load_geometry
from .metrics import circular_distance, circular_mean_spread, match_and_score
from .sim import SourceScenario, add_noise, read_wav, simulate_farfield
from .solver import DoaEstimate, SolverConfig, solve
from .spectral import estimate_visibilities, select_bands, stft

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "DegenerateMappingError",
    "DoaEstimate",
    "ESTIMATORS",
    "EstimatorResult",
    "FridaError",
    "NumericalFailure",
    "ParameterError",
    "SolverConfig",
    "SourceScenario",
    "add_noise",
    "build_triangular_array",
    "circular_distance",
    "circular_mean_spread",
    "estimate_visibilities",
    "frida",
    "get_estimator",
    "load_geometry",
    "match_and_score",
    "music",
    "read_wav",
    "select_bands",
    "simulate_farfield",
    "solve",
    "srp_phat",
    "stft",
]

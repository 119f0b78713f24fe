"""Joint direction-of-arrival estimation and distorted-sensor detection.

The measurement model is ``Y = (I + diag(gamma)) A S + N`` for a uniform
linear array with a few sensors carrying unknown gain/phase errors
``gamma``.  :func:`decomposer.run` recovers ``Z = A S`` and ``gamma`` jointly,
:mod:`doa` runs MUSIC on ``Z`` and :mod:`detector` flags the distorted sensors.
"""

from ._validation import DimensionError, DomainError, InvalidInputError
from .array import ArrayConfig, ArrayScenario, generate_scenario, steering_vector
from .decomposer import DecompositionResult, NumericalError, SolverParams, run, run_normalized
from .detector import DetectionReport, detect
from .doa import DoaEstimate, SpectrumGrid, estimate_doas, music_spectrum
from .estimator import DistortedArrayDOA, EntangledDecomposition

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig",
    "ArrayScenario",
    "DecompositionResult",
    "DetectionReport",
    "DimensionError",
    "DistortedArrayDOA",
    "DoaEstimate",
    "DomainError",
    "EntangledDecomposition",
    "InvalidInputError",
    "NumericalError",
    "SolverParams",
    "SpectrumGrid",
    "detect",
    "estimate_doas",
    "generate_scenario",
    "music_spectrum",
    "run",
    "run_normalized",
    "steering_vector",
]

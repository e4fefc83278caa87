"""Movable frequency diverse array (MFDA) secrecy-capacity optimization.

The package is organised bottom-up:

* :mod:`mfda.numerics` -- Hermitian eigen-solvers with a canonical phase.
* :mod:`mfda.channel` -- array geometry, path loss and LoS channels.
* :mod:`mfda.beamforming` -- closed-form beamformer and capacities.
* :mod:`mfda.majorization` -- cosine majorizers and BSUM sweeps.
* :mod:`mfda.robust` -- uncertainty grids, BCD line searches, SDR beamformer.
* :mod:`mfda.orchestrate` -- two-stage AO driver, schemes, time averaging.
* :mod:`mfda.config` / :mod:`mfda.experiment` / :mod:`mfda.cli` -- experiments.
"""

from mfda.errors import (
    DecouplingError,
    DegenerateCurvatureError,
    InfeasibleGeometryError,
    InvariantError,
    MFDAError,
    NumericalError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "DecouplingError",
    "DegenerateCurvatureError",
    "InfeasibleGeometryError",
    "InvariantError",
    "MFDAError",
    "NumericalError",
    "ValidationError",
    "__version__",
]

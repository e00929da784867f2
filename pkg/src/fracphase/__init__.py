"""Solvers and diagnostics for time-fractional phase-field equations.

The package couples an interval-averaged variable-step discretization of
the fractional time derivative with a staggered algebraic relaxation of the
polynomial potential, for three flows: the mass-conserving relaxation flow
(``tfac_vc``), the conserved flux flow (``tfch``), and the pattern-forming
flow (``tfsh``).  See ``fracphase.driver.run`` for the library entry point
and ``fracphase.cli`` for the command-line interface.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .driver import RunResult, run
from .grids import PeriodicGrid
from .meshes import TemporalMesh, build_graded, build_uniform
from .models import ModelParams, ModelState, SolverConfig

__all__ = [
    "__version__",
    "ExperimentConfig",
    "load_config",
    "RunResult",
    "run",
    "PeriodicGrid",
    "TemporalMesh",
    "build_graded",
    "build_uniform",
    "ModelParams",
    "ModelState",
    "SolverConfig",
]

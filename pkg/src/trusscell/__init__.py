"""Inverse design of periodic multi-material truss-lattice unit cells.

Cylindrical bars are projected onto a voxel density field per candidate
material, the cell's effective elastic tensor comes from periodic
numerical homogenization, and bar endpoints plus per-material size
variables are optimized with MMA to extremize bulk modulus, shear
modulus, or Poisson's ratio under weight, discreteness,
mutual-exclusion, and symmetry-region constraints.
"""

from .aggregation import ks_max, ks_weights, lks_max, lks_weights, smooth_heaviside
from .config import ConfigError, RunConfig, load_config, parse_config
from .constraints import (
    ContinuationState,
    NoCutConstraint,
    discreteness,
    mutual_exclusion,
    weight_fraction,
)
from .design import DesignVector, initial_design
from .driver import (
    DriverError,
    Evaluation,
    IterationRecord,
    OptimizationProblem,
    OptimizationResult,
    check_gradients,
    homogenize_design,
    run_optimization,
)
from .export import export_design, read_vtk_density, write_bar_file, write_history, write_vtk_density
from .geometry import Bar, SampleWindow, bar_density, capsule_volume, signed_distance
from .grid import UnitCellGrid, build_grid
from .homogenization import (
    PeriodicOperator,
    SolverFailure,
    assemble_and_solve,
    bulk_modulus,
    effective_tensor,
    poisson_ratio,
    shear_modulus,
)
from .materials import MaterialSet, interpolate_elasticity, isotropic_stiffness
from .mma import MmaParams, MmaState, MmaSubproblemError, mma_update
from .projection import (
    ProjectionSettings,
    ProjectionState,
    effective_densities,
    material_weights,
    project_field,
)
from .symmetry import SymmetryGroup, reflect_to_reference, replicate_bars

__version__ = "0.1.0"

__all__ = [
    "Bar",
    "ConfigError",
    "ContinuationState",
    "DesignVector",
    "DriverError",
    "Evaluation",
    "IterationRecord",
    "MaterialSet",
    "MmaParams",
    "MmaState",
    "MmaSubproblemError",
    "NoCutConstraint",
    "OptimizationProblem",
    "OptimizationResult",
    "PeriodicOperator",
    "ProjectionSettings",
    "ProjectionState",
    "RunConfig",
    "SampleWindow",
    "SolverFailure",
    "SymmetryGroup",
    "UnitCellGrid",
    "assemble_and_solve",
    "bar_density",
    "build_grid",
    "bulk_modulus",
    "capsule_volume",
    "check_gradients",
    "discreteness",
    "effective_densities",
    "effective_tensor",
    "export_design",
    "homogenize_design",
    "initial_design",
    "interpolate_elasticity",
    "isotropic_stiffness",
    "ks_max",
    "ks_weights",
    "lks_max",
    "lks_weights",
    "load_config",
    "material_weights",
    "mma_update",
    "mutual_exclusion",
    "parse_config",
    "poisson_ratio",
    "project_field",
    "read_vtk_density",
    "reflect_to_reference",
    "replicate_bars",
    "run_optimization",
    "shear_modulus",
    "signed_distance",
    "smooth_heaviside",
    "weight_fraction",
    "write_bar_file",
    "write_history",
    "write_vtk_density",
]

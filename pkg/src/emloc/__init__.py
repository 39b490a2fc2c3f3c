"""Localized electromagnetic fields driven from a partial boundary.

Edge-element solver for the time-harmonic Maxwell system on boxes, with
virtual measurement operators, energy-ratio localization and Tikhonov
Runge approximation built on top.
"""

from .errors import (
    ConfigError,
    EigenSolverError,
    EllipticityError,
    EmlocError,
    EmptyGammaError,
    EmptyRegionError,
    InvalidArgumentError,
    OutputError,
    ResonanceError,
)
from .fem import FieldPair, assemble, assemble_rhs, build_dofmap, local_matrices
from .localization import (
    LocalizationResult,
    localized_sequence,
    max_ratio,
    run_localization,
    verify_range_lemma,
)
from .materials import MaterialField, check_ellipticity, eval_material
from .measurement import (
    MeasurementOperator,
    apply_L,
    apply_L_adjoint,
    assemble_measurement_matrix,
)
from .mesh import Mesh, RegionSpec, build_box_mesh, select_region, tag_boundary_patch, whole_boundary
from .oracles import PlaneWave, manufactured_sources, plane_wave_fields
from .runge import RungeFit, runge_fit, runge_implies_localization, runge_sweep
from .solver import MaxwellProblem, check_nonresonance, find_resonances, solve

__all__ = [
    "ConfigError", "EigenSolverError", "EllipticityError", "EmlocError", "EmptyGammaError",
    "EmptyRegionError", "InvalidArgumentError", "OutputError", "ResonanceError",
    "FieldPair", "assemble", "assemble_rhs", "build_dofmap", "local_matrices",
    "LocalizationResult", "localized_sequence", "max_ratio", "run_localization", "verify_range_lemma",
    "MaterialField", "check_ellipticity", "eval_material",
    "MeasurementOperator", "apply_L", "apply_L_adjoint", "assemble_measurement_matrix",
    "Mesh", "RegionSpec", "build_box_mesh", "select_region", "tag_boundary_patch", "whole_boundary",
    "PlaneWave", "manufactured_sources", "plane_wave_fields",
    "RungeFit", "runge_fit", "runge_implies_localization", "runge_sweep",
    "MaxwellProblem", "check_nonresonance", "find_resonances", "solve",
]

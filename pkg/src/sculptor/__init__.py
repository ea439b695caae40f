"""Compositional 3D scene assembly: per-object rotation, scale and translation."""

from .compose import apply_params, compose, inpaint_mask, objects_mask
from .errors import FormatError, InputError, ManifestError, SculptorError, SolverError
from .geometry import BBox2, CompositionParams, DepthMap, PointCloud, ViewPose
from .rotation import RotationSolverConfig, solve_rotation
from .scale import ScaleInput, unified_scales
from .translation import AxisFactors, TranslationSolverConfig, axis_factors, solve_translation

__version__ = "0.1.0"

__all__ = [
    "AxisFactors",
    "BBox2",
    "CompositionParams",
    "DepthMap",
    "FormatError",
    "InputError",
    "ManifestError",
    "PointCloud",
    "RotationSolverConfig",
    "ScaleInput",
    "SculptorError",
    "SolverError",
    "TranslationSolverConfig",
    "ViewPose",
    "apply_params",
    "axis_factors",
    "compose",
    "inpaint_mask",
    "objects_mask",
    "solve_rotation",
    "solve_translation",
    "unified_scales",
]

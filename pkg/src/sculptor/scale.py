"""Unified scale calibration.

Each object's scale is the product of three ratios against the other
objects in the image:

    s_i = [max(W_i, H_i) / max_j max(W_j, H_j)]      2D box size
        * [diag_i / min_j diag_j]                     3D size
        * [D_i / min_j D_j]                           depth compensation

with W, H the object's 2D box in pixels, ``diag`` the asset's AABB
diagonal and ``D`` the mean depth under the object's mask.  The formula is
applied exactly as written, including the direction of the 3D factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SolverError
from .geometry import BBox2, DepthMap, check_mask

SCALE_FORMULAS = ("paper",)


@dataclass(frozen=True)
class ScaleConfig:
    scale_formula: str = "paper"

    def __post_init__(self):
        if self.scale_formula not in SCALE_FORMULAS:
            raise InputError(f"unknown scale_formula {self.scale_formula!r}")


@dataclass(frozen=True)
class ScaleInput:
    """One object's evidence for the scale formula."""

    bbox: BBox2
    diag: float
    mean_depth: float

    def __post_init__(self):
        if not (math.isfinite(self.diag) and self.diag > 0):
            raise InputError(f"object diagonal must be positive, got {self.diag}")
        if not (math.isfinite(self.mean_depth) and self.mean_depth > 0):
            raise InputError(f"mean depth must be positive, got {self.mean_depth}")


def mean_masked_depth(depth: DepthMap, mask) -> float:
    """Mean depth over pixels that are both masked and valid."""
    mask = check_mask(mask)
    if mask.shape != depth.shape:
        raise InputError(f"mask shape {mask.shape} does not match depth shape {depth.shape}")
    sel = mask & depth.valid
    if not sel.any():
        raise InputError("no valid depth under mask")
    return float(np.mean(depth.depth[sel]))


@dataclass(frozen=True)
class ScaleTerms:
    """The three factors of one object's scale; ``scale`` is their product."""

    size_2d: float
    size_3d: float
    depth: float

    @property
    def scale(self) -> float:
        return self.size_2d * self.size_3d * self.depth


def scale_terms(inputs) -> list[ScaleTerms]:
    inputs = list(inputs)
    if not inputs:
        raise InputError("scale calibration needs at least one object")
    max_dim = max(o.bbox.max_dim for o in inputs)
    min_diag = min(o.diag for o in inputs)
    min_depth = min(o.mean_depth for o in inputs)
    terms = [ScaleTerms(o.bbox.max_dim / max_dim, o.diag / min_diag, o.mean_depth / min_depth) for o in inputs]
    if not all(math.isfinite(t.scale) and t.scale > 0 for t in terms):
        raise SolverError("scale calibration overflowed")
    return terms


def unified_scales(inputs, cfg: ScaleConfig = ScaleConfig()) -> list[float]:
    """Per-object scales, in input order."""
    return [t.scale for t in scale_terms(inputs)]

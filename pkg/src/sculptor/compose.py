"""Mask set-algebra and final scene assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import BBox2, CompositionParams, DepthMap, PointCloud, check_mask, require_points, rotate_cloud
from .scale import ScaleInput, unified_scales
from .translation import AxisFactors, TranslationSolverConfig, solve_translation


def _masks(masks):
    masks = [check_mask(m) for m in masks]
    if not masks:
        raise InputError("need at least one mask")
    shape = masks[0].shape
    for k, m in enumerate(masks):
        if m.shape != shape:
            raise InputError(f"mask {k} has shape {m.shape}, expected {shape}")
    return masks


def inpaint_mask(i: int, boxes, masks) -> np.ndarray:
    """Union of the masks of the other objects whose boxes overlap box ``i``."""
    boxes = list(boxes)
    masks = _masks(masks)
    if len(boxes) != len(masks):
        raise InputError(f"{len(boxes)} boxes but {len(masks)} masks")
    if not 0 <= i < len(boxes):
        raise InputError(f"object index {i} out of range [0, {len(boxes)})")
    out = np.zeros_like(masks[0])
    for j, (b, m) in enumerate(zip(boxes, masks)):
        if j != i and b.intersects(boxes[i]):
            out |= m
    return out


def objects_mask(masks) -> np.ndarray:
    """Pixelwise union of all object masks."""
    masks = _masks(masks)
    out = np.zeros_like(masks[0])
    for m in masks:
        out |= m
    return out


def apply_params(cloud: PointCloud, params: CompositionParams) -> PointCloud:
    """Rotate about the centroid, scale about the origin, then translate.

    Assets are stored with their centroid at the origin, so the scale is
    applied about the object's own center and ``translation`` is where that
    center lands.
    """
    rotated = rotate_cloud(cloud, params.elevation, params.azimuth)
    pts = params.scale * rotated.points + np.asarray(params.translation)
    return rotated.with_points(pts)


@dataclass(frozen=True)
class GlobalAlignment:
    scale: float
    translation: tuple

    def to_dict(self):
        return {"scale": self.scale, "translation": list(self.translation), "rotation": None}


@dataclass(frozen=True)
class ComposedScene:
    ids: tuple
    params: tuple  # CompositionParams per object, before global alignment
    objects: tuple  # transformed object clouds, after global alignment
    merged: PointCloud
    scaffold: PointCloud | None = None
    global_alignment: GlobalAlignment | None = None

    def object_centroids(self) -> np.ndarray:
        return np.array([o.centroid for o in self.objects])

    def to_dict(self):
        return {
            "objects": [{"id": i, **p.to_dict()} for i, p in zip(self.ids, self.params)],
            "global": None if self.global_alignment is None else self.global_alignment.to_dict(),
            "points": len(self.merged),
            "scaffold_points": 0 if self.scaffold is None else len(self.scaffold),
        }


@dataclass(frozen=True)
class Evidence:
    """2D evidence of one object: its box and mask in the reference image."""

    bbox: BBox2
    mask: np.ndarray
    label: str = ""


def compose(
    assets,
    params,
    scaffold: PointCloud | None = None,
    evidence=None,
    factors: AxisFactors | None = None,
    depth: DepthMap | None = None,
    ids=None,
    cfg: TranslationSolverConfig = TranslationSolverConfig(),
) -> ComposedScene:
    """Place every asset, then align the collection with the scaffold.

    With a scaffold, the placed objects are treated as one entity: its scale
    comes from the unified-scale formula applied to that single entity and
    its translation from the translation solver run on the union of the
    object masks.  No rotation is applied to the collection.
    """
    assets, params = list(assets), list(params)
    if len(assets) != len(params):
        raise InputError(f"{len(assets)} assets but {len(params)} parameter sets")
    if not assets:
        raise InputError("nothing to compose")
    ids = tuple(ids) if ids is not None else tuple(str(k) for k in range(len(assets)))
    if len(ids) != len(assets):
        raise InputError("ids and assets differ in length")
    placed = [apply_params(a, p) for a, p in zip(assets, params)]

    alignment = None
    if scaffold is not None:
        require_points(scaffold)
        if evidence is None or factors is None or depth is None:
            raise InputError("global alignment needs evidence, axis factors and depth")
        evidence = list(evidence)
        if len(evidence) != len(assets):
            raise InputError(f"{len(evidence)} evidence entries for {len(assets)} assets")
        alignment = global_alignment(placed, evidence, factors, depth, cfg)
        placed = [
            o.with_points(alignment.scale * o.points + np.asarray(alignment.translation)) for o in placed
        ]

    parts = placed + ([scaffold] if scaffold is not None else [])
    return ComposedScene(ids, tuple(params), tuple(placed), PointCloud.concat(parts), scaffold, alignment)


def global_alignment(placed, evidence, factors: AxisFactors, depth: DepthMap, cfg) -> GlobalAlignment:
    """(scale, translation) of the placed collection against the scaffold.

    The collection is solved like a single object whose evidence is the
    union of the masks and boxes; give it its own frame by centering it.
    """
    union = PointCloud.concat(placed)
    center = union.centroid
    local = union.with_points(union.points - center)
    mask = objects_mask([e.mask for e in evidence])
    box = evidence[0].bbox
    for e in evidence[1:]:
        box = box.union(e.bbox)
    # Unified scale of one entity: every factor is its own max/min.
    diag = float(np.linalg.norm(local.points.max(axis=0) - local.points.min(axis=0)))
    scale = unified_scales([ScaleInput(box, max(diag, 1e-12), 1.0)])[0]
    res = solve_translation(box, mask, depth, local, scale, factors, cfg)
    # Collection point x maps to scale * (x - center) + t_entity.
    t = np.asarray(res.translation) - scale * center
    return GlobalAlignment(float(scale), tuple(float(v) for v in t))

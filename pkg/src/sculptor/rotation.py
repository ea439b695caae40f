"""Coarse-to-fine object rotation.

The coarse stage renders the asset from every pose of a C x C
(elevation, azimuth) grid and keeps the view whose descriptor is most
cosine-similar to the reference patch.  The fine stage minimizes
``1 - SSIM(render(e, a), reference)`` with Nelder-Mead, starting at the
coarse pose with a simplex of half a grid cell.

Both rendered views and the reference patch are brought to a common frame
before comparison: crop to the object's silhouette, composite over the
background, pad to a centered square and resize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from .errors import InputError, SolverError
from .geometry import BBox2, PointCloud, require_points
from .metrics import SsimConfig, cosine_similarity, get_descriptor, ssim
from .optimize import SimplexConfig, nelder_mead
from .render import RenderConfig, make_view_grid, orbit_pose, render_points


@dataclass(frozen=True)
class RotationSolverConfig:
    C: int = 24
    elevation_range: tuple = (-45.0, 45.0)
    descriptor: str = "builtin-patch"
    coarse_image_size: int = 128
    refine_image_size: int = 256
    coarse_splat_radius: float = 1.0
    refine_splat_radius: float = 2.0
    projection: str = "orthographic"
    background: float = 0.0
    refine_enabled: bool = True
    objective: str = "1-ssim"
    simplex: SimplexConfig = field(default_factory=lambda: SimplexConfig(max_iters=200, f_tol=1e-6, x_tol=1e-4))

    def __post_init__(self):
        if self.C < 2:
            raise InputError("C must be >= 2")
        lo, hi = self.elevation_range
        if not -90.0 <= lo < hi <= 90.0:
            raise InputError(f"invalid elevation range {self.elevation_range}")
        if min(self.coarse_image_size, self.refine_image_size) < 16:
            raise InputError("render image sizes must be >= 16")
        if self.objective != "1-ssim":
            raise InputError(f"unsupported rotation objective {self.objective!r}")
        object.__setattr__(self, "elevation_range", (float(lo), float(hi)))


@dataclass(frozen=True)
class RotationEstimate:
    coarse: tuple
    refined: tuple
    coarse_score: float
    refined_objective: float
    coarse_objective: float
    score_spread: float
    evaluations: int = 0

    def to_dict(self):
        return {
            "coarse": {"elevation": self.coarse[0], "azimuth": self.coarse[1]},
            "refined": {"elevation": self.refined[0], "azimuth": self.refined[1]},
            "coarse_score": self.coarse_score,
            "coarse_objective": self.coarse_objective,
            "refined_objective": self.refined_objective,
            "score_spread": self.score_spread,
            "evaluations": self.evaluations,
        }


def resize(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear (antialiased when shrinking) resize to ``size`` x ``size``."""
    if img.shape == (size, size):
        return np.asarray(img, dtype=np.float64)
    pil = Image.fromarray(np.asarray(img, dtype=np.float32), mode="F")
    out = np.asarray(pil.resize((size, size), Image.BILINEAR), dtype=np.float64)
    return np.clip(out, 0.0, 1.0)


def normalize_view(img: np.ndarray, mask: np.ndarray, size: int, background: float = 0.0) -> np.ndarray:
    """Crop to ``mask``'s box, composite over ``background``, letterbox, resize."""
    if not mask.any():
        return np.full((size, size), background)
    box = BBox2.from_mask(mask)
    crop = img[box.y_min : box.y_max, box.x_min : box.x_max]
    m = mask[box.y_min : box.y_max, box.x_min : box.x_max]
    crop = np.where(m, crop, background)
    h, w = crop.shape
    side = max(h, w)
    square = np.full((side, side), background)
    top, left = (side - h) // 2, (side - w) // 2
    square[top : top + h, left : left + w] = crop
    return resize(square, size)


def prepare_reference(patch: np.ndarray, size: int, background: float = 0.0) -> np.ndarray:
    """Normalize a reference patch whose empty pixels equal ``background``."""
    patch = np.asarray(patch, dtype=np.float64)
    return normalize_view(patch, patch != background, size, background)


def reference_from_scene(image, mask, bbox: BBox2, background: float = 0.0) -> np.ndarray:
    """Object patch cut from a scene image: bbox crop with mask compositing."""
    crop = np.asarray(image)[bbox.y_min : bbox.y_max, bbox.x_min : bbox.x_max]
    m = np.asarray(mask)[bbox.y_min : bbox.y_max, bbox.x_min : bbox.x_max]
    return np.where(m, crop, background)


def render_view(cloud: PointCloud, elevation, azimuth, size, splat_radius, cfg: RotationSolverConfig):
    pose = orbit_pose(cloud, elevation, azimuth, size, projection=cfg.projection)
    r = render_points(cloud, pose, RenderConfig(size, splat_radius, cfg.background))
    return normalize_view(r.image, r.valid, size, cfg.background)


@dataclass(frozen=True)
class CoarseResult:
    elevation: float
    azimuth: float
    score: float
    index: int
    scores: np.ndarray


def coarse_rotation(cloud: PointCloud, reference, cfg: RotationSolverConfig = RotationSolverConfig()) -> CoarseResult:
    """Grid search: the view whose descriptor best matches the reference."""
    require_points(cloud)
    describe = get_descriptor(cfg.descriptor)
    ref = prepare_reference(reference, cfg.coarse_image_size, cfg.background)
    f_ref = np.asarray(describe(ref), dtype=np.float64)
    if not np.any(f_ref):
        raise InputError("featureless reference")
    grid = make_view_grid(cfg.C, cfg.elevation_range)
    poses = grid.poses
    scores = np.empty(len(poses))
    for j, (e, a) in enumerate(poses):
        view = render_view(cloud, e, a, cfg.coarse_image_size, cfg.coarse_splat_radius, cfg)
        f_j = np.asarray(describe(view), dtype=np.float64)
        scores[j] = cosine_similarity(f_ref, f_j) if np.any(f_j) else -1.0
    if np.all(scores == -1.0):
        raise SolverError("no grid view of the asset produced a usable rendering")
    best = int(np.argmax(scores))
    e, a = poses[best]
    return CoarseResult(e, a, float(scores[best]), best, scores)


def rotation_objective(cloud: PointCloud, reference, cfg: RotationSolverConfig):
    """g(e, a) = 1 - SSIM(normalized render, normalized reference)."""
    ref = prepare_reference(reference, cfg.refine_image_size, cfg.background)
    ssim_cfg = SsimConfig()

    def g(x):
        e, a = float(x[0]), float(x[1])
        if not (math.isfinite(e) and math.isfinite(a)) or abs(e) > 90.0:
            return math.inf
        view = render_view(cloud, e, a, cfg.refine_image_size, cfg.refine_splat_radius, cfg)
        return 1.0 - ssim(view, ref, ssim_cfg)

    return g


def refine_rotation(cloud: PointCloud, reference, init, cfg: RotationSolverConfig = RotationSolverConfig()):
    """Nelder-Mead refinement of (elevation, azimuth); never worse than ``init``.

    Returns ``(elevation, azimuth, objective, objective_at_init, evaluations)``.
    """
    e0, a0 = float(init[0]), float(init[1])
    if not -90.0 <= e0 <= 90.0:
        raise InputError(f"initial elevation {e0} outside [-90, 90]")
    g = rotation_objective(cloud, reference, cfg)
    g0 = g((e0, a0))
    if not math.isfinite(g0):
        raise SolverError(f"rotation objective is not finite at ({e0}, {a0})")
    if not cfg.refine_enabled:
        return e0, a0 % 360.0, g0, g0, 1
    grid = make_view_grid(cfg.C, cfg.elevation_range)
    step = (grid.elevation_step / 2.0, grid.azimuth_step / 2.0)
    res = nelder_mead(g, np.array([e0, a0]), replace(cfg.simplex, initial_step=step, keep_trace=False))
    if res.f_best < g0:
        e, a, f = float(res.x_best[0]), float(res.x_best[1]), res.f_best
    else:
        e, a, f = e0, a0, g0
    return e, a % 360.0, f, g0, res.evaluations + 1


def solve_rotation(cloud: PointCloud, reference, cfg: RotationSolverConfig = RotationSolverConfig()) -> RotationEstimate:
    coarse = coarse_rotation(cloud, reference, cfg)
    e, a, f, f0, evals = refine_rotation(cloud, reference, (coarse.elevation, coarse.azimuth), cfg)
    return RotationEstimate(
        coarse=(coarse.elevation, coarse.azimuth),
        refined=(e, a),
        coarse_score=coarse.score,
        refined_objective=f,
        coarse_objective=f0,
        score_spread=float(coarse.scores.max() - coarse.scores.min()),
        evaluations=evals,
    )

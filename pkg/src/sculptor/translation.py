"""Robust per-object translation from masks, depth and a scaffold.

Pipeline for one object:

1. sample ``K`` pixels from the object's mask;
2. keep the asset points visible from the reference view (hidden point
   removal by spherical flipping);
3. match every sampled pixel to the visible point at the same relative
   position inside the 2D box;
4. turn pixel and depth units into scene units with per-axis factors from
   the scaffold's extent;
5. drop depth differences that are far from their median (MAD rule) and
   take the median of the rest as the depth offset.

Frames.  The in-plane solve runs in image-aligned axes: x right, y down
(rows), z away from the camera (depth).  The asset is seen from its front
(+z side, which is how the reference camera sees a rotated asset), so for
an asset point ``q`` the image axes are ``(q_x, -q_y, -q_z)``.  The scene
frame is +y up with the camera looking down -z; the conversion back is
``t_scene = origin + (t_x, -t_y, -t_z)`` where ``origin`` is the scene
point under pixel (0, 0), i.e. the scaffold's top-left corner on the
camera plane.  Scaffolds are expected in the reference camera's frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import InputError, SolverError
from .geometry import BBox2, DepthMap, PointCloud, ViewPose, cloud_aabb, check_mask, require_points
from .render import orbit_pose, project_points

# Image-aligned axes -> scene axes.
IMAGE_TO_SCENE = np.array([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class TranslationSolverConfig:
    K: int = 500
    mad_lambda: float = 3.0
    hpr_gamma: float = 2.0
    seed: int | tuple = 0  # anything numpy.random.default_rng accepts
    outlier_removal_enabled: bool = True

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise InputError("K must be a positive integer")
        if not self.mad_lambda > 0:
            raise InputError("mad_lambda must be > 0")
        if not self.hpr_gamma > 0:
            raise InputError("hpr_gamma must be > 0")


@dataclass(frozen=True)
class AxisFactors:
    """Scene length per pixel (x, y) and per depth unit (z).

    ``origin`` is the scene point that pixel (0, 0) at depth 0 maps to.
    """

    lambda_x: float
    lambda_y: float
    lambda_z: float
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("lambda_x", "lambda_y", "lambda_z"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be positive and finite, got {v}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.lambda_x, self.lambda_y, self.lambda_z])

    def to_scene(self, t_image) -> np.ndarray:
        """Image-aligned offset (x right, y down, z depth) -> scene point."""
        return np.asarray(self.origin) + IMAGE_TO_SCENE * np.asarray(t_image, dtype=np.float64)

    def to_dict(self):
        return {
            "lambda_x": self.lambda_x,
            "lambda_y": self.lambda_y,
            "lambda_z": self.lambda_z,
            "origin": list(self.origin),
        }


def axis_factors(scaffold: PointCloud, image_width: int, image_height: int, depth_range: float) -> AxisFactors:
    """Factors whose ratios equal the scaffold's axis extents."""
    box = cloud_aabb(scaffold)
    ext = box.extents
    if np.any(ext <= 0):
        raise InputError("flat scaffold")
    if not (image_width > 0 and image_height > 0):
        raise InputError("image dimensions must be positive")
    if not (math.isfinite(depth_range) and depth_range > 0):
        raise InputError(f"depth_range must be positive, got {depth_range}")
    origin = (float(box.min[0]), float(box.max[1]), 0.0)
    return AxisFactors(ext[0] / image_width, ext[1] / image_height, ext[2] / depth_range, origin)


def default_depth_range(depth: DepthMap) -> float:
    """(max - min) of the valid depth, used when no range is supplied."""
    d = depth.depth[depth.valid]
    if d.size == 0:
        raise InputError("depth map has no valid pixels")
    span = float(d.max() - d.min())
    if span <= 0:
        raise InputError("depth map is constant; supply depth_range explicitly")
    return span


def sample_mask_points(mask, K: int, seed=0) -> np.ndarray:
    """``K`` mask pixels as an int array of (x, y) = (col, row).

    Drawn without replacement when the mask has at least ``K`` pixels (then
    returned in raster order), otherwise with replacement.
    """
    mask = check_mask(mask)
    rows, cols = np.nonzero(mask)
    n = rows.size
    if n == 0:
        raise InputError("cannot sample from an empty mask")
    rng = np.random.default_rng(seed)
    if n >= K:
        pick = np.sort(rng.choice(n, size=K, replace=False))
    else:
        pick = rng.integers(0, n, size=K)
    return np.stack([cols[pick], rows[pick]], axis=1).astype(np.int64)


def hpr_visible(points, viewpoint, gamma: float = 2.0) -> np.ndarray:
    """Indices of points visible from ``viewpoint`` (spherical flipping).

    Points are moved to the viewpoint's frame and flipped through a sphere
    of radius ``10**gamma`` times the largest distance; a point is visible
    when its flip is a vertex of the convex hull of all flips plus the
    viewpoint.
    """
    pts = np.asarray(points.points if isinstance(points, PointCloud) else points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise InputError("hpr_visible needs a non-empty (N, 3) point array")
    vp = np.asarray(viewpoint, dtype=np.float64).reshape(3)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if np.all((vp >= lo) & (vp <= hi)):
        raise InputError("viewpoint lies inside the cloud's bounding box")
    p = pts - vp
    norms = np.linalg.norm(p, axis=1)
    radius = (10.0**gamma) * norms.max()
    flipped = p + 2.0 * (radius - norms)[:, None] * (p / norms[:, None])
    try:
        hull = ConvexHull(np.vstack([flipped, np.zeros((1, 3))]))
    except (QhullError, ValueError) as exc:
        raise InputError("degenerate hull input") from exc
    verts = hull.vertices
    return np.sort(verts[verts < len(pts)])


def _unit_coords(xy, lo, span):
    span = np.where(span > 0, span, 1.0)
    return (xy - lo) / span


def view_depth(points, pose: ViewPose) -> np.ndarray:
    """Depth along the view axis relative to the depth of the origin."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    _, _, d = project_points(np.vstack([pts, np.zeros((1, 3))]), pose)
    return d[:-1] - d[-1]


def correspond(pixels, bbox: BBox2, cloud: PointCloud, visible, pose: ViewPose):
    """Match pixels to visible points by relative position in their 2D boxes.

    Returns ``(q_index, z_q)``: the chosen cloud index and its view depth for
    every pixel.  Pixel centers are used (``+0.5``) so a box's corners map to
    the extremes of the projected visible points.
    """
    visible = np.asarray(visible, dtype=np.int64)
    if visible.size == 0:
        raise InputError("no visible points to correspond with")
    pts = cloud.points[visible]
    u, v, _ = project_points(pts, pose)
    uv = np.stack([u, v], axis=1)
    lo, hi = uv.min(axis=0), uv.max(axis=0)
    pts_n = _unit_coords(uv, lo, hi - lo)
    px = np.asarray(pixels, dtype=np.float64) + 0.5
    box_lo = np.array([bbox.x_min, bbox.y_min], dtype=np.float64)
    pix_n = _unit_coords(px, box_lo, np.array([bbox.width, bbox.height], dtype=np.float64))
    _, nearest = cKDTree(pts_n).query(pix_n, k=1)
    idx = visible[nearest]
    return idx, view_depth(cloud.points[idx], pose)


def depth_differences(d_p, z_q, factors: AxisFactors, scale: float) -> np.ndarray:
    """``lambda_z * d(p) - scale * z(q)`` per pair."""
    if not scale > 0:
        raise InputError("scale must be positive")
    return factors.lambda_z * np.asarray(d_p, dtype=np.float64) - scale * np.asarray(z_q, dtype=np.float64)


def mad_filter(values, lam: float = 3.0) -> np.ndarray:
    """Indices (ascending) with ``|v - median| <= lam * MAD``.

    With MAD = 0 only the values equal to the median are kept.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InputError("mad_filter needs at least one value")
    if not lam > 0:
        raise InputError("lambda must be > 0")
    m = np.median(v)
    dev = np.abs(v - m)
    mad = np.median(dev)
    keep = dev <= lam * mad if mad > 0 else v == m
    kept = np.flatnonzero(keep)
    if kept.size == 0:
        # Even count with MAD 0 and no value at the (averaged) median: keep
        # the middle cohort so the estimate below is still defined.
        kept = np.flatnonzero(dev == dev.min())
    return kept


def lower_median(values) -> float:
    """Median; the lower of the two middle elements for even counts."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise InputError("median of an empty list")
    return float(v[(v.size - 1) // 2])


@dataclass(frozen=True)
class TranslationResult:
    translation: tuple  # scene frame
    image_offset: tuple  # image-aligned (x right, y down, z depth)
    kept: int
    samples: int
    delta_z: np.ndarray

    def to_dict(self):
        return {
            "translation": list(self.translation),
            "image_offset": list(self.image_offset),
            "kept": self.kept,
            "samples": self.samples,
        }


def front_pose(cloud: PointCloud, image_size: int = 256) -> ViewPose:
    """Orthographic front view of an asset (what the reference camera sees)."""
    return orbit_pose(cloud, 0.0, 0.0, image_size, projection="orthographic")


def solve_translation(
    bbox: BBox2,
    mask,
    depth: DepthMap,
    cloud: PointCloud,
    scale: float,
    factors: AxisFactors,
    cfg: TranslationSolverConfig = TranslationSolverConfig(),
    pose: ViewPose | None = None,
) -> TranslationResult:
    """Translation placing ``scale * cloud`` on its 2D and depth evidence.

    ``cloud`` is the asset already rotated by its solved rotation, in its own
    frame (the scale is applied about that frame's origin).
    """
    require_points(cloud)
    if not scale > 0:
        raise InputError("scale must be positive")
    mask = check_mask(mask)
    if mask.shape != depth.shape:
        raise InputError(f"mask shape {mask.shape} does not match depth shape {depth.shape}")
    usable = mask & depth.valid
    if not usable.any():
        raise InputError("no valid depth under mask")
    pose = pose or front_pose(cloud)

    pixels = sample_mask_points(usable, cfg.K, cfg.seed)
    d_p = depth.depth[pixels[:, 1], pixels[:, 0]]
    visible = hpr_visible(cloud.points, pose.position, cfg.hpr_gamma)
    _, z_q = correspond(pixels, bbox, cloud, visible, pose)
    delta = depth_differences(d_p, z_q, factors, scale)
    kept = mad_filter(delta, cfg.mad_lambda) if cfg.outlier_removal_enabled else np.arange(delta.size)
    t_z = lower_median(delta[kept])

    box = cloud_aabb(cloud)
    c3d = box.center * IMAGE_TO_SCENE  # asset frame -> image-aligned axes
    cx, cy = bbox.center
    t_img = np.array(
        [factors.lambda_x * cx - scale * c3d[0], factors.lambda_y * cy - scale * c3d[1], t_z]
    )
    t = factors.to_scene(t_img)
    if not np.all(np.isfinite(t)):
        raise SolverError("translation is not finite")
    return TranslationResult(tuple(t), tuple(t_img), int(kept.size), int(delta.size), delta)

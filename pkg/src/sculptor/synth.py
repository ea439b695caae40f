"""Synthetic ground-truth scenes.

A scene is a row of textured primitives in front of a room-like scaffold
(back wall, floor and two pillars), seen by an orthographic camera at the
origin looking down -z.  Objects sit in disjoint horizontal slots, so no
object occludes another and the pillars never cover an object.

Ground truth is built to be consistent with the unified-scale formula: the
mean depth of each object is chosen so that the formula, fed the rendered
boxes, the rotated assets' diagonals and the mean depths, returns the true
scales.  (The formula compares sizes across objects, so scenes are
constructed to satisfy it rather than the other way round.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import (
    BBox2,
    CompositionParams,
    DepthMap,
    PointCloud,
    ViewPose,
    cloud_aabb,
    diagonal_length,
    rotate_cloud,
)
from .primitives import make_primitive
from .render import RenderConfig, make_view_grid, orbit_pose, project_points, render_points

OBJECT_KINDS = ("box", "cylinder", "lshape")
WALL_DEPTH = 15.0
PILLAR_DEPTH = 2.0
MIN_OBJECT_DEPTH = 5.0
MAX_DEPTH_SPREAD = 2.4  # largest D_max / D_min kept in front of the wall
SLOT_PIXELS = 192
SINGLE_IMAGE = 256
SCENE_SPLAT = 1.5
OUTLIER_SIGMAS = 10.0


@dataclass(frozen=True)
class SyntheticScene:
    seed: int
    kinds: tuple
    assets: tuple  # unrotated unit assets
    gt_params: tuple  # CompositionParams per object
    scaffold: PointCloud
    reference: np.ndarray
    depth: DepthMap  # noisy depth fed to the solvers
    clean_depth: DepthMap
    masks: tuple
    boxes: tuple
    camera: ViewPose
    depth_range: float
    index: np.ndarray  # winning point per pixel (objects first, then scaffold)
    offsets: tuple  # first point index of each object in ``index``
    noise: float = 0.0
    outlier_fraction: float = 0.0
    outliers: int = 0
    on_grid: tuple = field(default_factory=tuple)

    @property
    def n_objects(self) -> int:
        return len(self.assets)

    @property
    def extent(self) -> float:
        """Scene extent: the scaffold's AABB diagonal."""
        return cloud_aabb(self.scaffold).diagonal

    def patch(self, i: int) -> np.ndarray:
        """Object ``i``'s reference patch: box crop composited with its mask."""
        b = self.boxes[i]
        crop = self.reference[b.y_min : b.y_max, b.x_min : b.x_max]
        m = self.masks[i][b.y_min : b.y_max, b.x_min : b.x_max]
        return np.where(m, crop, 0.0)

    def gt_pixel_points(self, i: int, pixels) -> np.ndarray:
        """Asset point index seen at each (x, y) pixel of object ``i``; -1 if none."""
        pixels = np.asarray(pixels, dtype=np.int64)
        idx = self.index[pixels[:, 1], pixels[:, 0]] - self.offsets[i]
        ok = (idx >= 0) & (idx < len(self.assets[i]))
        return np.where(ok, idx, -1)


def _extents(rotated: PointCloud):
    box = cloud_aabb(rotated)
    return max(box.width, box.height), diagonal_length(box)


def _front_offset(rotated: PointCloud, image_size: int = 128) -> float:
    """Mean visible depth minus the depth of the asset origin, at unit scale.

    Exact for the orthographic scene camera, which sees the same front
    surface at any distance.
    """
    pose = orbit_pose(rotated, 0.0, 0.0, image_size)
    r = render_points(rotated, pose, RenderConfig(image_size, 1.0))
    _, _, origin = project_points(np.zeros((1, 3)), pose)
    return float(np.mean(r.depth[r.valid])) - float(origin[0])


def sample_rotation(rng, on_grid: bool, C: int = 24, elevation_range=(-45.0, 45.0)):
    grid = make_view_grid(C, elevation_range)
    if on_grid:
        return grid.elevations[rng.integers(C)], grid.azimuths[rng.integers(C)]
    lo, hi = elevation_range
    return float(rng.uniform(lo, hi)), float(rng.uniform(0.0, 360.0))


def _wall(x0, x1, y0, y1, z, spacing):
    nx = max(2, int(math.ceil((x1 - x0) / spacing)) + 1)
    ny = max(2, int(math.ceil((y1 - y0) / spacing)) + 1)
    x, y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    return np.stack([x.ravel(), y.ravel(), np.full(x.size, z)], axis=1)


def _scaffold(half: float, pillar: float, spacing: float) -> PointCloud:
    wall = _wall(-half, half, -half, half, -WALL_DEPTH, spacing)
    # Floor runs from the pillars' front plane back to the wall (edge-on).
    fz = np.linspace(-WALL_DEPTH, -PILLAR_DEPTH, max(2, int((WALL_DEPTH - PILLAR_DEPTH) / spacing)))
    fx = np.linspace(-half, half, max(2, int(2 * half / spacing)))
    gx, gz = np.meshgrid(fx, fz)
    floor = np.stack([gx.ravel(), np.full(gx.size, -half), gz.ravel()], axis=1)
    pillars = [
        _wall(-half, -half + pillar, -half, half, -PILLAR_DEPTH, spacing),
        _wall(half - pillar, half, -half, half, -PILLAR_DEPTH, spacing),
    ]
    pts = np.concatenate([wall, floor] + pillars)
    inten = np.concatenate(
        [
            0.3 + 0.1 * np.sin(wall[:, 0] * 1.7) * np.cos(wall[:, 1] * 1.3),
            np.full(len(floor), 0.45),
            np.full(sum(len(p) for p in pillars), 0.15),
        ]
    )
    return PointCloud(pts, np.clip(inten, 0.0, 1.0))


def generate_scene(
    n_objects: int = 1,
    seed: int = 0,
    noise: float = 0.0,
    outlier_fraction: float = 0.0,
    kinds=None,
    on_grid: float | bool = 0.5,
) -> SyntheticScene:
    """Build a scene; identical arguments give bit-identical scenes.

    ``on_grid`` is the probability that an object's GT rotation lies on the
    C=24 view grid (``True``/``False`` force it).  Depth is corrupted with
    Gaussian noise ``noise`` and then ``floor(outlier_fraction * valid)``
    pixels are pushed back by ``10 * noise``.
    """
    if int(n_objects) != n_objects or n_objects < 1:
        raise InputError("n_objects must be a positive integer")
    if not 0.0 <= outlier_fraction <= 0.45:
        raise InputError(f"outlier_fraction must lie in [0, 0.45], got {outlier_fraction}")
    if not (math.isfinite(noise) and noise >= 0):
        raise InputError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    if kinds is None:
        kinds = tuple(OBJECT_KINDS[k] for k in rng.integers(len(OBJECT_KINDS), size=n_objects))
    kinds = tuple(kinds)
    if len(kinds) != n_objects:
        raise InputError("kinds must list one primitive per object")
    p_grid = float(on_grid)
    assets = tuple(make_primitive(k) for k in kinds)

    # Rotations, resampled until the depth spread fits in front of the wall.
    for _ in range(100):
        grid_flags = tuple(bool(rng.random() < p_grid) for _ in range(n_objects))
        rots = [sample_rotation(rng, g) for g in grid_flags]
        rotated = [rotate_cloud(a, e, az) for a, (e, az) in zip(assets, rots)]
        ext, diag = zip(*(_extents(r) for r in rotated))
        q = np.array(ext) * np.array(diag)
        if q.max() / q.min() <= MAX_DEPTH_SPREAD:
            break
    else:  # pragma: no cover - the spread of unit primitives is small
        raise InputError("could not sample a valid rotation set")
    ext, diag = np.array(ext), np.array(diag)

    # Scales: object m has the largest box; the formula then fixes s_m.
    m = int(rng.integers(n_objects))
    s = np.empty(n_objects)
    s[m] = q.max() / (ext[m] * diag.min())
    for i in range(n_objects):
        if i != m:
            s[i] = rng.uniform(0.7, 0.95) * s[m] * ext[m] / ext[i]
    mean_depth = MIN_OBJECT_DEPTH * q.max() / q  # D_i proportional to 1 / (ext_i diag_i)

    # Layout in world units.
    slot = 1.15 * float(np.max(s * ext))
    pillar = 0.12 * slot
    half = 0.5 * (n_objects * slot + 2 * pillar)
    image_size = SINGLE_IMAGE if n_objects == 1 else SLOT_PIXELS * n_objects
    pixel = 2 * half / image_size
    radius = WALL_DEPTH + 5.0
    camera = ViewPose(
        0.0, 0.0, radius, 2 * math.degrees(math.atan(half / radius)), image_size, (0.0, 0.0, -radius), "orthographic"
    )

    params = []
    placed = []
    for i in range(n_objects):
        # Center the box rather than the centroid, so the pillars never clip it.
        cx, cy = cloud_aabb(rotated[i]).center[:2]
        x = -half + pillar + (i + 0.5) * slot + rng.uniform(-0.04, 0.04) * slot - s[i] * cx
        y = rng.uniform(-0.04, 0.04) * slot - s[i] * cy
        center_depth = mean_depth[i] - s[i] * _front_offset(rotated[i])
        p = CompositionParams(rots[i][0], rots[i][1], float(s[i]), (x, y, -center_depth))
        params.append(p)
        placed.append(rotated[i].with_points(s[i] * rotated[i].points + np.asarray(p.translation)))

    scaffold = _scaffold(half, pillar, 0.6 * pixel)
    offsets = tuple(int(v) for v in np.cumsum([0] + [len(a) for a in placed])[:-1])
    everything = PointCloud.concat(placed + [scaffold])
    r = render_points(everything, camera, RenderConfig(image_size, SCENE_SPLAT, 0.0))

    masks, boxes = [], []
    for i in range(n_objects):
        mk = (r.index >= offsets[i]) & (r.index < offsets[i] + len(placed[i]))
        if not mk.any():
            raise InputError(f"object {i} is not visible")  # pragma: no cover
        masks.append(mk)
        boxes.append(BBox2.from_mask(mk))

    clean = DepthMap(r.depth, r.valid)
    depth = r.depth.copy()
    valid_idx = np.flatnonzero(r.valid.ravel())
    n_out = int(math.floor(outlier_fraction * valid_idx.size))
    flat = depth.ravel()
    if noise > 0:
        flat[valid_idx] += rng.normal(0.0, noise, valid_idx.size)
    chosen = rng.choice(valid_idx, size=n_out, replace=False)
    flat[chosen] += OUTLIER_SIGMAS * noise
    vals = r.depth[r.valid]
    return SyntheticScene(
        seed=seed,
        kinds=kinds,
        assets=assets,
        gt_params=tuple(params),
        scaffold=scaffold,
        reference=r.image,
        depth=DepthMap(depth, r.valid),
        clean_depth=clean,
        masks=tuple(masks),
        boxes=tuple(boxes),
        camera=camera,
        depth_range=float(vals.max() - vals.min()),
        index=r.index,
        offsets=offsets,
        noise=noise,
        outlier_fraction=outlier_fraction,
        outliers=n_out,
        on_grid=grid_flags,
    )

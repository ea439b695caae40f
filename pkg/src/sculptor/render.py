"""Deterministic point-splat renderer and the (elevation, azimuth) view grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InputError
from .geometry import PointCloud, ViewPose, cloud_aabb, require_points

BEHIND_CAMERA = None


@dataclass(frozen=True)
class RenderConfig:
    image_size: int = 128
    splat_radius: float = 1.0
    background: float = 0.0

    def __post_init__(self):
        if self.image_size < 16:
            raise InputError("image_size must be >= 16")
        if self.splat_radius < 0:
            raise InputError("splat_radius must be >= 0")
        if not 0.0 <= self.background <= 1.0:
            raise InputError("background must lie in [0, 1]")


@dataclass(frozen=True)
class ViewGrid:
    elevations: tuple
    azimuths: tuple

    @property
    def poses(self) -> list[tuple[float, float]]:
        """(elevation, azimuth) pairs, elevation-major."""
        return [(e, a) for e in self.elevations for a in self.azimuths]

    def __len__(self):
        return len(self.elevations) * len(self.azimuths)

    @property
    def elevation_step(self) -> float:
        return self.elevations[1] - self.elevations[0]

    @property
    def azimuth_step(self) -> float:
        return 360.0 / len(self.azimuths)


def make_view_grid(C: int, elevation_range=(-45.0, 45.0)) -> ViewGrid:
    lo, hi = (float(v) for v in elevation_range)
    if C < 2:
        raise InputError("view grid needs C >= 2")
    if not (-90.0 <= lo < hi <= 90.0):
        raise InputError(f"invalid elevation range {elevation_range}")
    elevations = tuple(lo + (hi - lo) * i / (C - 1) for i in range(C))
    azimuths = tuple(360.0 * i / C for i in range(C))
    return ViewGrid(elevations, azimuths)


def camera_coords(points: np.ndarray, pose: ViewPose) -> np.ndarray:
    """World points expressed in the camera frame (camera looks down -z)."""
    rot = pose.rotation
    return (np.asarray(points, dtype=np.float64) - pose.position) @ rot


def project_points(points: np.ndarray, pose: ViewPose, image_size: int | None = None):
    """Vectorized projection: returns (u, v, depth) arrays.

    ``u``/``v`` are continuous pixel coordinates (pixel centers at +0.5);
    ``depth`` is the distance along the view axis, <= 0 behind the camera.
    """
    n = pose.image_size if image_size is None else image_size
    cam = camera_coords(points, pose)
    depth = -cam[:, 2]
    if pose.projection == "orthographic":
        scale = (n / 2.0) / pose.half_height
        u = n / 2.0 + cam[:, 0] * scale
        v = n / 2.0 - cam[:, 1] * scale
    else:
        focal = (n / 2.0) / math.tan(math.radians(pose.fov_y) / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = n / 2.0 + focal * cam[:, 0] / depth
            v = n / 2.0 - focal * cam[:, 1] / depth
    return u, v, depth


def project(point, pose: ViewPose):
    """Project one point; ``None`` (BEHIND_CAMERA) if it is not in front."""
    u, v, d = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), pose)
    if not d[0] > 0:
        return BEHIND_CAMERA
    return float(u[0]), float(v[0]), float(d[0])


@numba.njit(cache=True)
def _splat(u, v, depth, n, radius):
    # Point order is the index order, so strict "<" keeps the lowest index on
    # equal depth.
    winner = np.full((n, n), -1, dtype=np.int64)
    zbuf = np.full((n, n), np.inf)
    lo = math.ceil(-radius - 0.5)
    hi = math.ceil(radius + 0.5) - 1
    r2 = radius * radius
    for k in range(u.shape[0]):
        iu = math.floor(u[k])
        iv = math.floor(v[k])
        d = depth[k]
        if radius == 0.0:
            if 0 <= iu < n and 0 <= iv < n and d < zbuf[iv, iu]:
                zbuf[iv, iu] = d
                winner[iv, iu] = k
            continue
        for oy in range(lo, hi + 1):
            py = iv + oy
            if py < 0 or py >= n:
                continue
            dy = py + 0.5 - v[k]
            for ox in range(lo, hi + 1):
                px = iu + ox
                if px < 0 or px >= n:
                    continue
                dx = px + 0.5 - u[k]
                if dx * dx + dy * dy <= r2 and d < zbuf[py, px]:
                    zbuf[py, px] = d
                    winner[py, px] = k
    return winner


@dataclass(frozen=True)
class Rendering:
    image: np.ndarray
    depth: np.ndarray
    valid: np.ndarray
    index: np.ndarray  # winning point per pixel, -1 where empty


def render_points(cloud: PointCloud, pose: ViewPose, cfg: RenderConfig | None = None) -> Rendering:
    """Splat every point as a disc; nearest depth wins, ties to lowest index.

    A pixel belongs to a point's disc when the pixel center lies within
    ``splat_radius`` of the projected point (radius 0: the pixel containing
    it).  Image size comes from ``pose.image_size``.
    """
    require_points(cloud)
    cfg = cfg or RenderConfig(image_size=max(16, pose.image_size))
    n = pose.image_size
    u, v, depth = project_points(cloud.points, pose, n)
    front = np.flatnonzero(np.isfinite(u) & np.isfinite(v) & (depth > 0))
    u, v, depth = u[front], v[front], depth[front]

    winner_local = _splat(u, v, depth, n, float(cfg.splat_radius)).ravel()
    valid = winner_local >= 0

    index = np.full(n * n, -1, dtype=np.int64)
    index[valid] = front[winner_local[valid]]
    depth_buf = np.zeros(n * n)
    depth_buf[valid] = depth[winner_local[valid]]
    image = np.full(n * n, cfg.background, dtype=np.float64)
    if cloud.intensity is None:
        image[valid] = 1.0
    else:
        image[valid] = cloud.intensity[index[valid]]
    shape = (n, n)
    return Rendering(image.reshape(shape), depth_buf.reshape(shape), valid.reshape(shape), index.reshape(shape))


def orbit_pose(
    cloud: PointCloud,
    elevation: float,
    azimuth: float,
    image_size: int,
    projection: str = "orthographic",
    radius_factor: float = 2.5,
    margin: float = 1.05,
) -> ViewPose:
    """Camera orbiting the cloud centroid at ``radius_factor`` x AABB diagonal.

    The field of view is chosen so that every point fits in the frame from
    any direction (the window covers the farthest point from the centroid).
    """
    c = cloud.centroid
    diag = cloud_aabb(cloud).diagonal
    reach = float(np.max(np.linalg.norm(cloud.points - c, axis=1)))
    if diag == 0 or reach == 0:
        raise InputError("cannot frame a cloud with zero extent")
    radius = radius_factor * diag
    half = margin * reach
    if projection == "perspective":
        fov = 2.0 * math.degrees(math.asin(min(0.999, half / radius)))
    else:
        fov = 2.0 * math.degrees(math.atan(half / radius))
    return ViewPose(elevation, azimuth, radius, fov, image_size, tuple(c), projection)


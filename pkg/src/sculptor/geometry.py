"""Value types and rigid transforms shared by every solver.

Axis convention (used by the renderer and all solvers alike): right-handed,
+y up, cameras look down their local -z axis.  An object rotation is the
2-DOF pair (elevation, azimuth) in degrees: azimuth turns about +y, then
elevation turns about the camera-right (+x) axis.  The sign is chosen so that
viewing ``rotate_cloud(c, e, a)`` from the canonical front camera gives the
same picture as viewing ``c`` from an orbit camera at (e, a).

Raster convention: row-major arrays indexed ``[row, col]``; pixel (col, row)
covers ``[col, col+1) x [row, row+1)`` with its center at half-integer
coordinates, origin top-left, x rightward, y downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3D points with optional per-point intensity in [0, 1]."""

    points: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=np.float64, copy=True).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise InputError(
                    f"intensity has {inten.shape[0]} values for {pts.shape[0]} points"
                )
            if inten.size and (not np.all(np.isfinite(inten)) or inten.min() < 0 or inten.max() > 1):
                raise InputError("intensity values must lie in [0, 1]")
            object.__setattr__(self, "intensity", _frozen(inten))

    def __len__(self):
        return self.points.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        require_points(self)
        return self.points.mean(axis=0)

    def with_points(self, points) -> "PointCloud":
        return PointCloud(points, self.intensity)

    def subset(self, index) -> "PointCloud":
        index = np.asarray(index, dtype=np.int64)
        inten = None if self.intensity is None else self.intensity[index]
        return PointCloud(self.points[index], inten)

    @staticmethod
    def concat(clouds) -> "PointCloud":
        clouds = list(clouds)
        pts = np.concatenate([c.points for c in clouds]) if clouds else np.zeros((0, 3))
        if clouds and all(c.intensity is not None for c in clouds):
            inten = np.concatenate([c.intensity for c in clouds])
        elif clouds and any(c.intensity is not None for c in clouds):
            inten = np.concatenate(
                [c.intensity if c.intensity is not None else np.ones(len(c)) for c in clouds]
            )
        else:
            inten = None
        return PointCloud(pts, inten)


def require_points(cloud: PointCloud):
    if len(cloud) == 0:
        raise InputError("empty point cloud")


@dataclass(frozen=True)
class Aabb3:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(lo > hi):
            raise InputError("Aabb3 min must not exceed max")
        object.__setattr__(self, "min", _frozen(lo.copy()))
        object.__setattr__(self, "max", _frozen(hi.copy()))

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def width(self) -> float:
        return float(self.max[0] - self.min[0])

    @property
    def height(self) -> float:
        return float(self.max[1] - self.min[1])

    @property
    def depth(self) -> float:
        return float(self.max[2] - self.min[2])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    @property
    def diagonal(self) -> float:
        """Full 3D diagonal (unlike :func:`diagonal_length`)."""
        return float(np.linalg.norm(self.extents))


@dataclass(frozen=True)
class BBox2:
    """Integer pixel box; ``x_max``/``y_max`` are exclusive pixel edges."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if int(v) != v:
                raise InputError(f"bbox {name} must be an integer")
            object.__setattr__(self, name, int(v))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InputError(f"degenerate bbox {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def max_dim(self) -> int:
        return max(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)

    def intersects(self, other: "BBox2") -> bool:
        return (
            self.x_min < other.x_max
            and other.x_min < self.x_max
            and self.y_min < other.y_max
            and other.y_min < self.y_max
        )

    def union(self, other: "BBox2") -> "BBox2":
        return BBox2(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @staticmethod
    def from_mask(mask: np.ndarray) -> "BBox2":
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            raise InputError("cannot take the bounding box of an empty mask")
        return BBox2(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


@dataclass(frozen=True)
class DepthMap:
    """Depth per pixel plus a validity raster; depth > 0 wherever valid."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        depth = np.array(self.depth, dtype=np.float64, copy=True)
        valid = np.array(self.valid, dtype=bool, copy=True)
        if depth.ndim != 2 or depth.shape != valid.shape:
            raise InputError("depth and valid rasters must be 2D with equal shape")
        d = depth[valid]
        if d.size and (not np.all(np.isfinite(d)) or d.min() <= 0):
            raise InputError("valid depth values must be finite and positive")
        object.__setattr__(self, "depth", _frozen(depth))
        object.__setattr__(self, "valid", _frozen(valid))

    @property
    def shape(self):
        return self.depth.shape


def check_gray(img: np.ndarray) -> np.ndarray:
    """Validate a GrayImage (2D float array with values in [0, 1])."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise InputError("gray image must be a non-empty 2D array")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise InputError("gray image values must lie in [0, 1]")
    return img


def check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise InputError("mask must be a 2D raster")
    return mask.astype(bool, copy=False)


@dataclass(frozen=True)
class ViewPose:
    """Camera orbiting ``target`` at (elevation, azimuth) and ``radius``.

    ``projection`` is ``"perspective"`` (pinhole with vertical field of view
    ``fov_y``) or ``"orthographic"``, in which case the view window's half
    height is ``radius * tan(fov_y / 2)`` so both projections frame the same
    region at the target.
    """

    elevation: float
    azimuth: float
    radius: float
    fov_y: float
    image_size: int
    target: tuple = (0.0, 0.0, 0.0)
    projection: str = "perspective"

    def __post_init__(self):
        if not -90.0 <= self.elevation <= 90.0:
            raise InputError(f"elevation {self.elevation} outside [-90, 90]")
        object.__setattr__(self, "azimuth", float(self.azimuth) % 360.0)
        if not self.radius > 0:
            raise InputError("radius must be positive")
        if not 0.0 < self.fov_y < 180.0:
            raise InputError("fov_y must lie in (0, 180)")
        if int(self.image_size) != self.image_size or self.image_size < 1:
            raise InputError("image_size must be a positive integer")
        if self.projection not in ("perspective", "orthographic"):
            raise InputError(f"unknown projection {self.projection!r}")
        object.__setattr__(self, "target", tuple(float(v) for v in self.target))

    @property
    def half_height(self) -> float:
        return self.radius * math.tan(math.radians(self.fov_y) / 2.0)

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation (columns are right, up, back)."""
        return rotation_matrix(self.elevation, self.azimuth).T

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.target) + self.radius * self.rotation[:, 2]


@dataclass(frozen=True)
class CompositionParams:
    """Solved placement of one object: rotation, scale and translation."""

    elevation: float
    azimuth: float
    scale: float
    translation: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        t = tuple(float(v) for v in self.translation)
        if len(t) != 3:
            raise InputError("translation must have three components")
        values = (self.elevation, self.azimuth, self.scale) + t
        if not all(math.isfinite(v) for v in values):
            raise InputError("composition parameters must be finite")
        if not self.scale > 0:
            raise InputError("scale must be positive")
        object.__setattr__(self, "translation", t)

    def to_dict(self):
        return {
            "elevation": self.elevation,
            "azimuth": self.azimuth,
            "scale": self.scale,
            "translation": list(self.translation),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["elevation"], d["azimuth"], d["scale"], tuple(d["translation"]))


def rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_matrix(elevation: float, azimuth: float) -> np.ndarray:
    """Object rotation for (elevation, azimuth): ``Rx(e) @ Ry(-a)``."""
    return rot_x(elevation) @ rot_y(-azimuth)


def rotate_cloud(cloud: PointCloud, elevation: float, azimuth: float) -> PointCloud:
    """Rotate ``cloud`` about its centroid; azimuth first, then elevation."""
    require_points(cloud)
    if not (math.isfinite(elevation) and math.isfinite(azimuth)):
        raise InputError("rotation angles must be finite")
    if elevation == 0 and azimuth == 0:
        return cloud
    c = cloud.centroid
    r = rotation_matrix(elevation, azimuth)
    return cloud.with_points((cloud.points - c) @ r.T + c)


def cloud_aabb(cloud: PointCloud) -> Aabb3:
    require_points(cloud)
    return Aabb3(cloud.points.min(axis=0), cloud.points.max(axis=0))


def diagonal_length(box: Aabb3) -> float:
    """sqrt(W^2 + H^2) from the x and y extents; the z extent is ignored."""
    return math.hypot(box.width, box.height)


def angle_difference(a: float, b: float, period: float = 360.0) -> float:
    """Smallest absolute difference between two angles (degrees)."""
    d = (a - b) % period
    return float(min(d, period - d))

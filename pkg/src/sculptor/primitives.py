"""Textured primitive assets for the synthetic scenes.

Every asset is a surface point cloud normalized to a unit AABB diagonal with
its centroid at the origin.  Intensities follow an axis-coded gradient plus
a low-frequency stripe so that opposite views are distinguishable.
"""

from __future__ import annotations

import numpy as np

from .geometry import PointCloud

KINDS = ("box", "cylinder", "lshape", "sphere")
TARGET_POINTS = 16000


def _face(rng, origin, u, v, h):
    """Jittered grid on the parallelogram origin + s*u + t*v, s,t in [0,1]."""
    nu = max(1, int(round(np.linalg.norm(u) / h)))
    nv = max(1, int(round(np.linalg.norm(v) / h)))
    s, t = np.meshgrid((np.arange(nu) + 0.5) / nu, (np.arange(nv) + 0.5) / nv)
    s = s.ravel() + rng.uniform(-0.4, 0.4, s.size) / nu
    t = t.ravel() + rng.uniform(-0.4, 0.4, t.size) / nv
    return origin + s[:, None] * u + t[:, None] * v


def _box_faces(rng, lo, size, h):
    lo = np.asarray(lo, dtype=np.float64)
    sx, sy, sz = size
    ex, ey, ez = np.array([sx, 0, 0.0]), np.array([0, sy, 0.0]), np.array([0, 0, sz * 1.0])
    faces = [
        _face(rng, lo, ex, ey, h), _face(rng, lo + ez, ex, ey, h),
        _face(rng, lo, ex, ez, h), _face(rng, lo + ey, ex, ez, h),
        _face(rng, lo, ey, ez, h), _face(rng, lo + ex, ey, ez, h),
    ]
    ids = np.concatenate([np.full(len(f), i) for i, f in enumerate(faces)])
    return np.concatenate(faces), ids


def _spacing(area, n=TARGET_POINTS):
    return float(np.sqrt(area / n))


def _raw_box(rng):
    size = (1.0, 0.62, 0.38)
    area = 2 * (size[0] * size[1] + size[0] * size[2] + size[1] * size[2])
    return _box_faces(rng, (0, 0, 0), size, _spacing(area))


def _raw_cylinder(rng):
    r, height = 0.3, 1.0
    area = 2 * np.pi * r * height + 2 * np.pi * r * r
    h = _spacing(area)
    n_theta = int(round(2 * np.pi * r / h))
    n_y = int(round(height / h))
    th, y = np.meshgrid((np.arange(n_theta) + 0.5) / n_theta, (np.arange(n_y) + 0.5) / n_y)
    th = 2 * np.pi * (th.ravel() + rng.uniform(-0.4, 0.4, th.size) / n_theta)
    y = height * (y.ravel() + rng.uniform(-0.4, 0.4, y.size) / n_y)
    side = np.stack([r * np.cos(th), y, r * np.sin(th)], axis=1)
    caps = []
    for y0 in (0.0, height):
        sq = _face(rng, np.array([-r, y0, -r]), np.array([2 * r, 0, 0]), np.array([0, 0, 2 * r]), h)
        caps.append(sq[np.hypot(sq[:, 0], sq[:, 2]) <= r])
    # Side split into quarters so the albedo pattern fixes the azimuth.
    side_ids = np.floor(th / (np.pi / 2)).astype(np.int64) % 4
    ids = np.concatenate([side_ids, np.full(len(caps[0]), 4), np.full(len(caps[1]), 5)])
    return np.concatenate([side] + caps), ids


def _inside(p, lo, hi, eps=1e-9):
    return np.all((p > np.asarray(lo) + eps) & (p < np.asarray(hi) - eps), axis=1)


def _raw_lshape(rng):
    a_lo, a_size = np.array([0, 0, 0.0]), (1.0, 0.34, 0.45)
    b_lo, b_size = np.array([0, 0, 0.0]), (0.34, 0.9, 0.45)
    area = 2 * sum(s[0] * s[1] + s[0] * s[2] + s[1] * s[2] for s in (a_size, b_size))
    h = _spacing(area * 0.8)
    pa, ia = _box_faces(rng, a_lo, a_size, h)
    pb, ib = _box_faces(rng, b_lo, b_size, h)
    keep = ~_inside(pa, b_lo, b_lo + b_size)
    pa, ia = pa[keep], ia[keep]
    # Below the top of the horizontal bar, B is covered by A's surface.
    keep = pb[:, 1] >= a_size[1]
    return np.concatenate([pa, pb[keep]]), np.concatenate([ia, ib[keep]])


def _raw_sphere(rng):
    n = TARGET_POINTS
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    pts = 0.5 * np.stack([np.cos(theta) * np.sin(phi), np.cos(phi), np.sin(theta) * np.sin(phi)], axis=1)
    return pts, np.zeros(n, dtype=np.int64)


_BUILDERS = {"box": _raw_box, "cylinder": _raw_cylinder, "lshape": _raw_lshape, "sphere": _raw_sphere}


# Per-face albedo; distinct values make the faces and their edges visible.
FACE_ALBEDO = np.array([0.35, 0.8, 0.55, 0.95, 0.25, 0.65])


def texture(points: np.ndarray, face_ids: np.ndarray) -> np.ndarray:
    lo, hi = points.min(axis=0), points.max(axis=0)
    n = (points - lo) / np.where(hi > lo, hi - lo, 1.0)
    ramp = 0.55 * n[:, 0] + 0.3 * n[:, 1] + 0.15 * n[:, 2]
    stripe = np.sin(2 * np.pi * (2.0 * n[:, 0] + 1.3 * n[:, 1] + 0.7 * n[:, 2]))
    base = FACE_ALBEDO[np.asarray(face_ids) % len(FACE_ALBEDO)]
    return np.clip(0.6 * base + 0.25 * ramp + 0.08 * stripe, 0.05, 1.0)


def normalize_asset(points: np.ndarray) -> np.ndarray:
    """Centroid to the origin, AABB diagonal to 1."""
    points = points - points.mean(axis=0)
    diag = np.linalg.norm(points.max(axis=0) - points.min(axis=0))
    return points / diag


def make_primitive(kind: str) -> PointCloud:
    if kind not in _BUILDERS:
        raise ValueError(f"unknown primitive {kind!r}")
    rng = np.random.default_rng(KINDS.index(kind) + 101)
    pts, ids = _BUILDERS[kind](rng)
    inten = np.full(len(pts), 0.6) if kind == "sphere" else texture(pts, ids)
    return PointCloud(normalize_asset(pts), inten)

"""Per-object stages chained into a full scene solve."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .compose import ComposedScene, Evidence, compose
from .errors import InputError
from .geometry import BBox2, CompositionParams, DepthMap, PointCloud, cloud_aabb, diagonal_length, rotate_cloud
from .rotation import RotationSolverConfig, solve_rotation
from .scale import ScaleInput, ScaleTerms, mean_masked_depth, scale_terms
from .translation import AxisFactors, TranslationSolverConfig, solve_translation


@dataclass(frozen=True)
class ObjectInput:
    id: str
    asset: PointCloud
    patch: np.ndarray
    mask: np.ndarray
    bbox: BBox2
    label: str = ""


@dataclass
class StageTimer:
    """Wall-clock milliseconds per stage (kept out of reproducible output)."""

    ms: dict = field(default_factory=dict)

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.ms[name] = self.ms.get(name, 0.0) + 1000.0 * (time.perf_counter() - t0)


def _rotation_task(args):
    asset, patch, cfg = args
    return solve_rotation(asset, patch, cfg)


def solve_rotations(objects, cfg: RotationSolverConfig = RotationSolverConfig(), jobs: int = 1):
    """Rotation per object; ``jobs > 1`` spreads objects over processes.

    Each solve is a pure function of its inputs, so the result does not
    depend on ``jobs``.
    """
    tasks = [(o.asset, o.patch, cfg) for o in objects]
    if jobs <= 1 or len(tasks) <= 1:
        return [_rotation_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_rotation_task, tasks))


def scale_inputs(objects, rotations, depth: DepthMap):
    out = []
    for o, (e, a) in zip(objects, rotations):
        rotated = rotate_cloud(o.asset, e, a)
        out.append(ScaleInput(o.bbox, diagonal_length(cloud_aabb(rotated)), mean_masked_depth(depth, o.mask)))
    return out


def solve_scales(objects, rotations, depth: DepthMap) -> list[ScaleTerms]:
    return scale_terms(scale_inputs(objects, rotations, depth))


def object_seed(seed, k: int) -> tuple:
    """Per-object RNG seed, independent of how objects are scheduled."""
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    return base + (int(k),)


def solve_translations(objects, rotations, scales, depth, factors, cfg=TranslationSolverConfig()):
    out = []
    for k, (o, (e, a), s) in enumerate(zip(objects, rotations, scales)):
        ocfg = replace(cfg, seed=object_seed(cfg.seed, k))
        out.append(solve_translation(o.bbox, o.mask, depth, rotate_cloud(o.asset, e, a), s, factors, ocfg))
    return out


@dataclass(frozen=True)
class PipelineResult:
    rotations: tuple  # RotationEstimate per object
    scales: tuple  # ScaleTerms per object
    translations: tuple  # TranslationResult per object
    scene: ComposedScene
    timing_ms: dict


def run_pipeline(
    objects,
    depth: DepthMap,
    factors: AxisFactors,
    scaffold: PointCloud | None = None,
    rotation_cfg: RotationSolverConfig = RotationSolverConfig(),
    translation_cfg: TranslationSolverConfig = TranslationSolverConfig(),
    jobs: int = 1,
    global_align: bool = True,
) -> PipelineResult:
    objects = list(objects)
    if not objects:
        raise InputError("no objects to solve")
    timer = StageTimer()
    rot = timer.run("rotation", solve_rotations, objects, rotation_cfg, jobs)
    angles = [r.refined for r in rot]
    terms = timer.run("scale", solve_scales, objects, angles, depth)
    scales = [t.scale for t in terms]
    trans = timer.run("translation", solve_translations, objects, angles, scales, depth, factors, translation_cfg)
    params = [
        CompositionParams(e, a, s, t.translation) for (e, a), s, t in zip(angles, scales, trans)
    ]
    evidence = [Evidence(o.bbox, o.mask, o.label) for o in objects]
    scene = timer.run(
        "compose",
        compose,
        [o.asset for o in objects],
        params,
        scaffold if global_align else None,
        evidence,
        factors,
        depth,
        ids=[o.id for o in objects],
        cfg=translation_cfg,
    )
    return PipelineResult(tuple(rot), tuple(terms), tuple(trans), scene, timer.ms)

"""Score solver recovery against ground truth.

Three arms share one rotation solve per object:

``full``
    refined rotation, outlier-filtered translation;
``no_refine``
    coarse (grid) rotation only;
``no_outlier_removal``
    refined rotation, translation from the unfiltered depth differences.

The coarse-only arm reuses the coarse stage of the full solve, which is
exactly what a solve with refinement disabled returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .compose import Evidence, compose
from .errors import SculptorError
from .geometry import CompositionParams, angle_difference, rotate_cloud
from .pipeline import StageTimer, object_seed, scale_inputs, solve_rotations
from .rotation import RotationSolverConfig
from .scale import ScaleConfig, scale_terms
from .sceneio import SceneInputs
from .translation import TranslationSolverConfig, solve_translation

ARMS = ("full", "no_refine", "no_outlier_removal")
SYMMETRY_SPREAD = 1e-3

AGGREGATE_KEYS = (
    "coarse_elevation_error",
    "coarse_azimuth_error",
    "elevation_error",
    "azimuth_error",
    "scale_rel_error",
    "translation_error",
    "translation_error_pct",
    "t_z_error",
    "centroid_error_pct",
)


def _failure(stage, exc):
    return {"status": "failed", "stage": stage, "error": f"{type(exc).__name__}: {exc}"}


def _angles_error(est, gt):
    return abs(angle_difference(est[0], gt["elevation"])), abs(angle_difference(est[1], gt["azimuth"]))


def _rotation_entry(r, angles, gt):
    symmetric = r.score_spread < SYMMETRY_SPREAD
    entry = {
        "coarse": {"elevation": r.coarse[0], "azimuth": r.coarse[1]},
        "estimate": {"elevation": angles[0], "azimuth": angles[1]},
        "score_spread": r.score_spread,
        "symmetric": symmetric,
    }
    if symmetric:
        entry["status"] = "symmetric/indeterminate"
        entry["errors"] = None
    else:
        ce, ca = _angles_error(r.coarse, gt)
        fe, fa = _angles_error(angles, gt)
        entry["status"] = "ok"
        entry["errors"] = {
            "coarse_elevation_error": ce,
            "coarse_azimuth_error": ca,
            "elevation_error": fe,
            "azimuth_error": fa,
        }
    return entry


def _aggregate(objects):
    out = {}
    for key in AGGREGATE_KEYS:
        vals = [o["metrics"][key] for o in objects if o.get("metrics") and o["metrics"].get(key) is not None]
        out[key] = {"mean": float(np.mean(vals)), "max": float(np.max(vals)), "n": len(vals)} if vals else None
    out["failed"] = sum(1 for o in objects if o["status"] == "failed")
    return out


def _run_arm(inputs, rotations, angles, gt, extent, factors, translation_cfg, scale_cfg, timer, global_align):
    objs = inputs.objects
    n = len(objs)
    entries = [{"id": o.id, "kind": g.get("kind", o.label), "status": "ok"} for o, g in zip(objs, gt)]
    for k, r in enumerate(rotations):
        if isinstance(r, Exception):
            entries[k].update(_failure("rotation", r))
        else:
            entries[k]["rotation"] = _rotation_entry(r, angles[k], gt[k])

    ok = [k for k in range(n) if entries[k]["status"] == "ok"]
    scales = {}
    try:
        terms = timer.run(
            "scale", lambda: scale_terms(scale_inputs([objs[k] for k in ok], [angles[k] for k in ok], inputs.depth))
        )
        for k, t in zip(ok, terms):
            scales[k] = t.scale
            entries[k]["scale"] = {"estimate": t.scale, "gt": gt[k]["scale"], "terms": [t.size_2d, t.size_3d, t.depth]}
    except SculptorError as exc:
        for k in ok:
            entries[k].update(_failure("scale", exc))

    params = {}
    for k in sorted(scales):
        cfg = replace(translation_cfg, seed=object_seed(translation_cfg.seed, k))
        cloud = rotate_cloud(objs[k].asset, *angles[k])
        try:
            res = timer.run(
                "translation", solve_translation, objs[k].bbox, objs[k].mask, inputs.depth, cloud, scales[k], factors, cfg
            )
        except SculptorError as exc:
            entries[k].update(_failure("translation", exc))
            continue
        t, t_gt = np.asarray(res.translation), np.asarray(gt[k]["translation"])
        err = float(np.linalg.norm(t - t_gt))
        entries[k]["translation"] = {
            "estimate": list(res.translation),
            "gt": list(t_gt),
            "kept": res.kept,
            "samples": res.samples,
        }
        params[k] = CompositionParams(angles[k][0], angles[k][1], scales[k], res.translation)
        m = entries[k].setdefault("metrics", {})
        m["scale_rel_error"] = abs(scales[k] - gt[k]["scale"]) / gt[k]["scale"]
        m["translation_error"] = err
        m["translation_error_pct"] = 100.0 * err / extent
        m["t_z_error"] = abs(float(t[2] - t_gt[2]))

    for k, e in enumerate(entries):
        rot = e.get("rotation")
        if rot is not None:
            e.setdefault("metrics", {}).update(rot["errors"] or {})

    glob = None
    if params:
        keys = sorted(params)
        try:
            scene = timer.run(
                "compose",
                compose,
                [objs[k].asset for k in keys],
                [params[k] for k in keys],
                inputs.scaffold if global_align else None,
                [Evidence(objs[k].bbox, objs[k].mask, objs[k].label) for k in keys],
                factors,
                inputs.depth,
                ids=[objs[k].id for k in keys],
                cfg=translation_cfg,
            )
        except SculptorError as exc:
            glob = _failure("compose", exc)
        else:
            glob = scene.global_alignment.to_dict() if scene.global_alignment is not None else None
            for k, obj in zip(keys, scene.objects):
                c = obj.centroid
                err = float(np.linalg.norm(c - np.asarray(gt[k]["translation"])))
                entries[k]["final_centroid"] = list(map(float, c))
                entries[k]["metrics"]["centroid_error"] = err
                entries[k]["metrics"]["centroid_error_pct"] = 100.0 * err / extent
    return {"objects": entries, "global_alignment": glob, "aggregates": _aggregate(entries)}


@dataclass(frozen=True)
class EvalReport:
    report: dict  # reproducible part: errors, aggregates, config echo
    timing_ms: dict  # wall clock per stage, kept apart because it is not reproducible

    def to_dict(self):
        return self.report

    def arm(self, name):
        return self.report["arms"][name]

    def table(self) -> str:
        return format_table(self.report)


def config_echo(rotation_cfg, translation_cfg, scale_cfg, global_align):
    rot = {k: v for k, v in rotation_cfg.__dict__.items() if k != "simplex"}
    rot["elevation_range"] = list(rot["elevation_range"])
    rot.update(max_iters=rotation_cfg.simplex.max_iters, f_tol=rotation_cfg.simplex.f_tol, x_tol=rotation_cfg.simplex.x_tol)
    tr = dict(translation_cfg.__dict__)
    tr["seed"] = list(tr["seed"]) if isinstance(tr["seed"], tuple) else tr["seed"]
    return {
        "rotation": rot,
        "scale": dict(scale_cfg.__dict__),
        "translation": tr,
        "compose": {"global_alignment": bool(global_align)},
    }


def evaluate(
    inputs: SceneInputs,
    gt: dict,
    rotation_cfg: RotationSolverConfig = RotationSolverConfig(),
    translation_cfg: TranslationSolverConfig = TranslationSolverConfig(),
    scale_cfg: ScaleConfig = ScaleConfig(),
    jobs: int = 1,
    arms=ARMS,
    global_align: bool = True,
) -> EvalReport:
    """Run every arm on ``inputs`` and compare with ``gt`` (see ``scene_ground_truth``).

    Solver errors become per-object ``failed`` entries; the report is a pure
    function of the inputs and configs.
    """
    gt_objects = list(gt["objects"])
    if len(gt_objects) != len(inputs.objects):
        raise ValueError(f"{len(gt_objects)} ground-truth objects for {len(inputs.objects)} inputs")
    extent = float(gt["extent"])
    timer = StageTimer()
    full_cfg = replace(rotation_cfg, refine_enabled=True)
    rotations = []
    try:
        rotations = timer.run("rotation", solve_rotations, inputs.objects, full_cfg, jobs)
    except SculptorError:
        # Retry one at a time so a single bad object only fails itself.
        for o in inputs.objects:
            try:
                rotations.append(solve_rotations([o], full_cfg, 1)[0])
            except SculptorError as exc:
                rotations.append(exc)
    factors = inputs.factors()

    out_arms = {}
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}")
        refined = arm != "no_refine" and rotation_cfg.refine_enabled
        angles = [
            None if isinstance(r, Exception) else (r.refined if refined else r.coarse) for r in rotations
        ]
        tcfg = replace(translation_cfg, outlier_removal_enabled=False) if arm == "no_outlier_removal" else translation_cfg
        out_arms[arm] = _run_arm(inputs, rotations, angles, gt_objects, extent, factors, tcfg, scale_cfg, timer, global_align)

    report = {
        "scene": {k: gt[k] for k in ("seed", "noise", "outlier_fraction", "outliers") if k in gt}
        | {"extent": extent, "n_objects": len(gt_objects)},
        "ground_truth": gt_objects,
        "config": config_echo(rotation_cfg, translation_cfg, scale_cfg, global_align),
        "arms": out_arms,
    }
    return EvalReport(report, dict(timer.ms))


def _fmt(v, width=9):
    if v is None:
        return "-".rjust(width)
    if isinstance(v, float):
        return (f"{v:.4g}" if math.isfinite(v) else str(v)).rjust(width)
    return str(v).rjust(width)


TABLE_COLUMNS = (
    ("arm", None),
    ("id", None),
    ("kind", None),
    ("status", None),
    ("c_el", "coarse_elevation_error"),
    ("c_az", "coarse_azimuth_error"),
    ("el", "elevation_error"),
    ("az", "azimuth_error"),
    ("s_rel", "scale_rel_error"),
    ("t_err", "translation_error"),
    ("t_%ext", "translation_error_pct"),
    ("tz_err", "t_z_error"),
    ("c_%ext", "centroid_error_pct"),
)


def format_table(report: dict) -> str:
    """Aligned plain-text rendering of an evaluation report (errors in degrees / scene units)."""
    rows = [[name for name, _ in TABLE_COLUMNS]]
    for arm, body in report["arms"].items():
        for o in body["objects"]:
            status = o["status"]
            rot = o.get("rotation")
            if status == "ok" and rot is not None and rot["symmetric"]:
                status = "symmetric"
            m = o.get("metrics", {})
            rows.append([arm, o["id"], o["kind"], status] + [m.get(key) for _, key in TABLE_COLUMNS[4:]])
        agg = body["aggregates"]
        for stat in ("mean", "max"):
            rows.append(
                [arm, stat, "", f"{agg['failed']} failed" if stat == "mean" else ""]
                + [None if agg[key] is None else agg[key][stat] for _, key in TABLE_COLUMNS[4:]]
            )
    cells = [[_fmt(v).strip() for v in r] for r in rows]
    widths = [max(len(r[c]) for r in cells) for c in range(len(cells[0]))]
    lines = []
    for j, r in enumerate(cells):
        lines.append("  ".join(v.ljust(w) if c < 4 else v.rjust(w) for c, (v, w) in enumerate(zip(r, widths))))
        if j == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"

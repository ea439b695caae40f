"""``sculptor`` command-line front end.

Each pipeline stage is its own subcommand and reads/writes plain files, so
stages can be run separately and chained through their JSON outputs::

    sculptor synth --seed 7 --objects 3 --out scene/
    sculptor solve-rotation --manifest scene/manifest.json --out run/
    sculptor solve-scale --manifest scene/manifest.json --out run/
    sculptor solve-translation --manifest scene/manifest.json --out run/
    sculptor compose --manifest scene/manifest.json --out run/
    sculptor eval --manifest scene/manifest.json --out run/ --format table

Exit status: 0 success, 1 input error, 2 solver failure.  Failures print a
single JSON line on stderr: ``{"error": kind, "exit": code, "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .compose import Evidence, compose, inpaint_mask, objects_mask
from .errors import InputError, ManifestError, SculptorError, SolverError
from .formats import atomic_write, read_ply, write_pbm, write_pgm, write_ply
from .geometry import CompositionParams, rotate_cloud
from .manifest import DEFAULT_CONFIG, apply_overrides, dumps, load_manifest, rotation_config, save_report
from .pipeline import object_seed, scale_inputs, solve_rotations
from .render import RenderConfig, orbit_pose, render_points
from .scale import scale_terms
from .sceneio import load_inputs, read_ground_truth, write_scene_dir

log = logging.getLogger("sculptor")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    # Usage errors are input errors (exit 1), reported like every other error.
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, manifest=True):
    if manifest:
        p.add_argument("--manifest", type=Path, required=True, help="scene manifest (JSON)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (synth: scene seed; otherwise translation.seed)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="config override, repeatable")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sculptor", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"sculptor {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_ in (
        ("solve-rotation", "coarse grid search + simplex refinement per object"),
        ("solve-scale", "unified scale per object"),
        ("solve-translation", "robust translation per object"),
        ("compose", "assemble the scene (merged.ply + scene.json)"),
        ("masks", "inpainting masks per object and the all-objects mask"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name in ("solve-scale", "solve-translation", "compose"):
            p.add_argument("--rotation", type=Path, help="rotation.json (default: <out>/rotation.json)")
        if name in ("solve-translation", "compose"):
            p.add_argument("--scale", type=Path, help="scale.json (default: <out>/scale.json)")
        if name == "compose":
            p.add_argument("--translation", type=Path, help="translation.json (default: <out>/translation.json)")

    p = sub.add_parser("synth", help="generate a synthetic ground-truth scene directory")
    _common(p, manifest=False)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.0, help="depth noise sigma")
    p.add_argument("--outliers", type=float, default=0.0, help="fraction of depth pixels pushed back by 10 sigma")
    p.add_argument("--on-grid", type=float, default=0.5, help="probability of an on-grid GT rotation")
    p.add_argument("--kinds", default=None, help="comma-separated primitive kinds (box,cylinder,lshape,sphere)")

    p = sub.add_parser("eval", help="score all solver arms against the scene's ground truth")
    _common(p)
    p.add_argument("--gt", type=Path, help="ground truth (default: gt.json next to the manifest)")
    p.add_argument("--format", choices=("json", "table"), default="json")

    p = sub.add_parser("render", help="render PGM views of assets")
    p.add_argument("--manifest", type=Path, help="render every asset in this manifest")
    p.add_argument("--ply", type=Path, action="append", default=[], help="render this cloud (repeatable)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--view", action="append", default=[], metavar="ELEV,AZIM", help="view angles in degrees")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--splat", type=float, default=2.0)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


# ---------------------------------------------------------------- helpers


def _overrides(args):
    extra = list(args.override)
    if getattr(args, "seed", None) is not None and args.command != "synth":
        extra.append(f"translation.seed={args.seed}")
    return extra


def _load(args):
    m = load_manifest(args.manifest, _overrides(args))
    return m, load_inputs(m)


def _write_run(args, config, extra=None):
    doc = {
        "command": args.command,
        "version": __version__,
        "manifest": None if getattr(args, "manifest", None) is None else str(Path(args.manifest).resolve()),
        "overrides": list(args.override),
        "seed": args.seed,
        "jobs": args.jobs,
        "config": config,
    }
    doc.update(extra or {})
    save_report(doc, args.out / "run.json")


def _stage_file(args, name, explicit):
    path = explicit if explicit is not None else args.out / f"{name}.json"
    return Path(path)


def _read_stage(path: Path, stage: str, ids):
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {stage} file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("stage") != stage or not isinstance(doc.get("objects"), list):
        raise InputError(f"{path} is not a {stage} file")
    by_id = {o.get("id"): o for o in doc["objects"] if isinstance(o, dict)}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise InputError(f"{path} has no entry for object(s) {missing}")
    return [by_id[i] for i in ids]


def _rotation_doc(inputs, rcfg, jobs):
    est = solve_rotations(inputs.objects, rcfg, jobs)
    objects = []
    for o, r in zip(inputs.objects, est):
        e, a = r.refined
        objects.append({"id": o.id, "elevation": e, "azimuth": a, **r.to_dict()})
    return {"stage": "rotation", "arm": "full" if rcfg.refine_enabled else "no_refine", "objects": objects}


def _angles(rows):
    try:
        return [(float(r["elevation"]), float(r["azimuth"])) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed rotation entry: {exc}") from exc


def _scale_doc(inputs, angles):
    ins = scale_inputs(inputs.objects, angles, inputs.depth)
    terms = scale_terms(ins)
    return {
        "stage": "scale",
        "formula": "paper",
        "objects": [
            {
                "id": o.id,
                "scale": t.scale,
                "terms": {"size_2d": t.size_2d, "size_3d": t.size_3d, "depth": t.depth},
                "input": {"bbox": list(i.bbox.as_tuple()), "diag": i.diag, "mean_depth": i.mean_depth},
            }
            for o, t, i in zip(inputs.objects, terms, ins)
        ],
    }


def _scales(rows):
    try:
        return [float(r["scale"]) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scale entry: {exc}") from exc


def _translation_doc(inputs, angles, scales, tcfg):
    from .translation import solve_translation

    factors = inputs.factors()
    objects = []
    for k, (o, ang, s) in enumerate(zip(inputs.objects, angles, scales)):
        cfg = replace(tcfg, seed=object_seed(tcfg.seed, k))
        res = solve_translation(o.bbox, o.mask, inputs.depth, rotate_cloud(o.asset, *ang), s, factors, cfg)
        objects.append({"id": o.id, **res.to_dict()})
    return {"stage": "translation", "factors": factors.to_dict(), "objects": objects}


def _translations(rows):
    try:
        return [tuple(float(v) for v in r["translation"]) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed translation entry: {exc}") from exc


def _solved(args, m, inputs, upto):
    """Angles / scales / translations, read from stage files when present."""
    ids = inputs.ids
    rpath = _stage_file(args, "rotation", getattr(args, "rotation", None))
    if rpath.exists():
        angles = _angles(_read_stage(rpath, "rotation", ids))
    elif getattr(args, "rotation", None) is not None:
        raise InputError(f"rotation file not found: {rpath}")
    else:
        doc = _rotation_doc(inputs, m.rotation_config(), args.jobs)
        save_report(doc, rpath)
        angles = _angles(doc["objects"])
    if upto == "rotation":
        return angles, None, None

    spath = _stage_file(args, "scale", getattr(args, "scale", None))
    if spath.exists():
        scales = _scales(_read_stage(spath, "scale", ids))
    elif getattr(args, "scale", None) is not None:
        raise InputError(f"scale file not found: {spath}")
    else:
        doc = _scale_doc(inputs, angles)
        save_report(doc, spath)
        scales = _scales(doc["objects"])
    if upto == "scale":
        return angles, scales, None

    tpath = _stage_file(args, "translation", getattr(args, "translation", None))
    if tpath.exists():
        trans = _translations(_read_stage(tpath, "translation", ids))
    elif getattr(args, "translation", None) is not None:
        raise InputError(f"translation file not found: {tpath}")
    else:
        doc = _translation_doc(inputs, angles, scales, m.translation_config())
        save_report(doc, tpath)
        trans = _translations(doc["objects"])
    return angles, scales, trans


# ------------------------------------------------------------ subcommands


def cmd_solve_rotation(args):
    m, inputs = _load(args)
    _write_run(args, m.config)
    save_report(_rotation_doc(inputs, m.rotation_config(), args.jobs), args.out / "rotation.json")


def cmd_solve_scale(args):
    m, inputs = _load(args)
    _write_run(args, m.config)
    angles, _, _ = _solved(args, m, inputs, "rotation")
    save_report(_scale_doc(inputs, angles), args.out / "scale.json")


def cmd_solve_translation(args):
    m, inputs = _load(args)
    _write_run(args, m.config)
    angles, scales, _ = _solved(args, m, inputs, "scale")
    save_report(_translation_doc(inputs, angles, scales, m.translation_config()), args.out / "translation.json")


def cmd_compose(args):
    from .plotting import plot_composition

    m, inputs = _load(args)
    _write_run(args, m.config)
    angles, scales, trans = _solved(args, m, inputs, "translation")
    params = [CompositionParams(e, a, s, t) for (e, a), s, t in zip(angles, scales, trans)]
    align = m.config["compose"]["global_alignment"]
    scene = compose(
        [o.asset for o in inputs.objects],
        params,
        inputs.scaffold if align else None,
        [Evidence(o.bbox, o.mask, o.label) for o in inputs.objects],
        inputs.factors() if align else None,
        inputs.depth,
        ids=inputs.ids,
        cfg=m.translation_config(),
    )
    write_ply(args.out / "merged.ply", scene.merged)
    doc = scene.to_dict()
    doc["centroids"] = {i: list(map(float, c)) for i, c in zip(scene.ids, scene.object_centroids())}
    if inputs.scaffold is not None:
        doc["scaffold_path"] = str(m.scaffold_path)
    save_report(doc, args.out / "scene.json")
    gt_path = m.root / "gt.json"
    gt = read_ground_truth(gt_path)["objects"] if gt_path.exists() else None
    plot_composition(
        scene.objects,
        scene.scaffold,
        args.out / "composition.png",
        list(scene.ids),
        [g["translation"] for g in gt] if gt else None,
    )


def cmd_masks(args):
    m, inputs = _load(args)
    _write_run(args, m.config)
    boxes = [o.bbox for o in inputs.objects]
    masks = [o.mask for o in inputs.objects]
    files = {}
    for k, o in enumerate(inputs.objects):
        path = args.out / "masks" / f"inpaint_{o.id}.pbm"
        write_pbm(path, inpaint_mask(k, boxes, masks))
        files[o.id] = str(path.relative_to(args.out))
    write_pbm(args.out / "masks" / "objects.pbm", objects_mask(masks))
    save_report({"stage": "masks", "inpaint": files, "objects": "masks/objects.pbm"}, args.out / "masks.json")


def cmd_synth(args):
    from .plotting import plot_scene_inputs
    from .synth import generate_scene

    config = apply_overrides(DEFAULT_CONFIG, args.override)
    kinds = tuple(k.strip() for k in args.kinds.split(",")) if args.kinds else None
    seed = 0 if args.seed is None else args.seed
    scene = generate_scene(args.objects, seed, args.noise, args.outliers, kinds=kinds, on_grid=args.on_grid)
    write_scene_dir(scene, args.out, config)
    _write_run(
        args,
        config,
        {
            "synth": {
                "objects": args.objects,
                "seed": seed,
                "noise": args.noise,
                "outliers": args.outliers,
                "on_grid": args.on_grid,
                "kinds": list(scene.kinds),
            }
        },
    )
    plot_scene_inputs(scene.reference, scene.depth, scene.masks, args.out / "preview.png")


def cmd_eval(args):
    from .evaluation import evaluate
    from .plotting import plot_eval

    m, inputs = _load(args)
    _write_run(args, m.config)
    gt = read_ground_truth(args.gt if args.gt is not None else m.root / "gt.json")
    report = evaluate(
        inputs,
        gt,
        m.rotation_config(),
        m.translation_config(),
        m.scale_config(),
        jobs=args.jobs,
        global_align=m.config["compose"]["global_alignment"],
    )
    save_report(report.report, args.out / "report.json")
    text = report.table()
    atomic_write(args.out / "report.txt", text.encode("utf-8"))
    save_report({k: round(v, 3) for k, v in report.timing_ms.items()}, args.out / "timing.json")
    plot_eval(report.report, args.out / "eval.png")
    sys.stdout.write(text if args.format == "table" else dumps(report.report))


def _parse_view(text):
    try:
        e, a = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"view {text!r} is not ELEV,AZIM") from exc
    return e, a


def cmd_render(args):
    rcfg = rotation_config(apply_overrides(DEFAULT_CONFIG, args.override)["rotation"])
    clouds = []
    if args.manifest is not None:
        m = load_manifest(args.manifest, args.override)
        clouds += [(o.id, read_ply(o.asset_path)) for o in m.objects]
    clouds += [(p.stem, read_ply(p)) for p in args.ply]
    if not clouds:
        raise InputError("render needs --manifest or --ply")
    views = [_parse_view(v) for v in args.view] or [(0.0, 0.0)]
    written = []
    for name, cloud in clouds:
        for e, a in views:
            # Same convention as the rotation solver: rotate the asset, view it from the front.
            rotated = rotate_cloud(cloud, e, a)
            pose = orbit_pose(rotated, 0.0, 0.0, args.size, projection=rcfg.projection)
            r = render_points(rotated, pose, RenderConfig(args.size, args.splat, rcfg.background))
            path = args.out / f"{name}_e{e:g}_a{a:g}.pgm"
            write_pgm(path, r.image)
            written.append(str(path.relative_to(args.out)))
    _write_run(args, {"rotation": dict(DEFAULT_CONFIG["rotation"])}, {"views": [list(v) for v in views], "files": written})


COMMANDS = {
    "solve-rotation": cmd_solve_rotation,
    "solve-scale": cmd_solve_scale,
    "solve-translation": cmd_solve_translation,
    "compose": cmd_compose,
    "masks": cmd_masks,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "render": cmd_render,
}


def _fail(kind, code, exc, extra=None):
    doc = {"error": kind, "exit": code, "message": str(exc)}
    doc.update(extra or {})
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def _setup_logging(verbose):
    level = os.environ.get("SCULPTOR_LOG", "").upper() or ("DEBUG" if verbose > 1 else "INFO" if verbose else "WARNING")
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", EXIT_INPUT, exc)
    _setup_logging(args.verbose)
    try:
        if args.jobs < 1:
            raise InputError("--jobs must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args)
    except ManifestError as exc:
        return _fail("manifest", EXIT_INPUT, "; ".join(exc.violations), {"violations": exc.violations})
    except SolverError as exc:
        return _fail("solver", EXIT_SOLVER, exc)
    except SculptorError as exc:
        return _fail("input", EXIT_INPUT, exc)
    except OSError as exc:
        return _fail("io", EXIT_INPUT, exc)
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        return _fail("solver", EXIT_SOLVER, exc)
    except Exception as exc:  # noqa: BLE001 - never exit with a traceback
        log.debug("unexpected failure", exc_info=True)
        return _fail("internal", EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

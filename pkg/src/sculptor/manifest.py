"""Scene manifests: one JSON file describing a solve job.

Paths inside a manifest are relative to the manifest's directory.  Solver
settings live in ``config.rotation``, ``config.scale``,
``config.translation`` and ``config.compose``; anything omitted takes the
documented default (C=24, K=500, lambda=3).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import InputError, ManifestError
from .formats import atomic_write
from .geometry import BBox2
from .optimize import SimplexConfig
from .rotation import RotationSolverConfig
from .scale import ScaleConfig
from .translation import TranslationSolverConfig

VERSION = 1
UNITS_NOTE = "assets are normalized to a unit AABB diagonal with the centroid at the origin"

_BBOX = {
    "type": "object",
    "required": ["x_min", "y_min", "x_max", "y_max"],
    "properties": {k: {"type": "integer", "minimum": 0} for k in ("x_min", "y_min", "x_max", "y_max")},
    "additionalProperties": False,
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "rotation": {
        "C": {"type": "integer", "minimum": 2},
        "elevation_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "descriptor": {"type": "string"},
        "coarse_image_size": {"type": "integer", "minimum": 16},
        "refine_image_size": {"type": "integer", "minimum": 16},
        "coarse_splat_radius": {"type": "number", "minimum": 0},
        "refine_splat_radius": {"type": "number", "minimum": 0},
        "projection": {"enum": ["orthographic", "perspective"]},
        "background": {"type": "number", "minimum": 0, "maximum": 1},
        "refine_enabled": {"type": "boolean"},
        "objective": {"enum": ["1-ssim"]},
        "max_iters": _POS_INT,
        "f_tol": _POS,
        "x_tol": _POS,
    },
    "scale": {"scale_formula": {"enum": ["paper"]}},
    "translation": {
        "K": _POS_INT,
        "mad_lambda": _POS,
        "hpr_gamma": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "outlier_removal_enabled": {"type": "boolean"},
    },
    "compose": {"global_alignment": {"type": "boolean"}},
}

SCHEMA = {
    "type": "object",
    "required": ["version", "objects", "reference_path", "depth_path"],
    "properties": {
        "version": {"const": VERSION},
        "units": {"type": "string"},
        "reference_path": {"type": "string"},
        "depth_path": {"type": "string"},
        "depth_valid_path": {"type": "string"},
        "depth_range": _POS,
        "scaffold_path": {"type": "string"},
        "objects": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "asset_path", "bbox", "mask_path", "patch_path"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "asset_path": {"type": "string"},
                    "bbox": _BBOX,
                    "mask_path": {"type": "string"},
                    "label": {"type": "string"},
                    "patch_path": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "config": {
            "type": "object",
            "properties": {
                block: {"type": "object", "properties": props, "additionalProperties": False}
                for block, props in CONFIG_SCHEMA.items()
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _defaults():
    rot = RotationSolverConfig()
    tr = TranslationSolverConfig()
    return {
        "rotation": {
            "C": rot.C,
            "elevation_range": list(rot.elevation_range),
            "descriptor": rot.descriptor,
            "coarse_image_size": rot.coarse_image_size,
            "refine_image_size": rot.refine_image_size,
            "coarse_splat_radius": rot.coarse_splat_radius,
            "refine_splat_radius": rot.refine_splat_radius,
            "projection": rot.projection,
            "background": rot.background,
            "refine_enabled": rot.refine_enabled,
            "objective": rot.objective,
            "max_iters": rot.simplex.max_iters,
            "f_tol": rot.simplex.f_tol,
            "x_tol": rot.simplex.x_tol,
        },
        "scale": {"scale_formula": ScaleConfig().scale_formula},
        "translation": {
            "K": tr.K,
            "mad_lambda": tr.mad_lambda,
            "hpr_gamma": tr.hpr_gamma,
            "seed": tr.seed,
            "outlier_removal_enabled": tr.outlier_removal_enabled,
        },
        "compose": {"global_alignment": True},
    }


DEFAULT_CONFIG = _defaults()


def _location(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "manifest"


def _violation(err) -> str:
    where = _location(err.absolute_path)
    if err.validator == "required":
        missing = err.message.split("'")[1]
        return f"{where + '.' if where != 'manifest' else ''}{missing} missing"
    if err.validator == "additionalProperties":
        return f"{where}: {err.message}"
    return f"{where}: {err.message}"


def validate(doc) -> list[str]:
    """Every schema violation, in a stable order."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [_violation(e) for e in errs]


@dataclass(frozen=True)
class ObjectEntry:
    id: str
    asset_path: Path
    bbox: BBox2
    mask_path: Path
    patch_path: Path
    label: str = ""


@dataclass(frozen=True)
class SceneManifest:
    path: Path
    version: int
    objects: tuple
    reference_path: Path
    depth_path: Path
    depth_valid_path: Path | None
    depth_range: float | None
    scaffold_path: Path | None
    config: dict  # the full, default-filled config blocks
    units: str = UNITS_NOTE

    @property
    def root(self) -> Path:
        return self.path.parent

    def rotation_config(self) -> RotationSolverConfig:
        return rotation_config(self.config["rotation"])

    def translation_config(self) -> TranslationSolverConfig:
        return TranslationSolverConfig(**self.config["translation"])

    def scale_config(self) -> ScaleConfig:
        return ScaleConfig(**self.config["scale"])


def rotation_config(block: dict) -> RotationSolverConfig:
    b = dict(block)
    simplex = SimplexConfig(max_iters=b.pop("max_iters"), f_tol=b.pop("f_tol"), x_tol=b.pop("x_tol"))
    b["elevation_range"] = tuple(b["elevation_range"])
    return RotationSolverConfig(simplex=simplex, **b)


def merged_config(user: dict | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    for block, values in (user or {}).items():
        cfg[block].update(values)
    return cfg


def parse_override(text: str):
    """``key=value`` with a JSON value (bare words stay strings)."""
    if "=" not in text:
        raise InputError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``block.key=value`` (or unambiguous ``key=value``) overrides."""
    cfg = copy.deepcopy(config)
    for text in overrides or ():
        key, value = parse_override(text)
        if "." in key:
            block, name = key.split(".", 1)
            if block not in CONFIG_SCHEMA or name not in CONFIG_SCHEMA[block]:
                raise InputError(f"unknown config key {key!r}")
        else:
            owners = [b for b, props in CONFIG_SCHEMA.items() if key in props]
            if not owners:
                raise InputError(f"unknown config key {key!r}")
            if len(owners) > 1:
                raise InputError(f"ambiguous config key {key!r}; use one of {[f'{b}.{key}' for b in owners]}")
            block, name = owners[0], key
        cfg[block][name] = value
    errs = [
        _violation(e)
        for e in jsonschema.Draft202012Validator(SCHEMA["properties"]["config"]).iter_errors(cfg)
    ]
    if errs:
        raise ManifestError([f"config.{e}" for e in errs])
    return cfg


def load_manifest(path, overrides=None) -> SceneManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    violations = validate(doc)
    if violations:
        raise ManifestError(violations)

    root = path.parent
    problems = []
    seen = {}
    for k, o in enumerate(doc["objects"]):
        if o["id"] in seen:
            problems.append(f"duplicate object id {o['id']!r} at objects[{seen[o['id']]}] and objects[{k}]")
        else:
            seen[o["id"]] = k
        b = o["bbox"]
        if not (b["x_min"] < b["x_max"] and b["y_min"] < b["y_max"]):
            problems.append(f"objects[{k}].bbox is empty")

    def resolve(rel, where):
        if rel is None:
            return None
        p = (root / rel).resolve()
        if not p.exists():
            problems.append(f"{where}: file not found: {p}")
        return p

    ref = resolve(doc["reference_path"], "reference_path")
    depth = resolve(doc["depth_path"], "depth_path")
    valid = resolve(doc.get("depth_valid_path"), "depth_valid_path")
    scaffold = resolve(doc.get("scaffold_path"), "scaffold_path")
    entries = []
    for k, o in enumerate(doc["objects"]):
        paths = [resolve(o[f], f"objects[{k}].{f}") for f in ("asset_path", "mask_path", "patch_path")]
        b = o["bbox"]
        if b["x_min"] < b["x_max"] and b["y_min"] < b["y_max"]:
            entries.append(
                ObjectEntry(o["id"], paths[0], BBox2(b["x_min"], b["y_min"], b["x_max"], b["y_max"]), paths[1], paths[2], o.get("label", ""))
            )
    if problems:
        raise ManifestError(problems)

    config = apply_overrides(merged_config(doc.get("config")), overrides)
    try:
        m = SceneManifest(
            path=path.resolve(),
            version=doc["version"],
            objects=tuple(entries),
            reference_path=ref,
            depth_path=depth,
            depth_valid_path=valid,
            depth_range=doc.get("depth_range"),
            scaffold_path=scaffold,
            config=config,
            units=doc.get("units", UNITS_NOTE),
        )
        m.rotation_config(), m.translation_config(), m.scale_config()
    except (TypeError, ValueError) as exc:
        raise ManifestError([f"config: {exc}"]) from exc
    return m


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def save_report(report, path):
    """Write a JSON report atomically; identical input gives identical bytes."""
    atomic_write(path, dumps(report).encode("utf-8"))


def manifest_dict(objects, reference_path, depth_path, depth_range=None, scaffold_path=None, config=None):
    """Build a manifest document (paths as given, relative to its directory)."""
    doc = {
        "version": VERSION,
        "units": UNITS_NOTE,
        "reference_path": str(reference_path),
        "depth_path": str(depth_path),
        "objects": [
            {
                "id": o["id"],
                "asset_path": str(o["asset_path"]),
                "bbox": dict(zip(("x_min", "y_min", "x_max", "y_max"), o["bbox"])),
                "mask_path": str(o["mask_path"]),
                "label": o.get("label", ""),
                "patch_path": str(o["patch_path"]),
            }
            for o in objects
        ],
        "config": copy.deepcopy(config) if config is not None else copy.deepcopy(DEFAULT_CONFIG),
    }
    if depth_range is not None:
        doc["depth_range"] = float(depth_range)
    if scaffold_path is not None:
        doc["scaffold_path"] = str(scaffold_path)
    return doc


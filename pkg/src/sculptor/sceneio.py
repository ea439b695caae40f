"""Scene directories: a manifest plus the rasters and clouds it names.

Layout written for synthetic scenes::

    manifest.json  gt.json  reference.pgm  depth.pfm  depth.valid.pbm
    scaffold.ply   assets/<id>.ply  masks/<id>.pbm  patches/<id>.pgm
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .formats import read_pbm, read_pfm, read_pgm, read_ply, write_pbm, write_pfm, write_pgm, write_ply
from .geometry import DepthMap, PointCloud, cloud_aabb
from .manifest import SceneManifest, manifest_dict, save_report
from .pipeline import ObjectInput
from .synth import SyntheticScene
from .translation import AxisFactors, axis_factors, default_depth_range


def object_id(i: int) -> str:
    return f"obj{i}"


def scene_ground_truth(scene: SyntheticScene) -> dict:
    """JSON-ready ground truth of a synthetic scene."""
    return {
        "seed": scene.seed,
        "noise": scene.noise,
        "outlier_fraction": scene.outlier_fraction,
        "outliers": scene.outliers,
        "extent": scene.extent,
        "objects": [
            {"id": object_id(i), "kind": k, "on_grid": g, **p.to_dict()}
            for i, (k, g, p) in enumerate(zip(scene.kinds, scene.on_grid, scene.gt_params))
        ],
    }


def write_scene_dir(scene: SyntheticScene, out, config: dict | None = None) -> Path:
    out = Path(out)
    for sub in ("assets", "masks", "patches"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    write_pgm(out / "reference.pgm", scene.reference)
    write_pfm(out / "depth.pfm", scene.depth)
    write_ply(out / "scaffold.ply", scene.scaffold)
    objects = []
    for i, (asset, mask, box, kind) in enumerate(zip(scene.assets, scene.masks, scene.boxes, scene.kinds)):
        oid = object_id(i)
        write_ply(out / "assets" / f"{oid}.ply", asset)
        write_pbm(out / "masks" / f"{oid}.pbm", mask)
        write_pgm(out / "patches" / f"{oid}.pgm", scene.patch(i))
        objects.append(
            {
                "id": oid,
                "asset_path": f"assets/{oid}.ply",
                "bbox": box.as_tuple(),
                "mask_path": f"masks/{oid}.pbm",
                "label": kind,
                "patch_path": f"patches/{oid}.pgm",
            }
        )
    doc = manifest_dict(objects, "reference.pgm", "depth.pfm", scene.depth_range, "scaffold.ply", config)
    doc["depth_valid_path"] = "depth.valid.pbm"
    save_report(doc, out / "manifest.json")
    save_report(scene_ground_truth(scene), out / "gt.json")
    return out


def read_ground_truth(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read ground truth {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", path, f"line {exc.lineno}") from exc
    if not isinstance(doc, dict) or "objects" not in doc or "extent" not in doc:
        raise FormatError("ground truth needs 'objects' and 'extent'", path)
    return doc


@dataclass(frozen=True)
class SceneInputs:
    """Everything the solvers consume, independent of where it came from."""

    objects: tuple  # ObjectInput per object
    reference: np.ndarray
    depth: DepthMap
    scaffold: PointCloud | None
    depth_range: float

    @property
    def ids(self):
        return tuple(o.id for o in self.objects)

    def factors(self) -> AxisFactors:
        if self.scaffold is None:
            raise InputError("translation needs a scaffold to fix the axis factors")
        h, w = self.depth.shape
        return axis_factors(self.scaffold, w, h, self.depth_range)

    @property
    def extent(self) -> float:
        if self.scaffold is None:
            raise InputError("scene extent needs a scaffold")
        return cloud_aabb(self.scaffold).diagonal


def _check_shape(name, arr, shape):
    if arr.shape != shape:
        raise InputError(f"{name} has shape {arr.shape}, expected {shape}")


def load_inputs(manifest: SceneManifest) -> SceneInputs:
    reference = read_pgm(manifest.reference_path)
    depth = read_pfm(manifest.depth_path, manifest.depth_valid_path)
    _check_shape("depth map", depth.depth, reference.shape)
    scaffold = read_ply(manifest.scaffold_path) if manifest.scaffold_path is not None else None
    objects = []
    for o in manifest.objects:
        mask = read_pbm(o.mask_path)
        _check_shape(f"mask of {o.id!r}", mask, reference.shape)
        if o.bbox.x_max > reference.shape[1] or o.bbox.y_max > reference.shape[0]:
            raise InputError(f"bbox of {o.id!r} exceeds the {reference.shape[1]}x{reference.shape[0]} image")
        objects.append(ObjectInput(o.id, read_ply(o.asset_path), read_pgm(o.patch_path), mask, o.bbox, o.label))
    depth_range = manifest.depth_range if manifest.depth_range is not None else default_depth_range(depth)
    return SceneInputs(tuple(objects), reference, depth, scaffold, float(depth_range))


def inputs_from_scene(scene: SyntheticScene) -> SceneInputs:
    """In-memory equivalent of writing ``scene`` and loading it back."""
    objects = tuple(
        ObjectInput(object_id(i), a, scene.patch(i), m, b, k)
        for i, (a, m, b, k) in enumerate(zip(scene.assets, scene.masks, scene.boxes, scene.kinds))
    )
    return SceneInputs(objects, scene.reference, scene.depth, scene.scaffold, scene.depth_range)

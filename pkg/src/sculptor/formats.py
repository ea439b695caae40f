"""Readers and writers for point clouds (PLY) and rasters (PGM, PFM, PBM).

Every reader raises :class:`~sculptor.errors.FormatError` on malformed
input, with the file path and, where known, the line or byte position.
Byte layouts are described in ``docs/formats.md``.
"""

from __future__ import annotations

import logging
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .geometry import DepthMap, PointCloud, check_gray, check_mask

log = logging.getLogger(__name__)

MAX_DIM = 1 << 15  # largest raster side accepted by the readers

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
_FLOAT_TYPES = {"f4", "f8"}


def atomic_write(path, data: bytes):
    """Write ``data`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", path) from exc


# --------------------------------------------------------------------- PLY


def write_ply(path, cloud: PointCloud, binary: bool = True):
    """PLY with double x, y, z (and intensity when present).

    Binary files are little-endian and round-trip bit-exactly; ASCII files
    carry 9 significant digits.
    """
    props = ["x", "y", "z"] + (["intensity"] if cloud.intensity is not None else [])
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {len(cloud)}"]
    header += [f"property double {p}" for p in props]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    cols = [cloud.points] + ([cloud.intensity[:, None]] if cloud.intensity is not None else [])
    table = np.hstack(cols) if len(cloud) else np.zeros((0, len(props)))
    if binary:
        body = np.ascontiguousarray(table, dtype="<f8").tobytes()
    else:
        body = "".join(" ".join(f"{v:.9g}" for v in row) + "\n" for row in table).encode("ascii")
    atomic_write(path, head + body)


def _parse_ply_header(data: bytes, path):
    end = data.find(b"end_header")
    if not data.startswith(b"ply"):
        raise FormatError("missing 'ply' magic", path, "line 1")
    if end < 0:
        raise FormatError("header has no end_header line", path)
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1
    try:
        lines = data[:end].decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise FormatError("header is not ASCII", path) from exc
    fmt = None
    elements = []  # [name, count, [(prop, dtype)], first line]
    for no, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        key = parts[0]
        if key == "format":
            if len(parts) != 3 or parts[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise FormatError(f"unsupported format line {raw.strip()!r}", path, f"line {no}")
            fmt = parts[1]
        elif key == "element":
            if len(parts) != 3 or not re.fullmatch(r"\d+", parts[2]):
                raise FormatError(f"malformed element line {raw.strip()!r}", path, f"line {no}")
            elements.append([parts[1], int(parts[2]), [], no])
        elif key == "property":
            if not elements:
                raise FormatError("property before any element", path, f"line {no}")
            if len(parts) >= 2 and parts[1] == "list":
                if len(parts) != 5 or parts[2] not in _PLY_TYPES or parts[3] not in _PLY_TYPES:
                    raise FormatError(f"malformed list property {raw.strip()!r}", path, f"line {no}")
                elements[-1][2].append((parts[4], ("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]])))
            else:
                if len(parts) != 3 or parts[1] not in _PLY_TYPES:
                    raise FormatError(f"malformed property line {raw.strip()!r}", path, f"line {no}")
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
        else:
            raise FormatError(f"unknown header keyword {key!r}", path, f"line {no}")
    if fmt is None:
        raise FormatError("header has no format line", path)
    return fmt, elements, body_start


def read_ply(path) -> PointCloud:
    """Read the ``vertex`` element's x, y, z (and optional intensity)."""
    data = _read_bytes(path)
    fmt, elements, pos = _parse_ply_header(data, path)
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise FormatError("no vertex element", path)
    if fmt == "binary_big_endian":
        raise FormatError("binary_big_endian PLY is not supported", path)
    text_rows = data[pos:].decode("ascii", errors="replace").splitlines() if fmt == "ascii" else None
    row_cursor = 0
    result = None
    for name, count, props, line_no in elements:
        if fmt == "ascii":
            rows = text_rows[row_cursor : row_cursor + count]
            if len(rows) < count:
                raise FormatError(
                    f"element {name!r}: expected {count} rows, found {len(rows)}", path, f"header line {line_no}"
                )
            table = _ascii_table(rows, props, path, row_cursor, name)
            row_cursor += count
        else:
            table, pos = _binary_table(data, pos, count, props, path, name, line_no)
        if name == "vertex":
            result = _vertex_cloud(table, props, path)
    return result


def _ascii_table(rows, props, path, first_row, name):
    if any(isinstance(t, tuple) for _, t in props):
        if name == "vertex":
            raise FormatError("list properties on vertices are not supported", path)
        return None  # other elements with lists are skipped
    out = np.empty((len(rows), len(props)))
    for k, row in enumerate(rows):
        where = f"body line {first_row + k + 1}"
        parts = row.split()
        if len(parts) != len(props):
            raise FormatError(
                f"element {name!r} row {k}: expected {len(props)} values, found {len(parts)}", path, where
            )
        try:
            out[k] = [float(v) for v in parts]
        except ValueError as exc:
            raise FormatError(f"element {name!r} row {k}: non-numeric value", path, where) from exc
    return out


def _binary_table(data, pos, count, props, path, name, line_no):
    if any(isinstance(t, tuple) for _, t in props):
        if name == "vertex":
            raise FormatError("list properties on vertices are not supported", path)
        # Walk list rows to find the element's end.
        for _ in range(count):
            for _, t in props:
                if isinstance(t, tuple):
                    _, ct, it = t
                    csize = np.dtype(ct).itemsize
                    if pos + csize > len(data):
                        raise FormatError(f"element {name!r} truncated", path, f"byte {pos}")
                    n = int(np.frombuffer(data, dtype="<" + ct, count=1, offset=pos)[0])
                    pos += csize + n * np.dtype(it).itemsize
                else:
                    pos += np.dtype(t).itemsize
        if pos > len(data):
            raise FormatError(f"element {name!r} truncated", path, f"byte {len(data)}")
        return None, pos
    dtype = np.dtype([(p, "<" + t) for p, t in props])
    need = count * dtype.itemsize
    have = len(data) - pos
    if have < need:
        found = have // dtype.itemsize if dtype.itemsize else 0
        raise FormatError(
            f"element {name!r}: expected {count} rows, found {found}", path, f"header line {line_no}"
        )
    table = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return table, pos + need


def _vertex_cloud(table, props, path):
    names = [p for p, _ in props]
    types = dict(props)
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise FormatError(f"vertex element lacks property {axis!r}", path)
        if types[axis] not in _FLOAT_TYPES:
            raise FormatError(f"vertex property {axis!r} must be float or double, not {types[axis]}", path)
    extra = [n for n in names if n not in ("x", "y", "z", "intensity")]
    if extra:
        log.warning("%s: ignoring vertex properties %s", path, ", ".join(extra))
    if table.dtype.names:  # binary structured array
        col = lambda n: np.asarray(table[n], dtype=np.float64)  # noqa: E731
    else:
        col = lambda n: table[:, names.index(n)]  # noqa: E731
    pts = np.stack([col("x"), col("y"), col("z")], axis=1) if len(table) else np.zeros((0, 3))
    inten = col("intensity") if "intensity" in names and len(table) else None
    if not np.all(np.isfinite(pts)):
        raise FormatError("non-finite vertex coordinates", path)
    try:
        return PointCloud(pts, inten)
    except ValueError as exc:
        raise FormatError(str(exc), path) from exc


# ------------------------------------------------------------ PNM family


def _pnm_header(data: bytes, magic: bytes, fields: int, path):
    """Parse ``magic`` plus ``fields`` whitespace-separated tokens.

    Returns (tokens, offset of the first payload byte).
    """
    if not data.startswith(magic):
        found = data[:2].decode("latin-1") if data else "empty file"
        raise FormatError(f"wrong magic: expected {magic.decode()}, found {found!r}", path, "byte 0")
    pos = len(magic)
    tokens = []
    while len(tokens) < fields:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated header", path, f"byte {pos}")
        tokens.append(data[start:pos].decode("latin-1"))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("header must end with one whitespace byte", path, f"byte {pos}")
    return tokens, pos + 1


def _dims(tokens, path):
    try:
        w, h = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise FormatError(f"non-integer dimensions {tokens[:2]}", path) from exc
    if not (0 < w <= MAX_DIM and 0 < h <= MAX_DIM):
        raise FormatError(f"dimensions {w}x{h} outside 1..{MAX_DIM}", path)
    return w, h


def _payload(data, start, need, path):
    have = len(data) - start
    if have < need:
        raise FormatError(f"payload truncated: expected {need} bytes, found {have}", path, f"byte {start}")
    if have > need:
        log.warning("%s: ignoring %d trailing bytes", path, have - need)
    return data[start : start + need]


def write_pgm(path, img):
    """16-bit binary PGM (P5, maxval 65535, big-endian samples)."""
    img = check_gray(img)
    h, w = img.shape
    q = np.round(img * 65535.0).astype(">u2")
    atomic_write(path, f"P5\n{w} {h}\n65535\n".encode("ascii") + q.tobytes())


def read_pgm(path) -> np.ndarray:
    data = _read_bytes(path)
    tokens, start = _pnm_header(data, b"P5", 3, path)
    w, h = _dims(tokens, path)
    try:
        maxval = int(tokens[2])
    except ValueError as exc:
        raise FormatError(f"non-integer maxval {tokens[2]!r}", path) from exc
    if not 0 < maxval <= 65535:
        raise FormatError(f"maxval {maxval} outside 1..65535", path)
    dtype = ">u2" if maxval > 255 else "u1"
    raw = _payload(data, start, w * h * np.dtype(dtype).itemsize, path)
    vals = np.frombuffer(raw, dtype=dtype).reshape(h, w).astype(np.float64)
    if vals.max(initial=0) > maxval:
        raise FormatError(f"sample exceeds maxval {maxval}", path)
    return vals / maxval


def write_pbm(path, mask):
    """Binary PBM (P4); a set bit is a True pixel."""
    mask = check_mask(mask)
    h, w = mask.shape
    packed = np.packbits(mask, axis=1)
    atomic_write(path, f"P4\n{w} {h}\n".encode("ascii") + packed.tobytes())


def read_pbm(path) -> np.ndarray:
    data = _read_bytes(path)
    tokens, start = _pnm_header(data, b"P4", 2, path)
    w, h = _dims(tokens, path)
    row = (w + 7) // 8
    raw = _payload(data, start, row * h, path)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8).reshape(h, row), axis=1)
    return bits[:, :w].astype(bool)


def validity_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".valid.pbm")


def write_pfm(path, depth: DepthMap):
    """Single-channel little-endian PFM plus a ``<stem>.valid.pbm`` sidecar.

    Samples are float32 (the PFM sample type); invalid pixels store 0.
    Rows are written bottom-to-top as the format prescribes.
    """
    h, w = depth.shape
    vals = np.where(depth.valid, depth.depth, 0.0).astype("<f4")
    atomic_write(path, f"Pf\n{w} {h}\n-1.0\n".encode("ascii") + vals[::-1].tobytes())
    write_pbm(validity_path(path), depth.valid)


def read_pfm(path, valid_path=None) -> DepthMap:
    data = _read_bytes(path)
    if data.startswith(b"PF"):
        raise FormatError("three-channel PFM (PF) is not supported; expected Pf", path, "byte 0")
    tokens, start = _pnm_header(data, b"Pf", 3, path)
    w, h = _dims(tokens, path)
    try:
        scale = float(tokens[2])
    except ValueError as exc:
        raise FormatError(f"non-numeric scale {tokens[2]!r}", path) from exc
    if scale == 0 or not np.isfinite(scale):
        raise FormatError("PFM scale must be finite and nonzero", path)
    dtype = "<f4" if scale < 0 else ">f4"
    raw = _payload(data, start, 4 * w * h, path)
    vals = np.frombuffer(raw, dtype=dtype).reshape(h, w)[::-1].astype(np.float64)
    vpath = Path(valid_path) if valid_path is not None else validity_path(path)
    if vpath.exists():
        valid = read_pbm(vpath)
        if valid.shape != vals.shape:
            raise FormatError(f"validity mask is {valid.shape}, depth is {vals.shape}", vpath)
    else:
        valid = np.isfinite(vals) & (vals > 0)
    try:
        return DepthMap(vals, valid)
    except ValueError as exc:
        raise FormatError(str(exc), path) from exc

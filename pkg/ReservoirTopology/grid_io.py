"""Reading and writing grid files, conditioning data and JSON artifacts.

Two grid formats are supported:

* GSLIB-style ASCII: title line, variable count (always 1), variable name,
  then one value per line in x-fastest order. Geometry lives in a sidecar
  JSON `<path>.json` holding nx, ny, nz, dx, dy, dz, x0, y0, z0 and kind.
* Raw binary: 72-byte little-endian header (magic, counts, value kind,
  spacings, origin) followed by float64 values in x-fastest order.
"""
import json
import logging
import os
import struct
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .errors import GridParseError
from .reservoir_grid import ScalarField
from .schemas import ConditioningPoint, GridGeometry, ValueKind

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MAGIC = b"RTGRID01"
HEADER = struct.Struct("<8s3I I3d3d")
KIND_CODES = {ValueKind.RAW_GL: 0, ValueKind.Z_VALUE: 1, ValueKind.ALPHA: 2}
KIND_FROM_CODE = {code: kind for kind, code in KIND_CODES.items()}


class GridFormat(str, Enum):
    GSLIB_ASCII = "gslib_ascii"
    RAW_BINARY = "raw_binary"

    @classmethod
    def infer(cls, path: PathLike) -> "GridFormat":
        """Binary files are recognised by their magic bytes, anything else is GSLIB."""
        with open(path, "rb") as f:
            head = f.read(len(MAGIC))
        return cls.RAW_BINARY if head == MAGIC else cls.GSLIB_ASCII


# --- Atomic writes ---

def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write through a temp file in the target directory, then rename over the target."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as tmp:
            tmp.write(data)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: PathLike, payload: Any) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=False) + "\n")


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


# --- Grid files ---

def write_grid(field: ScalarField, path: PathLike,
               fmt: GridFormat = GridFormat.RAW_BINARY, title: Optional[str] = None) -> List[Path]:
    """Write a field; returns every file written (grid plus sidecar for GSLIB)."""
    fmt = GridFormat(fmt)
    path = Path(path)
    flat = field.flat()
    if fmt == GridFormat.RAW_BINARY:
        g = field.geometry
        header = HEADER.pack(MAGIC, *g.shape, KIND_CODES[field.value_kind], *g.spacings, *g.origin)
        atomic_write_bytes(path, header + flat.astype("<f8").tobytes())
        logger.debug(f"Wrote binary grid {path} ({g.n_cells} cells)")
        return [path]

    lines = [title or "reservoir topology grid", "1", field.value_kind.value]
    lines.extend(f"{v:.17g}" for v in flat)
    atomic_write_text(path, "\n".join(lines) + "\n")
    header = field.geometry.to_header()
    header["kind"] = field.value_kind.value
    side = write_json(sidecar_path(path), header)
    logger.debug(f"Wrote GSLIB grid {path} with sidecar {side}")
    return [path, side]


def read_grid(path: PathLike, fmt: Optional[GridFormat] = None) -> ScalarField:
    path = Path(path)
    fmt = GridFormat(fmt) if fmt is not None else GridFormat.infer(path)
    if fmt == GridFormat.RAW_BINARY:
        return _read_binary(path)
    return _read_gslib(path)


def _geometry_or_error(path: Path, build) -> GridGeometry:
    try:
        return build()
    except (ValidationError, KeyError, TypeError) as e:
        raise GridParseError(f"malformed grid header: {e}", path=path) from e


def _check_values(path: Path, geometry: GridGeometry, values: np.ndarray) -> None:
    expected = geometry.n_cells
    if values.size < expected:
        raise GridParseError(
            f"expected {expected} values, found {values.size} (short by {expected - values.size})", path=path
        )
    if values.size > expected:
        raise GridParseError(
            f"expected {expected} values, found {values.size} ({values.size - expected} too many)", path=path
        )
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise GridParseError("non-finite value", path=path, cell=geometry.one_based(bad[0]))


def _read_binary(path: Path) -> ScalarField:
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise GridParseError(f"file shorter than the {HEADER.size}-byte header", path=path)
    magic, nx, ny, nz, kind_code, dx, dy, dz, x0, y0, z0 = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridParseError(f"bad magic {magic!r}", path=path)
    if kind_code not in KIND_FROM_CODE:
        raise GridParseError(f"unknown value kind code {kind_code}", path=path)
    geometry = _geometry_or_error(path, lambda: GridGeometry(
        counts=(nx, ny, nz), spacings=(dx, dy, dz), origin=(x0, y0, z0)))
    payload = data[HEADER.size:]
    if len(payload) % 8:
        raise GridParseError(f"payload of {len(payload)} bytes is not a whole number of float64", path=path)
    values = np.frombuffer(payload, dtype="<f8")
    _check_values(path, geometry, values)
    return ScalarField(geometry, values.astype(float), KIND_FROM_CODE[kind_code])


def _read_gslib(path: Path) -> ScalarField:
    side = sidecar_path(path)
    try:
        header = json.loads(side.read_text())
    except FileNotFoundError as e:
        raise GridParseError(f"missing sidecar header {side}", path=path) from e
    except json.JSONDecodeError as e:
        raise GridParseError(f"sidecar {side} is not valid JSON: {e}", path=path) from e
    geometry = _geometry_or_error(path, lambda: GridGeometry.from_header(header))
    try:
        kind = ValueKind(header.get("kind", ValueKind.ALPHA.value))
    except ValueError as e:
        raise GridParseError(f"unknown value kind {header.get('kind')!r}", path=path) from e

    lines = path.read_text().splitlines()
    if len(lines) < 3:
        raise GridParseError("malformed header: expected title, variable count and name", path=path)
    try:
        n_vars = int(lines[1].split()[0])
    except (ValueError, IndexError) as e:
        raise GridParseError(f"malformed header: bad variable count {lines[1]!r}", path=path) from e
    if n_vars != 1:
        raise GridParseError(f"malformed header: expected 1 variable, found {n_vars}", path=path)

    tokens = [line.strip() for line in lines[3:] if line.strip()]
    try:
        values = np.array(tokens, dtype=float)
    except ValueError:
        for position, token in enumerate(tokens):
            try:
                float(token)
            except ValueError:
                cell = geometry.one_based(position) if position < geometry.n_cells else None
                raise GridParseError(f"unparseable value {token!r}", path=path, cell=cell)
        raise
    _check_values(path, geometry, values)
    return ScalarField(geometry, values, kind)


# --- Conditioning data ---

def read_conditioning(path: PathLike) -> List[ConditioningPoint]:
    """CSV with columns kx,ky,kz,value (1-based cell indices)."""
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise GridParseError(f"unreadable conditioning file: {e}", path=path) from e
    missing = {"kx", "ky", "kz", "value"} - set(frame.columns)
    if missing:
        raise GridParseError(f"conditioning file lacks columns {sorted(missing)}", path=path)
    points = []
    for row in frame.itertuples(index=False):
        try:
            points.append(ConditioningPoint(kx=int(row.kx), ky=int(row.ky), kz=int(row.kz), value=float(row.value)))
        except (ValidationError, ValueError) as e:
            raise GridParseError(f"bad conditioning row {tuple(row)}: {e}", path=path) from e
    logger.info(f"Loaded {len(points)} conditioning points from {path}")
    return points


def write_conditioning(points: List[ConditioningPoint], path: PathLike) -> Path:
    frame = pd.DataFrame([p.model_dump() for p in points], columns=["kx", "ky", "kz", "value"])
    return atomic_write_text(path, frame.to_csv(index=False))

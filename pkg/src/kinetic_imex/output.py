"""CSV tables and binary field dumps."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .kinetic import SpatialGrid, VelocityGrid, moments


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)  # shortest round-trip form, deterministic
    return "" if v is None else str(v)


def write_csv(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def moments_header(dv: int) -> list[str]:
    return ["x", "rho"] + [f"u{k}" for k in range(dv)] + ["T", "E"]


def moments_rows(f: np.ndarray, vgrid: VelocityGrid, xgrid: SpatialGrid):
    m = moments(f, vgrid, check=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        u, T = m.u, m.T
    for i, x in enumerate(xgrid.x):
        yield [x, m.rho[i], *u[i], T[i], m.E[i]]


def write_moments(path, f, vgrid, xgrid) -> Path:
    return write_csv(path, moments_header(vgrid.dv), moments_rows(f, vgrid, xgrid))


# flat binary record: fixed little-endian header, then row-major float64 payload
FIELD_MAGIC = b"KIMXFLD1"
_HEADER = np.dtype([("magic", "S8"), ("dv", "<i4"), ("n", "<i4"), ("v_max", "<f8"), ("nx", "<i4"),
                    ("step", "<i8"), ("t", "<f8")])


def save_field(path: str | Path, f: np.ndarray, vgrid: VelocityGrid, step: int = 0, t: float = 0.0) -> Path:
    f = np.ascontiguousarray(f, dtype="<f8")
    nx = f.shape[0]
    if f.shape != (nx,) + vgrid.shape:
        raise ValueError(f"field shape {f.shape} does not match velocity grid {vgrid.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = np.array([(FIELD_MAGIC, vgrid.dv, vgrid.n, vgrid.v_max, nx, step, t)], dtype=_HEADER)
    with open(path, "wb") as fh:
        fh.write(head.tobytes())
        fh.write(f.tobytes(order="C"))
    return path


def load_field(path: str | Path) -> tuple[np.ndarray, VelocityGrid, int, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise ValueError(f"{path}: truncated field header")
    head = np.frombuffer(raw[:_HEADER.itemsize], dtype=_HEADER)[0]
    if head["magic"] != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field dump")
    vg = VelocityGrid(int(head["dv"]), int(head["n"]), float(head["v_max"]))
    shape = (int(head["nx"]),) + vg.shape
    body = np.frombuffer(raw[_HEADER.itemsize:], dtype="<f8")
    if body.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload has {body.size} values, header implies {int(np.prod(shape))}")
    return body.reshape(shape).copy(), vg, int(head["step"]), float(head["t"])

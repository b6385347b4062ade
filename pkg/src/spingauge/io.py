"""Snapshot files, diagnostic CSVs and the run manifest.

A snapshot is one UTF-8 JSON header line followed by raw little-endian,
row-major arrays in the order listed under ``fields``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch

DTYPES = {"f64": "<f8", "c128": "<c16"}


def write_snapshot(path, grid, fields: dict, time: float, signature: tuple[int, int]) -> None:
    first = next(iter(fields.values()))
    kind = "c128" if np.iscomplexobj(first) else "f64"
    header = {
        "grid": {"n1": grid.n1, "n2": grid.n2, "L1": grid.L1, "L2": grid.L2},
        "fields": list(fields),
        "shape": list(np.shape(first)),
        "dtype": kind,
        "time": float(time),
        "signature": {"mu": signature[0], "epsilon": signature[1]},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for arr in fields.values():
            a = np.ascontiguousarray(arr, dtype=DTYPES[kind])
            if a.shape != tuple(header["shape"]):
                raise ShapeMismatch("all snapshot fields must share one shape")
            fh.write(a.tobytes(order="C"))


def read_snapshot(path):
    """Return ``(header, {name: array})``."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        data = fh.read()
    dt = np.dtype(DTYPES[header["dtype"]])
    shape = tuple(header["shape"])
    size = int(np.prod(shape)) * dt.itemsize
    if len(data) != size * len(header["fields"]):
        raise ShapeMismatch("snapshot payload has the wrong length")
    out = {}
    for k, name in enumerate(header["fields"]):
        out[name] = np.frombuffer(data[k * size:(k + 1) * size], dtype=dt).reshape(shape).copy()
    return header, out


def write_csv(path, columns: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([x if isinstance(x, str) else repr(float(x)) for x in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config_hash: str, extra: dict | None = None) -> str:
    """Checksum every file under ``out_dir``; returns the manifest's own hash."""
    import numpy
    import scipy

    from . import __version__

    out = Path(out_dir)
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(out).as_posix()] = sha256_file(p)
    manifest = {
        "config_sha256": config_hash,
        "versions": {"spingauge": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__},
        "files": files,
    }
    manifest.update(extra or {})
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    path = out / "manifest.json"
    path.write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p

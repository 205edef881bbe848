"""Deterministic CSV/JSON writers."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def matrix_to_json(M: np.ndarray) -> dict:
    """Dense matrix as {rows, cols, re, im}, entries in column-major order."""
    M = np.asarray(M, dtype=complex)
    flat = M.ravel(order="F")
    return {"rows": M.shape[0], "cols": M.shape[1], "re": flat.real.tolist(), "im": flat.imag.tolist()}


def matrix_from_json(d: dict) -> np.ndarray:
    flat = np.asarray(d["re"]) + 1j * np.asarray(d["im"])
    return flat.reshape((d["rows"], d["cols"]), order="F")


def spectrum_rows(w):
    w = np.asarray(w, dtype=complex)
    return [(z.real, z.imag, float(np.mod(np.angle(z), 2 * np.pi))) for z in w]


def read_config(path) -> dict:
    """Flat key=value file; '#' starts a comment."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {line!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out

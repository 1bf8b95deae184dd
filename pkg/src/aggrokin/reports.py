"""Deterministic artifact emission: CSV tables, JSON reports, hashing.

Every writer here is byte-stable: floats are rendered with full
round-trip precision (``repr``), newlines are fixed to ``\\n``, JSON keys
are sorted, and nothing embeds timestamps — re-running an experiment with
the same inputs reproduces identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "write_json",
    "sha256_bytes",
    "blob_hash",
    "hash_file",
    "hash_config",
    "write_trajectory",
    "write_front_trace",
    "write_recurrence",
    "write_snapshots",
    "write_estimate",
]


def fmt(x) -> str:
    """Render one cell: full-precision floats, plain ints, str pass-through."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    """Write rows with a fixed header; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def _sanitize(obj):
    """Make an object JSON-serializable (arrays to lists, numpy scalars)."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        # JSON has no inf/nan literals; keep a readable token
        return repr(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_sanitize(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------------
# hashing


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def blob_hash(data: bytes) -> str:
    """Content hash in git blob style: sha1 over 'blob <len>\\0<data>'."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def hash_file(path) -> str:
    return blob_hash(Path(path).read_bytes())


def hash_config(cfg: dict) -> str:
    """Stable hash of a configuration dict (canonical JSON form)."""
    canon = json.dumps(_sanitize(cfg), sort_keys=True, separators=(",", ":"))
    return sha256_bytes(canon.encode("utf-8"))


# ---------------------------------------------------------------------------
# typed writers


def write_trajectory(path, trajectory_path, sidecar: dict = None) -> Path:
    """Long-format field trajectory: one row per (time, cell).

    For dimension 1 the header is ``t,cell_index,value``; dimension 2 adds
    a second index column.  A JSON sidecar with grid and model metadata is
    written next to the CSV when provided.
    """
    grid = trajectory_path.grid
    if grid.dim == 1:
        header = ["t", "cell_index", "value"]

        def rows():
            for ti, t in enumerate(trajectory_path.times):
                vals = trajectory_path.values[ti]
                for i in range(grid.cells):
                    yield float(t), i, float(vals[i])
    else:
        header = ["t", "cell_index_0", "cell_index_1", "value"]

        def rows():
            for ti, t in enumerate(trajectory_path.times):
                vals = trajectory_path.values[ti]
                for i in range(grid.cells):
                    for j in range(grid.cells):
                        yield float(t), i, j, float(vals[i, j])

    out = write_csv(path, header, rows())
    if sidecar is not None:
        meta = dict(sidecar)
        meta["grid"] = {"dim": grid.dim, "length": grid.length, "cells": grid.cells}
        write_json(Path(path).with_suffix(".json"), meta)
    return out


def write_front_trace(path, trace) -> Path:
    return write_csv(path, ["x", "t_level", "t_speed"], trace.rows())


def write_recurrence(path, seq) -> Path:
    return write_csv(path, ["k", "d_k", "c_k", "t_k", "asymptote", "error"], seq.rows())


def write_snapshots(path, trajectories, manifest: dict = None) -> Path:
    """Particle snapshots across replicas: ``replica,t,x1[,x2]``."""
    dim = None
    for tr in trajectories:
        for cfg in tr.configs:
            dim = cfg.shape[1] if cfg.ndim == 2 else 1
            break
        if dim is not None:
            break
    dim = dim or 1
    header = ["replica", "t"] + [f"x{i + 1}" for i in range(dim)]

    def rows():
        for r, tr in enumerate(trajectories):
            for t, cfg in zip(tr.times, tr.configs):
                pts = cfg if cfg.ndim == 2 else cfg[:, None]
                for row in pts:
                    yield (r, float(t)) + tuple(float(v) for v in row)

    out = write_csv(path, header, rows())
    if manifest is not None:
        write_json(Path(path).with_suffix(".json"), manifest)
    return out


def write_estimate(path, estimate) -> Path:
    return write_csv(path, ["bin_center", "value", "stderr"], estimate.rows())

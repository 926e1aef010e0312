"""Trajectory CSV, JSON summaries and the run manifest.

CSV layout (comma separated, LF line endings, ``repr`` precision)::

    t, y1..yN, ymeas1..ymeasN, x_11, xhat_11, e_11, x_12, xhat_12, e_12, ..., V_1..V_N
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gsto.simulator import Trajectory

CSV_SCHEMA_ID = "gsto-trajectory-csv/1"


def _fmt(v: float) -> str:
    # repr round-trips every finite double exactly
    return repr(float(v))


def trajectory_header(N: int) -> list[str]:
    cols = ["t"]
    cols += [f"y{i}" for i in range(1, N + 1)]
    cols += [f"ymeas{i}" for i in range(1, N + 1)]
    for i in range(1, N + 1):
        for j in (1, 2):
            cols += [f"x_{i}{j}", f"xhat_{i}{j}", f"e_{i}{j}"]
    cols += [f"V_{i}" for i in range(1, N + 1)]
    return cols


def write_trajectory_csv(path, traj: Trajectory, V_i: np.ndarray | None = None) -> Path:
    """Write ``traj``; ``V_i`` is the ``(K, N)`` per-subsystem Lyapunov series (NaN if omitted)."""
    path = Path(path)
    N = traj.N
    K = len(traj)
    if V_i is None:
        V_i = np.full((K, N), math.nan)
    V_i = np.asarray(V_i, dtype=float)
    if V_i.shape != (K, N):
        raise ValueError(f"V_i has shape {V_i.shape}, expected ({K}, {N})")
    E = traj.error
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(N))
        for k in range(K):
            row = [traj.times[k], *traj.y_clean[k], *traj.y_meas[k]]
            for s in range(2 * N):
                row += [traj.x[k, s], traj.xhat[k, s], E[k, s]]
            row += list(V_i[k])
            w.writerow([_fmt(v) for v in row])
    return path


@dataclass
class TrajectoryTable:
    """Parsed trajectory CSV."""

    times: np.ndarray
    y: np.ndarray
    y_meas: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    e: np.ndarray
    V: np.ndarray

    def to_trajectory(self) -> Trajectory:
        return Trajectory(self.times, self.x, self.xhat, self.y, self.y_meas)


def read_trajectory_csv(path) -> TrajectoryTable:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_cols = len(header)
    N = (n_cols - 1) // 9
    if trajectory_header(N) != header:
        raise ValueError(f"{path}: unexpected header {header[:4]}...")
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), n_cols)
    c = 1
    y = data[:, c:c + N]
    c += N
    ym = data[:, c:c + N]
    c += N
    block = data[:, c:c + 6 * N].reshape(len(body), 2 * N, 3)
    c += 6 * N
    return TrajectoryTable(
        times=data[:, 0], y=y, y_meas=ym,
        x=block[:, :, 0].copy(), xhat=block[:, :, 1].copy(), e=block[:, :, 2].copy(),
        V=data[:, c:c + N],
    )


def write_table_csv(path, header: list[str], columns: list[np.ndarray]) -> Path:
    """Generic column writer with the same formatting rules as the trajectory CSV."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(cols[0])):
            w.writerow([_cell(c[k]) for c in cols])
    return path


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return _fmt(v)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), newline="\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    """Hash of the resolved config in canonical JSON form."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config_path: str
    config_hash: str
    command: str
    out_dir: str
    wall_clock_s: float
    files: list[dict]

    def to_dict(self) -> dict:
        return {
            "config_path": self.config_path,
            "config_hash": self.config_hash,
            "command": self.command,
            "out_dir": self.out_dir,
            "wall_clock_s": self.wall_clock_s,
            "files": self.files,
        }


MANIFEST_NAME = "manifest.json"


def build_manifest(out_dir, config_path, cfg_hash: str, command: str, wall_clock_s: float) -> RunManifest:
    """Checksum every regular file under ``out_dir`` except the manifest itself."""
    out = Path(out_dir)
    files = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            files.append({
                "path": p.relative_to(out).as_posix(),
                "sha256": sha256_file(p),
                "bytes": p.stat().st_size,
            })
    return RunManifest(str(config_path), cfg_hash, command, str(out), wall_clock_s, files)

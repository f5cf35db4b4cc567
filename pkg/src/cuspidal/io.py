"""Deterministic file emission (CSV/JSON) and path-input parsing.

All floats are written with a fixed %.12g format and dictionaries with
sorted keys so that repeated runs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .errors import RobotFileError
from .path import WorkspacePath


def fmt(x) -> str:
    v = float(x)
    if v == 0.0:
        v = 0.0  # normalize -0.0
    return f"{v:.12g}"


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (int, float, np.floating))
                        and not isinstance(x, bool) else x for x in row])


def write_curves_csv(path, p, curves) -> None:
    """Singularity curves: (curve_id, s, theta2, theta3, rho, z)."""
    from .model import rho_z, wrap_angle
    rows = []
    for cid, c in enumerate(curves):
        th = c.theta
        seg = np.linalg.norm(np.diff(th, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        rho, z = rho_z(p, th[:, 0], th[:, 1])
        w = wrap_angle(th)
        for k in range(len(th)):
            rows.append((cid, s[k], w[k, 0], w[k, 1], rho[k], z[k]))
    write_csv(path, ["curve_id", "s", "theta2", "theta3", "rho", "z"], rows)


def write_cusps_csv(path, cusps) -> None:
    rows = [(c.rho, c.z, c.theta2, c.theta3, c.multiplicity) for c in cusps]
    write_csv(path, ["rho", "z", "theta2", "theta3", "multiplicity"], rows)


def write_raster_csv(path, labels: np.ndarray, bounds, periodic) -> None:
    """Grid raster with a self-describing header block.

    Header rows: resolution, bounds (axis0 lo/hi, axis1 lo/hi), periodicity
    flags; then one label per cell in row-major order, one row per grid row.
    """
    n0, n1 = labels.shape
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["resolution", n0, n1])
        w.writerow(["bounds", fmt(bounds[0]), fmt(bounds[1]),
                    fmt(bounds[2]), fmt(bounds[3])])
        w.writerow(["periodic", int(periodic[0]), int(periodic[1])])
        for i in range(n0):
            w.writerow([int(x) for x in labels[i]])


def write_polylines_csv(path, named_polylines) -> None:
    rows = []
    for name, pts in named_polylines:
        for k, pt in enumerate(pts):
            rows.append([name, k] + [x for x in pt])
    ncols = max((len(r) - 2 for r in rows), default=2)
    header = ["name", "index"] + [f"c{k}" for k in range(ncols)]
    write_csv(path, header, rows)


def write_atlas_csv(path, atlas) -> None:
    rows = []
    for i, d3 in enumerate(atlas.d3_vals):
        for j, d4 in enumerate(atlas.d4_vals):
            rows.append((d3, d4, int(atlas.counts[i, j]), int(atlas.domains[i, j])))
    write_csv(path, ["d3", "d4", "cusp_count", "domain_id"], rows)


def write_trajectory_csv(path, p, s_values, joints) -> None:
    from .model import det_jacobian, wrap_angle
    rows = []
    for k in range(len(joints)):
        q = joints[k]
        dj = float(det_jacobian(p, q[1], q[2]))
        w = wrap_angle(np.asarray(q))
        rows.append((s_values[k], w[0], w[1], w[2], dj))
    write_csv(path, ["s", "theta1", "theta2", "theta3", "det_j"], rows)


# ---------------------------------------------------------------------------
# path input
# ---------------------------------------------------------------------------

def load_path(path, frame: str = None) -> WorkspacePath:
    """Waypoint list from JSON or CSV.

    JSON: {"frame": "rho-z" | "xyz", "waypoints": [[..], ..]}.
    CSV: header line "rho,z" or "x,y,z"; the frame argument overrides.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise RobotFileError(f"cannot read path file {path}: {e}") from e

    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise RobotFileError(f"path file {path} is not valid JSON: {e}") from e
        fr = frame or data.get("frame")
        pts = data.get("waypoints")
    else:
        rows = [r for r in csv.reader(text.splitlines()) if r]
        if not rows:
            raise RobotFileError(f"path file {path} is empty")
        head = [c.strip().lower() for c in rows[0]]
        if head in (["rho", "z"], ["x", "y", "z"]):
            fr = frame or ("rho-z" if head == ["rho", "z"] else "xyz")
            body = rows[1:]
        else:
            fr = frame
            body = rows
        try:
            pts = [[float(x) for x in r] for r in body]
        except ValueError as e:
            raise RobotFileError(f"bad waypoint in {path}: {e}") from e

    if fr not in ("rho-z", "xyz"):
        raise RobotFileError("path frame must be 'rho-z' or 'xyz'")
    if not pts:
        raise RobotFileError("path file has no waypoints")
    try:
        if fr == "rho-z":
            return WorkspacePath.from_rho_z([(r[0], r[1]) for r in pts])
        return WorkspacePath(np.array([[r[0], r[1], r[2]] for r in pts]))
    except (IndexError, ValueError) as e:
        raise RobotFileError(f"malformed waypoints in {path}: {e}") from e

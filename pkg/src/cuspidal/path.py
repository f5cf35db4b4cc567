"""Path lifting, workspace-path feasibility, and non-singular posture
change planning.

A workspace path is feasible from a start posture iff a continuous
joint-space lift of the whole path exists; lifting is predictor-corrector
continuation with Newton correction on f(q) = X(s) and adaptive step
halving.  A lift is declared blocked (the robot "bounces back") when the
step collapses with the determinant going to zero, which happens exactly
when the tracked posture merges with another one on a fold.

Posture changes are planned on the aspect cell graph: two postures in
different aspects cannot be joined without meeting a singularity; within
one aspect a shortest path with a determinant-clearance penalty is found,
then shortcut.  For a cuspidal robot the workspace trace of such a plan
encircles a cusp point.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_TOLS, TOPO_GRID, Tolerances
from .errors import PostureChangeImpossible
from .ik import inverse_kinematics
from .model import (JointConfig, RobotParams, det_jacobian, det_scale,
                    forward_kinematics, jacobian, rho_z, torus_delta,
                    wrap_angle)
from .topo import AspectMap, compute_aspects


@dataclass
class WorkspacePath:
    """Piecewise-linear path; waypoints in Cartesian (x, y, z)."""

    waypoints: np.ndarray              # (k, 3)

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 3 or len(wp) < 2:
            raise ValueError("a path needs >= 2 waypoints of (x, y, z)")
        if not np.isfinite(wp).all():
            raise ValueError("waypoints must be finite")
        self.waypoints = wp
        seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    @classmethod
    def from_rho_z(cls, points: Sequence[Tuple[float, float]]) -> "WorkspacePath":
        wp = [(float(r), 0.0, float(z)) for r, z in points]
        return cls(np.array(wp))

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        k = int(np.searchsorted(self._cum, s, side="right")) - 1
        k = min(max(k, 0), len(self.waypoints) - 2)
        seg = self._cum[k + 1] - self._cum[k]
        t = 0.0 if seg == 0 else (s - self._cum[k]) / seg
        return (1 - t) * self.waypoints[k] + t * self.waypoints[k + 1]

    def reversed(self) -> "WorkspacePath":
        return WorkspacePath(self.waypoints[::-1].copy())


@dataclass
class LiftResult:
    status: str                        # "feasible" | "blocked"
    s_values: np.ndarray
    joints: np.ndarray                 # (m, 3)
    min_abs_det: float
    blocked_s: Optional[float] = None
    blocked_point: Optional[np.ndarray] = None

    @property
    def end_config(self) -> JointConfig:
        return JointConfig.from_array(self.joints[-1])


def _newton_track(p: RobotParams, q: np.ndarray, target: np.ndarray,
                  scale: float, tols: Tolerances) -> Optional[np.ndarray]:
    """Newton-correct q so that f(q) = target; None when not converged."""
    for _ in range(tols.lift_max_newton):
        cfg = JointConfig.from_array(q)
        f = forward_kinematics(p, cfg).as_array()
        r = target - f
        if np.linalg.norm(r) < tols.lift_newton_rel * scale:
            return q
        J = jacobian(p, cfg)
        try:
            dq = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            return None
        if not np.isfinite(dq).all() or np.linalg.norm(dq) > 1.0:
            return None
        q = q + dq
    cfg = JointConfig.from_array(q)
    f = forward_kinematics(p, cfg).as_array()
    if np.linalg.norm(target - f) < tols.lift_newton_rel * scale:
        return q
    return None


def lift_path(p: RobotParams, path: WorkspacePath, q_start: JointConfig,
              tols: Tolerances = DEFAULT_TOLS) -> LiftResult:
    """Continue the start posture along the path.

    Deterministic: fixed step-adaptation rules, no randomness.  Raises
    ValueError when q_start does not reach the path start.
    """
    scale = 1.0 + float(np.linalg.norm(path.waypoints[0]))
    f0 = forward_kinematics(p, q_start).as_array()
    if np.linalg.norm(f0 - path.waypoints[0]) > 1e-6 * scale:
        raise ValueError("q_start does not match the path start point")

    dj_scale = max(det_scale(p), 1e-300)
    sing_tol = tols.lift_singular_rel * dj_scale
    L = path.length
    if L == 0.0:
        q0 = q_start.as_array()
        dj = abs(float(det_jacobian(p, q0[1], q0[2])))
        return LiftResult("feasible", np.array([0.0]), q0[None, :], dj)

    min_step = tols.lift_min_step_frac * L
    ds = L / 100.0
    s = 0.0
    q = q_start.as_array().astype(float)
    svals = [0.0]
    joints = [q.copy()]
    min_dj = abs(float(det_jacobian(p, q[1], q[2])))

    while s < L - 1e-15 * L:
        step = min(ds, L - s)
        target = path.point_at(s + step)
        q_new = _newton_track(p, q.copy(), target, scale, tols)
        if q_new is not None:
            jump = np.linalg.norm(torus_delta(q_new, q))
            if jump > 0.5 + 4.0 * step / L:
                q_new = None  # branch jump: reject and refine
        if q_new is None:
            if step <= min_step:
                dj = abs(float(det_jacobian(p, q[1], q[2])))
                status = "blocked"
                return LiftResult(status, np.array(svals), np.array(joints),
                                  min(min_dj, dj), blocked_s=s,
                                  blocked_point=path.point_at(s))
            ds = max(step / 2.0, min_step)
            continue
        s += step
        q = q_new
        dj = abs(float(det_jacobian(p, q[1], q[2])))
        min_dj = min(min_dj, dj)
        svals.append(s)
        joints.append(q.copy())
        if dj > 100.0 * sing_tol:
            ds = min(ds * 1.6, L / 50.0)
    return LiftResult("feasible", np.array(svals), np.array(joints), min_dj)


@dataclass
class BranchLift:
    start: JointConfig
    result: LiftResult


@dataclass
class FeasibilityReport:
    path: WorkspacePath
    forward: List[BranchLift] = field(default_factory=list)
    backward: List[BranchLift] = field(default_factory=list)

    def feasible_branches(self, direction: str = "forward") -> List[int]:
        lifts = self.forward if direction == "forward" else self.backward
        return [k for k, b in enumerate(lifts) if b.result.status == "feasible"]


def check_feasibility(p: RobotParams, path: WorkspacePath,
                      tols: Tolerances = DEFAULT_TOLS) -> FeasibilityReport:
    """Lift the path (and its reverse) from every start posture."""
    report = FeasibilityReport(path)
    for direction, pth in (("forward", path), ("backward", path.reversed())):
        x0 = pth.waypoints[0]
        sols = inverse_kinematics(p, x0[0], x0[1], x0[2], tols)
        if len(sols) == 0:
            raise ValueError(f"path start {x0} is not reachable")
        for s in sols.solutions:
            res = lift_path(p, pth, s.config, tols)
            lift = BranchLift(s.config, res)
            (report.forward if direction == "forward" else report.backward).append(lift)
    return report


# ---------------------------------------------------------------------------
# posture-change planning
# ---------------------------------------------------------------------------

@dataclass
class PostureChangePlan:
    joints: np.ndarray                 # (m, 3) unwrapped joint polyline
    s_values: np.ndarray               # chord-length parameter
    min_abs_det: float
    aspect_id: int
    workspace_trace: np.ndarray        # (m, 2) (rho, z)

    def winding_numbers(self, points: Sequence[Tuple[float, float]]) -> List[float]:
        """Winding of the (closed) workspace trace around given points."""
        out = []
        tr = self.workspace_trace
        for (cx, cz) in points:
            ang = np.arctan2(tr[:, 1] - cz, tr[:, 0] - cx)
            d = np.diff(ang)
            d = (d + np.pi) % (2 * np.pi) - np.pi
            out.append(float(d.sum() / (2 * np.pi)))
        return out


def _dijkstra_torus(cost_ok: np.ndarray, weight: np.ndarray,
                    start: Tuple[int, int], goal: Tuple[int, int],
                    periodic: Tuple[bool, bool]) -> Optional[List[Tuple[int, int]]]:
    """Grid shortest path; 8-connected, diagonal moves only when both
    orthogonal neighbours are passable (no corner cutting)."""
    n = cost_ok.shape[0]
    dist = np.full((n, n), np.inf)
    prev = -np.ones((n, n, 2), dtype=np.int32)
    dist[start] = 0.0
    pq = [(0.0, start)]
    moves = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)),
             (-1, 1, math.sqrt(2)), (-1, -1, math.sqrt(2))]
    while pq:
        d, (i, j) = heapq.heappop(pq)
        if (i, j) == goal:
            break
        if d > dist[i, j]:
            continue
        for di, dj, w in moves:
            a, b = i + di, j + dj
            if periodic[0]:
                a %= n
            elif not (0 <= a < n):
                continue
            if periodic[1]:
                b %= n
            elif not (0 <= b < n):
                continue
            if not cost_ok[a, b]:
                continue
            if di != 0 and dj != 0:
                a1, b1 = (i + di) % n if periodic[0] else i + di, j
                a2, b2 = i, (j + dj) % n if periodic[1] else j + dj
                if not (cost_ok[a1 % n, b1 % n] and cost_ok[a2 % n, b2 % n]):
                    continue
            nd = d + w * 0.5 * (weight[i, j] + weight[a, b])
            if nd < dist[a, b]:
                dist[a, b] = nd
                prev[a, b] = (i, j)
                heapq.heappush(pq, (nd, (a, b)))
    if not np.isfinite(dist[goal]):
        return None
    out = [goal]
    while tuple(out[-1]) != start:
        i, j = out[-1]
        pi, pj = prev[i, j]
        if pi < 0:
            return None
        out.append((int(pi), int(pj)))
    return out[::-1]


def _segment_clear(p: RobotParams, a: np.ndarray, b: np.ndarray,
                   floor: float, samples: int = 48) -> bool:
    t = np.linspace(0.0, 1.0, samples)
    pts = a[None, :] + (b - a)[None, :] * t[:, None]
    dj = np.abs(det_jacobian(p, pts[:, 0], pts[:, 1]))
    return bool(dj.min() > floor)


def plan_posture_change(p: RobotParams, q_start: JointConfig,
                        q_goal: JointConfig, grid_n: int = TOPO_GRID,
                        aspects: Optional[AspectMap] = None,
                        require_same_target: bool = True,
                        tols: Tolerances = DEFAULT_TOLS) -> PostureChangePlan:
    """Non-singular joint path from q_start to q_goal.

    Raises PostureChangeImpossible when the end points sit in different
    aspects (a non-singular path cannot leave an aspect), are singular, or
    are disconnected at the working resolution.
    """
    f0 = forward_kinematics(p, q_start).as_array()
    f1 = forward_kinematics(p, q_goal).as_array()
    if require_same_target and np.linalg.norm(f0 - f1) > 1e-6 * (1 + np.linalg.norm(f0)):
        raise ValueError("endpoints reach different workspace points; pass "
                         "require_same_target=False to plan anyway")

    if aspects is None:
        aspects = compute_aspects(p, grid_n, tols)
    a_start = aspects.lookup_robust(q_start.theta2, q_start.theta3)
    a_goal = aspects.lookup_robust(q_goal.theta2, q_goal.theta3)
    dj_scale = max(det_scale(p), 1e-300)
    if a_start == 0 or a_goal == 0:
        raise PostureChangeImpossible("an endpoint lies in a singular cell "
                                      "at the working resolution")
    if a_start != a_goal:
        raise PostureChangeImpossible(
            "endpoints lie in different aspects; a posture change between "
            "them necessarily crosses a singularity")

    n = aspects.grid_n
    ok = aspects.labels == a_start
    th_c = np.array([aspects.cell_center(i, 0)[0] for i in range(n)])
    T2, T3 = np.meshgrid(th_c, th_c, indexing="ij")
    dj = np.abs(det_jacobian(p, T2, T3))
    floor = tols.planner_clearance_frac * dj_scale
    weight = 1.0 + floor / np.maximum(dj, 1e-12)

    start = aspects.cell_of(q_start.theta2, q_start.theta3)
    goal = aspects.cell_of(q_goal.theta2, q_goal.theta3)
    cells = _dijkstra_torus(ok, weight, start, goal, aspects.periodic)
    if cells is None:
        raise PostureChangeImpossible(
            "endpoints are not connected inside their aspect at resolution "
            f"{n}; retry with a finer grid")

    # polyline through cell centers, unwrapped, with exact end configurations
    pts = [np.array([q_start.theta2, q_start.theta3])]
    for (i, j) in cells:
        c = np.array(aspects.cell_center(i, j))
        pts.append(pts[-1] + torus_delta(c, pts[-1]))
    goal_pt = np.array([q_goal.theta2, q_goal.theta3])
    pts.append(pts[-1] + torus_delta(goal_pt, pts[-1]))
    poly = np.array(pts)

    # shortcut smoothing with clearance checks
    clear_floor = 0.5 * floor
    improved = True
    while improved and len(poly) > 2:
        improved = False
        k = 0
        out = [poly[0]]
        while k < len(poly) - 1:
            far = len(poly) - 1
            hit = k + 1
            for j in range(far, k + 1, -1):
                if _segment_clear(p, poly[k], poly[j], clear_floor):
                    hit = j
                    break
            if hit > k + 1:
                improved = True
            out.append(poly[hit])
            k = hit
        poly = np.array(out)

    # densify for the trace and the clearance certificate
    dense = [poly[0]]
    for k in range(len(poly) - 1):
        seg = poly[k + 1] - poly[k]
        m = max(2, int(np.linalg.norm(seg) / 0.01))
        for t in np.linspace(0, 1, m + 1)[1:]:
            dense.append(poly[k] + seg * t)
    dense = np.array(dense)
    dj_dense = np.abs(det_jacobian(p, dense[:, 0], dense[:, 1]))
    min_dj = float(dj_dense.min())
    if min_dj <= 0.0:
        raise PostureChangeImpossible("smoothed plan touches a singularity; "
                                      "retry with a finer grid")

    # theta1 interpolates linearly in arc length between the exact endpoints
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    svals = np.concatenate([[0.0], np.cumsum(seg)])
    total = svals[-1] if svals[-1] > 0 else 1.0
    th1_delta = torus_delta(q_goal.theta1, q_start.theta1)
    th1 = q_start.theta1 + th1_delta * svals / total
    joints = np.column_stack([th1, dense])
    rho, z = rho_z(p, dense[:, 0], dense[:, 1])
    return PostureChangePlan(joints, svals, min_dj, a_start,
                             np.stack([rho, z], axis=1))

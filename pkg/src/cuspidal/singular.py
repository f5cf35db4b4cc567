"""Singularity curves on the joint-space torus, their workspace image and
cusp points.

Tracing is marching squares over a periodic (theta2, theta3) grid with the
two saddle cases disambiguated by the cell-center sign, followed by
bisection refinement of every edge crossing.  For orthogonal robots with
r3 = 0 the determinant factors; the factor whose zero set consists of
horizontal self-motion lines (the reference point on joint axis 2) is added
as explicit degenerate curves and the other factor is traced by itself,
which keeps marching squares away from the nodes where the two factor
curves cross.

Cusp detection is geometric with algebraic confirmation: along each traced
curve the image velocity in (rho, z) reverses sign exactly at a cusp.  The
signed tangential speed is computed with a continuously aligned image
direction, bracketed sign changes are bisected on the curve, candidates at
curve nodes (vanishing determinant gradient: two singularity branches
crossing, a fold-fold point, not a cusp) are rejected, and every surviving
candidate is confirmed by Newton on the triple-root system
{P = 0, dP/dt = 0, d2P/dt2 = 0} of the inverse-kinematic quartic in
(t, R, z) with an analytic Jacobian.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .config import DEFAULT_TOLS, TRACE_GRID, Tolerances
from .errors import DegenerateElimination
from .ik import ik_coefficient_partials, inverse_kinematics
from .model import (RobotParams, _frame_terms, det_jacobian, det_scale,
                    rho_z, singularity_factors, torus_delta, wrap_angle)

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class SingularityCurve:
    """One connected zero curve of det J on the torus.

    ``theta`` holds unwrapped samples (continuous along the curve, possibly
    outside (-pi, pi]); use ``wrapped()`` for torus coordinates.  Degenerate
    curves are entire self-motion lines whose workspace image is a single
    point.
    """

    theta: np.ndarray           # (n, 2) unwrapped (theta2, theta3)
    closed: bool
    label: str = ""
    degenerate_image: bool = False

    def __len__(self):
        return len(self.theta)

    def wrapped(self) -> np.ndarray:
        return wrap_angle(self.theta)

    def image(self, p: RobotParams) -> np.ndarray:
        rho, z = rho_z(p, self.theta[:, 0], self.theta[:, 1])
        return np.stack([rho, z], axis=1)


@dataclass
class CuspPoint:
    rho: float
    z: float
    theta2: float
    theta3: float
    t3: float                   # tan(theta3/2) at the triple root
    multiplicity: int = 3
    curve_id: int = -1
    curve_pos: float = -1.0     # fractional sample index along the curve
    confirmed: bool = True

    def preimage(self) -> np.ndarray:
        return np.array([self.theta2, self.theta3])


@dataclass
class CuspAnomaly:
    """Velocity-zero candidate that failed algebraic confirmation."""

    rho: float
    z: float
    theta2: float
    theta3: float
    reason: str


@dataclass
class BoundarySegment:
    label: str                  # "BS1", ...
    curve_id: int
    joint_samples: np.ndarray   # (m, 2) unwrapped
    image_samples: np.ndarray   # (m, 2) (rho, z)
    start_cusp: Optional[int] = None    # indices into the cusp list
    end_cusp: Optional[int] = None


@dataclass
class BoundaryCurve:
    curve_id: int
    kind: str                   # "internal" | "external" | "degenerate"
    image: np.ndarray           # (n, 2)
    side_counts: Tuple[int, int]  # IK counts on (inner, outer) probe sides


@dataclass
class WorkspaceBoundary:
    curves: List[BoundaryCurve]
    segments: List[BoundarySegment]     # internal boundary split at cusps
    cusps: List[CuspPoint]

    def internal(self) -> List[BoundaryCurve]:
        return [c for c in self.curves if c.kind == "internal"]

    def external(self) -> List[BoundaryCurve]:
        return [c for c in self.curves if c.kind == "external"]


# ---------------------------------------------------------------------------
# marching squares on the torus
# ---------------------------------------------------------------------------

def _marching_squares_torus(p: RobotParams, fld: Field, n: int,
                            refine_target: float) -> List[Tuple[np.ndarray, bool]]:
    """Closed polylines of fld = 0 on the periodic grid, bisection-refined."""
    th = -math.pi + 2 * math.pi * np.arange(n) / n
    h = 2 * math.pi / n
    D = np.asarray(fld(th[:, None], th[None, :]), dtype=float) + np.zeros((n, n))
    D = np.where(D == 0.0, 1e-300, D)
    sgn = np.sign(D)
    cross2 = sgn * np.roll(sgn, -1, axis=0) < 0   # edge (i,j)-(i+1,j)
    cross3 = sgn * np.roll(sgn, -1, axis=1) < 0   # edge (i,j)-(i,j+1)
    if not (cross2.any() or cross3.any()):
        return []

    def refine(mask: np.ndarray, axis: int) -> Dict[tuple, tuple]:
        idx = np.argwhere(mask)
        if len(idx) == 0:
            return {}
        a = D[idx[:, 0], idx[:, 1]]
        lo = np.zeros(len(idx))
        hi = np.ones(len(idx))
        t2l = th[idx[:, 0]]
        t3l = th[idx[:, 1]]
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            val = fld(t2l + mid * h, t3l) if axis == 0 else fld(t2l, t3l + mid * h)
            swap = a * val < 0
            hi = np.where(swap, mid, hi)
            lo = np.where(swap, lo, mid)
        mid = 0.5 * (lo + hi)
        if axis == 0:
            pts = np.stack([t2l + mid * h, t3l], axis=1)
        else:
            pts = np.stack([t2l, t3l + mid * h], axis=1)
        return {(int(i), int(j)): (pts[k, 0], pts[k, 1])
                for k, (i, j) in enumerate(idx)}

    pts2 = refine(cross2, 0)
    pts3 = refine(cross3, 1)

    # per-cell segments between crossing edges; cell (i, j) borders the
    # edges h(i, j), h(i, j+1), v(i, j), v(i+1, j)
    cells = np.argwhere(cross2 | np.roll(cross2, -1, axis=1)
                        | cross3 | np.roll(cross3, -1, axis=0))
    segs: Dict[tuple, list] = {}
    for i, j in cells:
        i, j = int(i), int(j)
        e = []
        if cross2[i, j]:
            e.append(("h", i, j))
        if cross2[i, (j + 1) % n]:
            e.append(("h", i, (j + 1) % n))
        if cross3[i, j]:
            e.append(("v", i, j))
        if cross3[(i + 1) % n, j]:
            e.append(("v", (i + 1) % n, j))
        if len(e) == 2:
            segs.setdefault((i, j), []).append((e[0], e[1]))
        elif len(e) == 4:
            center = float(fld(np.array(th[i] + 0.5 * h), np.array(th[j] + 0.5 * h)))
            bot, top = ("h", i, j), ("h", i, (j + 1) % n)
            left, right = ("v", i, j), ("v", (i + 1) % n, j)
            if math.copysign(1.0, center) == sgn[i, j]:
                segs.setdefault((i, j), []).append((bot, right))
                segs.setdefault((i, j), []).append((top, left))
            else:
                segs.setdefault((i, j), []).append((bot, left))
                segs.setdefault((i, j), []).append((top, right))

    edge_cells = defaultdict(list)
    for cell, lst in segs.items():
        for a, b in lst:
            edge_cells[a].append(cell)
            edge_cells[b].append(cell)

    def point_of(e):
        return pts2[(e[1], e[2])] if e[0] == "h" else pts3[(e[1], e[2])]

    used = set()
    curves = []
    for cell0, lst in segs.items():
        for k0, (ea, eb) in enumerate(lst):
            if (cell0, k0) in used:
                continue
            used.add((cell0, k0))
            chain = [ea, eb]
            cur_edge, cur_cell = eb, cell0
            while True:
                nxt = [c for c in edge_cells[cur_edge] if c != cur_cell]
                if not nxt:
                    break
                nc = nxt[0]
                found = False
                for kk, (xa, xb) in enumerate(segs[nc]):
                    if (nc, kk) in used:
                        continue
                    if xa == cur_edge or xb == cur_edge:
                        other = xb if xa == cur_edge else xa
                        used.add((nc, kk))
                        chain.append(other)
                        cur_edge, cur_cell = other, nc
                        found = True
                        break
                if not found:
                    break
                if cur_edge == chain[0]:
                    break
            closed = chain[0] == chain[-1]
            if closed:
                chain = chain[:-1]
            pts = np.array([point_of(e) for e in chain])
            curves.append((_unwrap_polyline(pts), closed))
    return curves


def _unwrap_polyline(pts: np.ndarray) -> np.ndarray:
    out = pts.copy()
    for k in range(1, len(out)):
        out[k] = out[k - 1] + torus_delta(out[k], out[k - 1])
    return out


def trace_singularity_curves(p: RobotParams, grid_n: int = TRACE_GRID,
                             tols: Tolerances = DEFAULT_TOLS) -> List[SingularityCurve]:
    """All zero curves of det J, chained and refined on the torus.

    For orthogonal r3 = 0 geometries the self-motion lines
    theta3 = +-arccos(-d3/d4) (present when d3 <= d4) are emitted as
    explicit degenerate curves and the remaining factor is traced alone.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    curves: List[SingularityCurve] = []
    factored = p.orthogonal() and abs(p.r3) < 1e-12

    if factored:
        _, second = singularity_factors(p)
        fld = lambda a, b: second(a, b)
        if p.d3 <= p.d4 and p.d4 > 0:
            t3s = math.acos(max(-1.0, min(1.0, -p.d3 / p.d4)))
            lines = [t3s] if abs(t3s - math.pi) < 1e-12 or t3s == 0.0 else [t3s, -t3s]
            t2 = np.linspace(-math.pi, math.pi, grid_n, endpoint=False)
            for t3v in lines:
                theta = np.stack([t2, np.full_like(t2, t3v)], axis=1)
                curves.append(SingularityCurve(theta, closed=True,
                                               degenerate_image=True))
    else:
        fld = lambda a, b: det_jacobian(p, a, b)

    for theta, closed in _marching_squares_torus(p, fld, grid_n, tols.curve_refine_rel):
        curves.append(SingularityCurve(theta, closed=closed))

    # refinement quality is asserted on det J itself
    scale = det_scale(p)
    for c in curves:
        if c.degenerate_image:
            continue
        res = np.abs(det_jacobian(p, c.theta[:, 0], c.theta[:, 1]))
        worst = float(res.max()) if len(res) else 0.0
        if worst > 1e-6 * scale:
            logger.warning("curve refinement residual %.3e above scale %.3e",
                           worst, scale)

    # deterministic ordering/labels (relabelled by workspace_boundary later)
    curves.sort(key=lambda c: (round(float(np.min(c.wrapped()[:, 1])), 9),
                               round(float(np.min(c.wrapped()[:, 0])), 9)))
    for k, c in enumerate(curves):
        c.label = f"S{k + 1}"
    return curves


# ---------------------------------------------------------------------------
# cusp detection
# ---------------------------------------------------------------------------

class _ScalarKinematics:
    """Plain-float evaluation of det J, its gradient and the image frame.

    The cusp refinement loops evaluate these thousands of times per robot;
    bypassing numpy scalar overhead here is worth a factor of several in
    the atlas scans.  Agreement with the vectorized model functions is
    covered by tests.
    """

    __slots__ = ("d2", "d3", "d4", "r2", "r3", "ca2", "sa2", "ca3", "sa3")

    def __init__(self, p: RobotParams):
        self.d2, self.d3, self.d4 = p.d2, p.d3, p.d4
        self.r2, self.r3 = p.r2, p.r3
        self.ca2, self.sa2 = math.cos(p.alpha2), math.sin(p.alpha2)
        self.ca3, self.sa3 = math.cos(p.alpha3), math.sin(p.alpha3)

    def det_grad(self, t2: float, t3: float):
        c2, s2 = math.cos(t2), math.sin(t2)
        c3, s3 = math.cos(t3), math.sin(t3)
        d4 = self.d4
        A3 = self.d3 + d4 * c3
        B3 = self.ca3 * d4 * s3 - self.r3 * self.sa3
        C3p = self.sa3 * d4 * c3
        A3p = -d4 * s3
        B3p = self.ca3 * d4 * c3
        A3pp = -d4 * c3
        B3pp = -self.ca3 * d4 * s3
        C3pp = -self.sa3 * d4 * s3
        S = s2 * A3 + c2 * B3
        T = c2 * A3 - s2 * B3
        S3 = s2 * A3p + c2 * B3p
        T3 = c2 * A3p - s2 * B3p
        S33 = s2 * A3pp + c2 * B3pp
        C3 = self.sa3 * d4 * s3 + self.r3 * self.ca3
        u = self.d2 + T
        v = self.ca2 * S - self.sa2 * (C3 + self.r2)
        w2 = self.sa2 * T
        u2, v2 = -S, self.ca2 * T
        u3 = T3
        v3 = self.ca2 * S3 - self.sa2 * C3p
        w3 = self.sa2 * S3 + self.ca2 * C3p
        u22, v22, w22 = -T, -self.ca2 * S, -self.sa2 * S
        u23, v23, w23 = -S3, self.ca2 * T3, self.sa2 * T3
        u33 = c2 * A3pp - s2 * B3pp
        v33 = self.ca2 * S33 - self.sa2 * C3pp
        w33 = self.sa2 * S33 + self.ca2 * C3pp
        P = u * u3 + v * v3
        Q = u * u2 + v * v2
        det = P * w2 - Q * w3
        P2 = u2 * u3 + u * u23 + v2 * v3 + v * v23
        P3 = u3 * u3 + u * u33 + v3 * v3 + v * v33
        Q2 = u2 * u2 + u * u22 + v2 * v2 + v * v22
        Q3 = u3 * u2 + u * u23 + v3 * v2 + v * v23
        g2 = P2 * w2 + P * w22 - Q2 * w3 - Q * w23
        g3 = P3 * w2 + P * w23 - Q3 * w3 - Q * w33
        return det, g2, g3

    def frame(self, t2: float, t3: float):
        """((m11, m12, m21, m22) of d(rho,z)/d(theta2,theta3), rho, z)."""
        c2, s2 = math.cos(t2), math.sin(t2)
        c3, s3 = math.cos(t3), math.sin(t3)
        d4 = self.d4
        A3 = self.d3 + d4 * c3
        B3 = self.ca3 * d4 * s3 - self.r3 * self.sa3
        C3 = self.sa3 * d4 * s3 + self.r3 * self.ca3
        A3p = -d4 * s3
        B3p = self.ca3 * d4 * c3
        C3p = self.sa3 * d4 * c3
        S = s2 * A3 + c2 * B3
        T = c2 * A3 - s2 * B3
        S3 = s2 * A3p + c2 * B3p
        T3 = c2 * A3p - s2 * B3p
        u = self.d2 + T
        v = self.ca2 * S - self.sa2 * (C3 + self.r2)
        w = self.sa2 * S + self.ca2 * (C3 + self.r2)
        u2, v2, w2 = -S, self.ca2 * T, self.sa2 * T
        u3 = T3
        v3 = self.ca2 * S3 - self.sa2 * C3p
        w3 = self.sa2 * S3 + self.ca2 * C3p
        rho = math.hypot(u, v)
        return ((u * u2 + v * v2) / rho, (u * u3 + v * v3) / rho,
                w2, w3, rho, w)

    def project(self, t2: float, t3: float, tol: float, iters: int = 8):
        """Newton along grad det onto the zero curve."""
        for _ in range(iters):
            det, g2, g3 = self.det_grad(t2, t3)
            if abs(det) < tol:
                break
            gg = g2 * g2 + g3 * g3
            if gg < 1e-30:
                break
            t2 -= det * g2 / gg
            t3 -= det * g3 / gg
        return t2, t3

    def signed_speed(self, t2: float, t3: float, w_ref, tau_ref):
        """(lambda, w_dir, tau, speed, |grad det|) with carried orientation."""
        det, g2, g3 = self.det_grad(t2, t3)
        gn = math.hypot(g2, g3)
        if gn < 1e-30:
            return 0.0, w_ref, tau_ref, 0.0, 0.0
        tx, ty = -g3 / gn, g2 / gn
        m11, m12, m21, m22, _, _ = self.frame(t2, t3)
        c11 = m11 * m11 + m12 * m12
        c12 = m11 * m21 + m12 * m22
        c22 = m21 * m21 + m22 * m22
        phi = 0.5 * math.atan2(2 * c12, c11 - c22)
        wx, wy = math.cos(phi), math.sin(phi)
        if tau_ref is not None and tx * tau_ref[0] + ty * tau_ref[1] < 0:
            tx, ty = -tx, -ty
        if wx * w_ref[0] + wy * w_ref[1] < 0:
            wx, wy = -wx, -wy
        vx = m11 * tx + m12 * ty
        vy = m21 * tx + m22 * ty
        speed = math.hypot(vx, vy)
        return vx * wx + vy * wy, (wx, wy), (tx, ty), speed, gn


def _confirm_triple_root(p: RobotParams, rho: float, z: float, theta3: float,
                         tols: Tolerances):
    """Newton on {P, P', P''} = 0 in (t, R, z).  Returns (ok, t*, R*, z*)."""
    t = math.tan(theta3 / 2.0)
    x = np.array([t, rho * rho, z])
    R0, z0 = x[1], x[2]
    try:
        c0, _, _ = ik_coefficient_partials(p, R0, z0)
    except DegenerateElimination:
        return None  # no algebraic side available for this geometry
    scale = max(1.0, float(np.abs(c0).max()))
    for _ in range(60):
        c, cR, cz = ik_coefficient_partials(p, x[1], x[2])
        d1, d2c = np.polyder(c), np.polyder(c, 2)
        f = np.array([np.polyval(c, x[0]), np.polyval(d1, x[0]),
                      np.polyval(d2c, x[0])])
        if np.abs(f).max() < 1e-12 * scale:
            break
        J = np.array([
            [np.polyval(d1, x[0]), np.polyval(cR, x[0]), np.polyval(cz, x[0])],
            [np.polyval(d2c, x[0]), np.polyval(np.polyder(cR), x[0]),
             np.polyval(np.polyder(cz), x[0])],
            [np.polyval(np.polyder(d2c), x[0]), np.polyval(np.polyder(cR, 2), x[0]),
             np.polyval(np.polyder(cz, 2), x[0])],
        ])
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return False, x
        x = x - step
        if np.abs(step).max() < 1e-14 * (1 + np.abs(x).max()):
            break
    c, _, _ = ik_coefficient_partials(p, x[1], x[2])
    res = max(abs(np.polyval(c, x[0])), abs(np.polyval(np.polyder(c), x[0])),
              abs(np.polyval(np.polyder(c, 2), x[0])))
    shift = abs(x[1] - R0) + abs(x[2] - z0)
    ok = (res < tols.cusp_newton_rel * scale
          and shift < tols.cusp_shift_rel * (1.0 + abs(R0))
          and x[1] >= -1e-12)
    return bool(ok), x


def scan_cusps(p: RobotParams, curves: List[SingularityCurve],
               tols: Tolerances = DEFAULT_TOLS):
    """(cusps, anomalies) for the given curve set."""
    cusps: List[CuspPoint] = []
    anomalies: List[CuspAnomaly] = []
    dscale = det_scale(p)

    for cid, curve in enumerate(curves):
        if curve.degenerate_image or len(curve) < 8:
            continue
        pts = curve.theta
        m = len(pts)
        img = curve.image(p)
        if float(np.max(img.max(axis=0) - img.min(axis=0))) < 1e-8:
            continue  # safety: image collapsed to a point

        # per-sample frames
        u, v, w, u2, v2, w2, u3, v3, w3 = _frame_terms(p, pts[:, 0], pts[:, 1])
        rho = np.hypot(u, v)
        M = np.empty((m, 2, 2))
        M[:, 0, 0] = (u * u2 + v * v2) / rho
        M[:, 0, 1] = (u * u3 + v * v3) / rho
        M[:, 1, 0] = w2
        M[:, 1, 1] = w3
        nxt, prv = np.roll(pts, -1, axis=0), np.roll(pts, 1, axis=0)
        tau = torus_delta(nxt, prv)
        if not curve.closed:
            tau[0] = pts[1] - pts[0]
            tau[-1] = pts[-1] - pts[-2]
        norms = np.linalg.norm(tau, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        tau /= norms
        V = np.einsum("nij,nj->ni", M, tau)
        speed = np.linalg.norm(V, axis=1)
        med = float(np.median(speed))
        if med < 1e-12:
            continue
        MMt = np.einsum("nij,nkj->nik", M, M)
        phi = 0.5 * np.arctan2(2 * MMt[:, 0, 1], MMt[:, 0, 0] - MMt[:, 1, 1])
        W = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        sg = np.ones(m)
        for k in range(1, m):
            sg[k] = sg[k - 1] * (1.0 if float(W[k] @ (W[k - 1] * sg[k - 1])) >= 0 else -1.0)
        lam = np.einsum("ni,ni->n", V, W * sg[:, None])

        # bracket sign changes; subsample shallow-dip intervals for pairs
        sk = _ScalarKinematics(p)
        proj_tol = 1e-13 * max(dscale, 1e-12)
        intervals = range(m) if curve.closed else range(m - 1)
        brackets = []
        for k in intervals:
            k2 = (k + 1) % m
            l1 = lam[k]
            l2 = lam[k2]
            if k2 == 0:
                wrapflip = 1.0 if float((W[0] * sg[0]) @ (W[m - 1] * sg[m - 1])) >= 0 else -1.0
                l2 = lam[0] * wrapflip
            if l1 * l2 < 0:
                brackets.append((pts[k], pts[k2], tuple(W[k] * sg[k]),
                                 tuple(tau[k]), k))
            elif (min(speed[k], speed[k2]) < tols.velocity_scan_frac * med):
                # double sign change can hide inside one interval
                qa = pts[k]
                qb = pts[k2]
                w_ref, tau_ref = tuple(W[k] * sg[k]), tuple(tau[k])
                prev_l, prev_q = None, None
                for tfrac in np.linspace(0.0, 1.0, 17):
                    qs = qa + (qb - qa) * tfrac
                    x2, x3 = sk.project(qs[0], qs[1], proj_tol)
                    ls, w_ref, tau_ref, _, gn = sk.signed_speed(x2, x3, w_ref, tau_ref)
                    if gn == 0.0:
                        prev_l, prev_q = None, None
                        continue
                    if prev_l is not None and prev_l * ls < 0:
                        brackets.append((prev_q, (x2, x3), w_ref, tau_ref, k))
                    prev_l, prev_q = ls, (x2, x3)

        for qa, qb, w_ref, tau_ref, kidx in brackets:
            a2, a3 = sk.project(float(qa[0]), float(qa[1]), proj_tol)
            b2, b3 = float(qb[0]), float(qb[1])
            la, w_ref, tau_ref, _, _ = sk.signed_speed(a2, a3, w_ref, tau_ref)
            for _ in range(48):
                m2, m3 = sk.project(0.5 * (a2 + b2), 0.5 * (a3 + b3), proj_tol)
                lm, w_ref, tau_ref, _, _ = sk.signed_speed(m2, m3, w_ref, tau_ref)
                if la * lm < 0:
                    b2, b3 = m2, m3
                else:
                    a2, a3 = m2, m3
                    la = lm
                if abs(b2 - a2) + abs(b3 - a3) < 1e-12:
                    break
            q = np.array(sk.project(0.5 * (a2 + b2), 0.5 * (a3 + b3), proj_tol))
            _, _, _, sp, gn = sk.signed_speed(q[0], q[1], w_ref, tau_ref)
            rho_c, z_c = (float(x) for x in rho_z(p, q[0], q[1]))
            if gn < tols.node_reject_rel * max(dscale, 1e-12):
                continue  # fold-fold node, not a cusp
            if sp > tols.velocity_accept_frac * med:
                continue
            conf = _confirm_triple_root(p, rho_c, z_c, q[1], tols)
            if conf is None:
                # degenerate elimination: geometric evidence only
                cusps.append(CuspPoint(rho_c, z_c, wrap_angle(q[0]), wrap_angle(q[1]),
                                       math.tan(q[1] / 2), 3, cid, float(kidx),
                                       confirmed=False))
                continue
            ok, x = conf
            if not ok:
                anomalies.append(CuspAnomaly(
                    rho_c, z_c, wrap_angle(q[0]), wrap_angle(q[1]),
                    "velocity zero without a confirming triple root"))
                continue
            t_star, R_star, z_star = (float(val) for val in x)
            theta3 = 2 * math.atan(t_star)
            # recover theta2 at the polished root for an exact preimage
            theta2 = wrap_angle(q[0])
            sol = inverse_kinematics(p, math.sqrt(max(R_star, 0.0)), 0.0,
                                     z_star, tols)
            best, bestd = None, math.inf
            for s in sol.solutions:
                d = abs(torus_delta(s.config.theta3, theta3))
                if d < bestd:
                    best, bestd = s, d
            if best is not None and bestd < 1e-3:
                theta2 = best.config.theta2
            mult = 3
            c, _, _ = ik_coefficient_partials(p, R_star, z_star)
            if abs(np.polyval(np.polyder(c, 3), t_star)) < 1e-6 * max(1.0, float(np.abs(c).max())):
                mult = 4
            cusps.append(CuspPoint(math.sqrt(max(R_star, 0.0)), z_star,
                                   theta2, wrap_angle(theta3), t_star, mult,
                                   cid, float(kidx)))

    # dedupe on the polished preimage (torus metric)
    unique: List[CuspPoint] = []
    for c in sorted(cusps, key=lambda c: (round(c.rho, 9), round(c.z, 9),
                                          c.theta2, c.theta3)):
        dup = False
        for d in unique:
            dd = torus_delta(np.array([c.theta2, c.theta3]),
                             np.array([d.theta2, d.theta3]))
            if np.linalg.norm(dd) < max(tols.cusp_dedupe_tol, 1e-4):
                dup = True
                break
        if not dup:
            unique.append(c)
    return unique, anomalies


def detect_cusps(p: RobotParams, curves: List[SingularityCurve],
                 tols: Tolerances = DEFAULT_TOLS) -> List[CuspPoint]:
    """Cusp points of the workspace cross-section boundary."""
    cusps, anomalies = scan_cusps(p, curves, tols)
    for a in anomalies:
        logger.warning("cusp candidate at (rho=%.6f, z=%.6f) failed "
                       "cross-validation: %s", a.rho, a.z, a.reason)
    return cusps


# ---------------------------------------------------------------------------
# workspace boundary
# ---------------------------------------------------------------------------

def _probe_counts(p: RobotParams, curve: SingularityCurve, n_probe: int,
                  tols: Tolerances) -> Tuple[int, int]:
    """Median IK counts on the two sides of the curve's image."""
    img = curve.image(p)
    m = len(img)
    if m < 4:
        return (0, 0)
    diam = float(np.linalg.norm(img.max(axis=0) - img.min(axis=0)))
    eps = max(1e-4, 5e-3 * diam)
    picks = np.linspace(0, m - 1, n_probe, dtype=int)
    left, right = [], []
    for k in picks:
        k2 = (k + 1) % m
        tangent = img[k2] - img[k]
        tn = np.linalg.norm(tangent)
        if tn < 1e-12:
            continue
        nrm = np.array([-tangent[1], tangent[0]]) / tn
        for sign, acc in ((1.0, left), (-1.0, right)):
            pt = img[k] + sign * eps * nrm
            if pt[0] < 0:
                continue
            try:
                acc.append(len(inverse_kinematics(p, pt[0], 0.0, pt[1], tols)))
            except DegenerateElimination:
                return (0, 0)
    if not left or not right:
        return (0, 0)
    return int(np.median(left)), int(np.median(right))


def workspace_boundary(p: RobotParams, curves: List[SingularityCurve],
                       cusps: Optional[List[CuspPoint]] = None,
                       n_probe: int = 12,
                       tols: Tolerances = DEFAULT_TOLS) -> WorkspaceBoundary:
    """Workspace image of the singular curves, classified and segmented.

    A curve is external when one of its sides is unreachable (zero IK
    solutions); internal boundaries are split at cusp points into segments
    labelled BS1, BS2, ... ordered by angle around the internal boundary
    centroid.
    """
    if cusps is None:
        cusps = detect_cusps(p, curves, tols)

    bcurves: List[BoundaryCurve] = []
    for cid, curve in enumerate(curves):
        if curve.degenerate_image:
            bcurves.append(BoundaryCurve(cid, "degenerate", curve.image(p), (0, 0)))
            continue
        a, b = _probe_counts(p, curve, n_probe, tols)
        kind = "external" if min(a, b) == 0 else "internal"
        bcurves.append(BoundaryCurve(cid, kind, curve.image(p), (a, b)))

    # relabel curves so S1, S2, ... lists internal ones first
    order = sorted(range(len(curves)),
                   key=lambda i: (0 if bcurves[i].kind == "internal" else
                                  1 if bcurves[i].kind == "external" else 2, i))
    for rank, i in enumerate(order):
        curves[i].label = f"S{rank + 1}"

    segments: List[BoundarySegment] = []
    internal_ids = [c.curve_id for c in bcurves if c.kind == "internal"]
    raw_segments = []
    for cid in internal_ids:
        curve = curves[cid]
        m = len(curve)
        curve_cusps = sorted([(c.curve_pos, k) for k, c in enumerate(cusps)
                              if c.curve_id == cid])
        if not curve_cusps:
            raw_segments.append((cid, curve.theta, None, None))
            continue
        positions = [int(round(pos)) % m for pos, _ in curve_cusps]
        ids = [k for _, k in curve_cusps]
        for s in range(len(positions)):
            a = positions[s]
            b = positions[(s + 1) % len(positions)]
            ca, cb = ids[s], ids[(s + 1) % len(positions)]
            if b > a:
                block = curve.theta[a:b + 1]
            else:
                block = np.vstack([curve.theta[a:], curve.theta[:b + 1]])
            block = _unwrap_polyline(block)
            # pin exact cusp preimages at the ends
            start = np.array([cusps[ca].theta2, cusps[ca].theta3])
            end = np.array([cusps[cb].theta2, cusps[cb].theta3])
            start = block[0] + torus_delta(start, block[0])
            end = block[-1] + torus_delta(end, block[-1])
            block = np.vstack([start, block, end])
            raw_segments.append((cid, block, ca, cb))

    # deterministic BS numbering by angle around the internal centroid
    if raw_segments:
        all_img = np.vstack([np.stack(rho_z(p, b[:, 0], b[:, 1]), axis=1)
                             for _, b, _, _ in raw_segments])
        centroid = all_img.mean(axis=0)
        def angle_of(seg):
            _, block, _, _ = seg
            img = np.stack(rho_z(p, block[:, 0], block[:, 1]), axis=1)
            mid = img[len(img) // 2]
            return math.atan2(mid[1] - centroid[1], mid[0] - centroid[0])
        raw_segments.sort(key=lambda s: (angle_of(s), s[0]))
        for j, (cid, block, ca, cb) in enumerate(raw_segments):
            img = np.stack(rho_z(p, block[:, 0], block[:, 1]), axis=1)
            segments.append(BoundarySegment(f"BS{j + 1}", cid, block, img, ca, cb))

    return WorkspaceBoundary(bcurves, segments, cusps)

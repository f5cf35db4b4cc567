"""Inverse kinematics through a fourth-degree polynomial in t = tan(theta3/2).

Elimination route: with S = s2*A3 + c2*B3 and T = c2*A3 - s2*B3 (A3, B3, C3
the frame-2 coordinates of the reference point as functions of theta3), the
z equation fixes S linearly, the radius equation combined with the unit
circle c2^2 + s2^2 = 1 fixes T linearly, and the unit circle itself becomes

    E(theta3) = S^2 + T^2 - A3^2 - B3^2 = 0.

Multiplying E by (1 + t^2)^2 under the half-angle substitution yields a
quartic whose real roots are in one-to-one correspondence with the
(theta2, theta3) solutions; theta1 follows from (x, y).  The construction
needs sin(alpha2) != 0 and d2 != 0; other geometries raise
DegenerateElimination.

For orthogonal robots z enters the coefficients only through z^2, for any
value of the r3 offset, so the polynomial is a function of (R, Z) =
(x^2 + y^2, z^2) there; general twists break the z symmetry and the signed
z is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .errors import DegenerateElimination
from .model import (JointConfig, RobotParams, _frame_terms, det_jacobian,
                    torus_delta, wrap_angle)

_DEGENERACY_EPS = 1e-12


@dataclass(frozen=True)
class QuarticPoly:
    """a*t^4 + b*t^3 + c*t^2 + d*t + e with real coefficients."""

    a: float
    b: float
    c: float
    d: float
    e: float

    def coeffs(self) -> np.ndarray:
        """Highest-degree first, as expected by numpy polynomial helpers."""
        return np.array([self.a, self.b, self.c, self.d, self.e])

    def scale(self) -> float:
        return float(max(np.abs(self.coeffs()).max(), 1e-300))

    def degree(self, rel_tol: float = 1e-12) -> int:
        c = self.coeffs()
        cut = rel_tol * np.abs(c).max()
        nz = np.nonzero(np.abs(c) > cut)[0]
        if len(nz) == 0:
            return -1  # identically zero
        return 4 - int(nz[0])

    def __call__(self, t):
        return np.polyval(self.coeffs(), t)


@dataclass(frozen=True)
class IkTarget:
    """Workspace target and the variables entering the polynomial."""

    x: float
    y: float
    z: float

    @property
    def R(self) -> float:
        return self.x * self.x + self.y * self.y

    @property
    def Z(self) -> float:
        return self.z * self.z

    @property
    def rho(self) -> float:
        return math.hypot(self.x, self.y)

    @classmethod
    def from_rho_z(cls, rho: float, z: float) -> "IkTarget":
        return cls(float(rho), 0.0, float(z))


@dataclass(frozen=True)
class RealRoot:
    value: float
    multiplicity: int


@dataclass
class IkSolution:
    config: JointConfig
    abs_det_j: float
    t3: float                      # tan(theta3/2) branch value
    near_coincident: bool = False
    merge_multiplicity: int = 1    # root-cluster size behind this solution
    aspect_id: Optional[int] = None


@dataclass
class IkSolutionSet:
    target: IkTarget
    solutions: List[IkSolution] = field(default_factory=list)
    anomalies: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def configs(self) -> List[JointConfig]:
        return [s.config for s in self.solutions]


# ---------------------------------------------------------------------------
# coefficient construction
# ---------------------------------------------------------------------------

def _check_eliminable(p: RobotParams):
    if abs(math.sin(p.alpha2)) < _DEGENERACY_EPS:
        raise DegenerateElimination(
            "first two joint axes are parallel (sin alpha2 = 0)")
    if abs(p.d2) < _DEGENERACY_EPS:
        raise DegenerateElimination(
            "first two joint axes intersect (d2 = 0)")


def _lifted_quadratics(p: RobotParams, R: float, z: float):
    """Quadratic coefficient triples [t^0, t^1, t^2] of S, T, A3, B3 times
    (1 + t^2)."""
    ca2, sa2 = math.cos(p.alpha2), math.sin(p.alpha2)
    ca3, sa3 = math.cos(p.alpha3), math.sin(p.alpha3)
    d2, d3, d4, r2, r3 = p.d2, p.d3, p.d4, p.r2, p.r3
    K = R + z * z - d2 * d2 - d3 * d3 - d4 * d4 - r2 * r2 - r3 * r3
    G = np.array([r2 + r3 * ca3, 2 * sa3 * d4, r2 + r3 * ca3])   # (C3+r2)(1+t^2)
    C = np.array([r3 * ca3, 2 * sa3 * d4, r3 * ca3])             # C3 (1+t^2)
    S = (np.array([z, 0.0, z]) - ca2 * G) / sa2
    A = np.array([d3 + d4, 0.0, d3 - d4])
    B = np.array([-r3 * sa3, 2 * ca3 * d4, -r3 * sa3])
    T = (np.array([K, 0.0, K]) + np.array([-2 * d3 * d4, 0.0, 2 * d3 * d4])
         - 2 * r2 * C) / (2 * d2)
    return S, T, A, B


def ik_coefficients(p: RobotParams, target: IkTarget) -> QuarticPoly:
    """Quartic whose real roots t = tan(theta3/2) give the IK solutions."""
    _check_eliminable(p)
    S, T, A, B = _lifted_quadratics(p, target.R, target.z)
    c = np.convolve(S, S) + np.convolve(T, T) - np.convolve(A, A) - np.convolve(B, B)
    c = c[::-1]  # highest first
    poly = QuarticPoly(*c)
    if poly.degree() < 0:
        raise DegenerateElimination("elimination produced the zero polynomial")
    return poly


def ik_coefficient_partials(p: RobotParams, R: float, z: float):
    """(coeffs, d/dR, d/dz) of the quartic, highest-degree first.

    Used by the triple-root confirmation of cusp candidates.
    """
    _check_eliminable(p)
    sa2 = math.sin(p.alpha2)
    d2 = p.d2
    S, T, A, B = _lifted_quadratics(p, R, z)
    dT_dR = np.array([1.0, 0.0, 1.0]) / (2 * d2)
    dT_dz = np.array([2 * z, 0.0, 2 * z]) / (2 * d2)
    dS_dz = np.array([1.0, 0.0, 1.0]) / sa2
    c = np.convolve(S, S) + np.convolve(T, T) - np.convolve(A, A) - np.convolve(B, B)
    dR = 2 * np.convolve(T, dT_dR)
    dz = 2 * np.convolve(S, dS_dz) + 2 * np.convolve(T, dT_dz)
    return c[::-1], dR[::-1], dz[::-1]


# ---------------------------------------------------------------------------
# quartic root solving
# ---------------------------------------------------------------------------

def solve_quartic(q: QuarticPoly, tols: Tolerances = DEFAULT_TOLS) -> List[RealRoot]:
    """All real roots with multiplicity clusters, ascending.

    Roots are polished by multiplicity-aware Newton steps; clusters closer
    than root_cluster_tol (relative) merge into one root whose multiplicity
    is the cluster size.
    """
    deg = q.degree()
    if deg < 1:
        raise ValueError("polynomial must have degree >= 1")
    c = q.coeffs()
    c = c[4 - deg:]
    scale = q.scale()
    roots = np.roots(c)

    # complex Newton polish
    dc = np.polyder(c)
    for _ in range(3):
        pv = np.polyval(c, roots)
        dv = np.polyval(dc, roots)
        step = np.where(np.abs(dv) > 1e-300, pv / np.where(dv == 0, 1, dv), 0)
        roots = roots - step

    cand = [r.real for r in roots
            if abs(r.imag) <= tols.real_root_imag_tol * (1 + abs(r.real))]
    if not cand:
        return []
    cand.sort()

    # cluster
    clusters: List[List[float]] = [[cand[0]]]
    for t in cand[1:]:
        if abs(t - clusters[-1][-1]) <= tols.root_cluster_tol * (1 + abs(t)):
            clusters[-1].append(t)
        else:
            clusters.append([t])

    out: List[RealRoot] = []
    for cl in clusters:
        t = float(np.mean(cl))
        m = len(cl)
        # multiplicity-aware real Newton
        for _ in range(30):
            pv = np.polyval(c, t)
            dv = np.polyval(dc, t)
            if abs(dv) < 1e-300:
                break
            step = m * pv / dv
            t -= step
            if abs(step) < 1e-15 * (1 + abs(t)):
                break
        local = scale * max(1.0, abs(t)) ** deg
        if abs(np.polyval(c, t)) <= tols.root_polish_rel * local:
            out.append(RealRoot(t, m))
    # merging after polish can re-collide clusters
    merged: List[RealRoot] = []
    for r in sorted(out, key=lambda r: r.value):
        if merged and abs(r.value - merged[-1].value) <= tols.root_cluster_tol * (1 + abs(r.value)):
            merged[-1] = RealRoot(merged[-1].value, merged[-1].multiplicity + r.multiplicity)
        else:
            merged.append(r)
    return merged


# ---------------------------------------------------------------------------
# back substitution
# ---------------------------------------------------------------------------

def _branch_angles(p: RobotParams, target: IkTarget, theta3: float):
    """(theta2, unit-circle error) for one theta3 branch, or (None, err)."""
    ca2, sa2 = math.cos(p.alpha2), math.sin(p.alpha2)
    ca3, sa3 = math.cos(p.alpha3), math.sin(p.alpha3)
    d2, d3, d4, r2, r3 = p.d2, p.d3, p.d4, p.r2, p.r3
    c3, s3 = math.cos(theta3), math.sin(theta3)
    A3 = d3 + d4 * c3
    B3 = ca3 * d4 * s3 - r3 * sa3
    C3 = sa3 * d4 * s3 + r3 * ca3
    den = A3 * A3 + B3 * B3
    if den < 1e-14 * max(1.0, d3 * d3 + d4 * d4):
        return None, math.inf  # reference point on joint axis 2: theta2 free
    K = target.R + target.z ** 2 - d2 ** 2 - d3 ** 2 - d4 ** 2 - r2 ** 2 - r3 ** 2
    S = (target.z - ca2 * (C3 + r2)) / sa2
    T = (K - 2 * d3 * d4 * c3 - 2 * r2 * C3) / (2 * d2)
    c2 = (S * B3 + T * A3) / den
    s2 = (S * A3 - T * B3) / den
    nrm = math.hypot(c2, s2)
    return math.atan2(s2 / nrm, c2 / nrm), abs(nrm - 1.0)


def inverse_kinematics(p: RobotParams, x: float, y: float, z: float,
                       tols: Tolerances = DEFAULT_TOLS) -> IkSolutionSet:
    """All joint configurations reaching (x, y, z).

    Solutions are validated by forward-kinematics residual; pairs closer
    than the merge tolerance (targets essentially on a fold) are flagged
    near-coincident instead of being rejected.
    """
    target = IkTarget(float(x), float(y), float(z))
    result = IkSolutionSet(target)
    poly = ik_coefficients(p, target)

    theta3_candidates: List[tuple] = []
    for root in solve_quartic(poly, tols):
        theta3_candidates.append((2.0 * math.atan(root.value), root.multiplicity))
    # a degree drop means a root escaped to t = inf, i.e. theta3 = pi
    if poly.degree() < 4:
        theta3_candidates.append((math.pi, 1))

    phi = math.atan2(y, x)
    norm = 1.0 + math.sqrt(target.R + target.z ** 2)
    for theta3, mult in theta3_candidates:
        theta2, circle_err = _branch_angles(p, target, theta3)
        if theta2 is None:
            result.anomalies.append(
                f"theta3={theta3:.6f}: reference point on joint axis 2, "
                "theta2 undetermined")
            continue
        if circle_err > math.sqrt(tols.unit_circle_tol):
            continue
        u, v, w = _frame_terms(p, theta2, theta3)[:3]
        theta1 = wrap_angle(phi - math.atan2(v, u))
        q = JointConfig(theta1, theta2, theta3)
        res = math.sqrt((math.hypot(u, v) - target.rho) ** 2 + (w - target.z) ** 2)
        if res > tols.ik_residual_rel * norm:
            continue
        dj = float(det_jacobian(p, theta2, theta3))
        result.solutions.append(IkSolution(
            config=q, abs_det_j=abs(dj), t3=math.tan(theta3 / 2.0)
            if abs(abs(theta3) - math.pi) > 1e-12 else math.inf,
            near_coincident=mult > 1, merge_multiplicity=mult))

    # flag mutually close pairs
    sols = result.solutions
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            if sols[i].config.torus_distance(sols[j].config) < tols.merge_tol_joint:
                sols[i].near_coincident = True
                sols[j].near_coincident = True
    sols.sort(key=lambda s: (s.config.theta3, s.config.theta2, s.config.theta1))
    return result


# ---------------------------------------------------------------------------
# batched solution counting (vectorized over many targets)
# ---------------------------------------------------------------------------

def ik_counts(p: RobotParams, R: np.ndarray, z: np.ndarray,
              tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Number of IK solutions for each (R_i, z_i) pair.

    Solves all quartics at once through batched companion-matrix
    eigenvalues; used for workspace rasters where per-target robustness
    niceties (multiplicit clusters, theta3 = pi escapes) are immaterial.
    """
    _check_eliminable(p)
    R = np.asarray(R, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    n = R.size

    ca2, sa2 = math.cos(p.alpha2), math.sin(p.alpha2)
    ca3, sa3 = math.cos(p.alpha3), math.sin(p.alpha3)
    d2, d3, d4, r2, r3 = p.d2, p.d3, p.d4, p.r2, p.r3
    K = R + z * z - d2 ** 2 - d3 ** 2 - d4 ** 2 - r2 ** 2 - r3 ** 2

    g0 = r2 + r3 * ca3
    c0 = r3 * ca3
    ones = np.ones(n)
    S = np.stack([(z - ca2 * g0) / sa2, (-ca2 * 2 * sa3 * d4 / sa2) * ones,
                  (z - ca2 * g0) / sa2], axis=1)
    A = np.stack([(d3 + d4) * ones, 0 * ones, (d3 - d4) * ones], axis=1)
    B = np.stack([(-r3 * sa3) * ones, (2 * ca3 * d4) * ones, (-r3 * sa3) * ones], axis=1)
    T = np.stack([K - 2 * d3 * d4 - 2 * r2 * c0,
                  (-2 * r2 * 2 * sa3 * d4) * ones,
                  K + 2 * d3 * d4 - 2 * r2 * c0], axis=1) / (2 * d2)

    def sq(Q):
        # (n,3) -> (n,5) coefficient convolution, ascending powers
        out = np.zeros((n, 5))
        for i in range(3):
            for j in range(3):
                out[:, i + j] += Q[:, i] * Q[:, j]
        return out

    coeffs = sq(S) + sq(T) - sq(A) - sq(B)  # ascending
    lead = coeffs[:, 4]
    scale = np.abs(coeffs).max(axis=1)
    good = np.abs(lead) > 1e-9 * np.maximum(scale, 1e-300)

    counts = np.zeros(n, dtype=int)
    if good.any():
        idx = np.nonzero(good)[0]
        m = coeffs[idx]
        comp = np.zeros((len(idx), 4, 4))
        comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
        comp[:, :, 3] = -m[:, :4] / m[:, 4:5]
        ev = np.linalg.eigvals(comp)
        real = np.abs(ev.imag) <= tols.real_root_imag_tol * (1 + np.abs(ev.real))
        t3 = 2 * np.arctan(ev.real)
        c3, s3 = np.cos(t3), np.sin(t3)
        A3 = d3 + d4 * c3
        B3 = ca3 * d4 * s3 - r3 * sa3
        C3 = sa3 * d4 * s3 + r3 * ca3
        den = A3 * A3 + B3 * B3
        Ki = K[idx][:, None]
        Sv = (z[idx][:, None] - ca2 * (C3 + r2)) / sa2
        Tv = (Ki - 2 * d3 * d4 * c3 - 2 * r2 * C3) / (2 * d2)
        with np.errstate(divide="ignore", invalid="ignore"):
            circle = np.abs((Sv * Sv + Tv * Tv) / den - 1.0)
        valid = real & (den > 1e-12) & (circle < 1e-6)
        counts[idx] = valid.sum(axis=1)
    # slow path for leading-coefficient degeneracies
    for i in np.nonzero(~good)[0]:
        try:
            sols = inverse_kinematics(p, math.sqrt(max(R[i], 0.0)), 0.0, z[i], tols)
            counts[i] = len(sols)
        except DegenerateElimination:
            counts[i] = 0
    return counts

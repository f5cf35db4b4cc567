"""Robot parameterization, forward kinematics and Jacobian evaluation.

The kinematic chain is three revolute joints described by modified
Denavit-Hartenberg parameters, frame i built from frame i-1 as

    Rot(x, alpha_i) * Trans(x, d_i) * Rot(z, theta_i) * Trans(z, r_i)

with alpha1 = d1 = r1 = 0.  The reference point P sits at (d4, 0, 0) in
frame 3.  Twist signs are calibrated to alpha2 = -pi/2, alpha3 = +pi/2:
with these signs the factored determinant below matches det(J) of the full
chain up to the constant factor d4, and inverse kinematics at the standard
test pose reproduces the expected four postures.

Because joint 1 is revolute, (rho, z) = (sqrt(x^2+y^2), z) depends only on
(theta2, theta3); all singularity analysis happens on that 2-torus.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_TOLS
from .errors import NonOrthogonalGeometry, RobotFileError

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

# calibrated twist signs (see module docstring)
ALPHA2_DEFAULT = -HALF_PI
ALPHA3_DEFAULT = HALF_PI


def wrap_angle(x):
    """Wrap angle(s) to (-pi, pi]."""
    w = np.mod(np.asarray(x, dtype=float), TWO_PI)
    w = np.where(w > np.pi, w - TWO_PI, w)
    if np.ndim(x) == 0:
        return float(w)
    return w


def torus_delta(a, b):
    """Shortest signed angular difference a - b on the circle."""
    return wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


@dataclass(frozen=True)
class RobotParams:
    """Geometric parameters of a 3-R robot (modified DH)."""

    d2: float
    d3: float
    d4: float
    r2: float
    r3: float = 0.0
    alpha2: float = ALPHA2_DEFAULT
    alpha3: float = ALPHA3_DEFAULT
    joint_limits: Optional[tuple] = None  # ((lo, hi),) * 3, radians

    def __post_init__(self):
        vals = (self.d2, self.d3, self.d4, self.r2, self.r3, self.alpha2, self.alpha3)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("robot parameters must be finite")
        if self.d2 < 0:
            raise ValueError("d2 must be non-negative")
        if self.d3 < 0 or self.d4 < 0:
            raise ValueError("d3 and d4 must be non-negative")
        if self.joint_limits is not None:
            lim = tuple(tuple(float(x) for x in pair) for pair in self.joint_limits)
            if len(lim) != 3 or any(len(p) != 2 or p[0] > p[1] for p in lim):
                raise ValueError("joint_limits must be three [lo, hi] pairs")
            object.__setattr__(self, "joint_limits", lim)

    def orthogonal(self, eps: float = DEFAULT_TOLS.orthogonal_eps) -> bool:
        """True iff both twists are +-pi/2 within eps."""
        return (
            abs(abs(self.alpha2) - HALF_PI) <= eps
            and abs(abs(self.alpha3) - HALF_PI) <= eps
        )

    def normalized(self) -> "RobotParams":
        """Scale all lengths so that d2 = 1 (requires d2 > 0)."""
        if self.d2 <= 0:
            raise ValueError("cannot normalize a robot with d2 = 0")
        s = 1.0 / self.d2
        return RobotParams(1.0, self.d3 * s, self.d4 * s, self.r2 * s,
                           self.r3 * s, self.alpha2, self.alpha3,
                           self.joint_limits)

    def scaled(self, lam: float) -> "RobotParams":
        return RobotParams(self.d2 * lam, self.d3 * lam, self.d4 * lam,
                           self.r2 * lam, self.r3 * lam, self.alpha2,
                           self.alpha3, self.joint_limits)

    def as_dict(self) -> dict:
        d = {"d2": self.d2, "d3": self.d3, "d4": self.d4, "r2": self.r2,
             "r3": self.r3, "alpha2": self.alpha2, "alpha3": self.alpha3}
        if self.joint_limits is not None:
            d["joint_limits"] = [list(p) for p in self.joint_limits]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RobotParams":
        required = ("d2", "d3", "d4", "r2")
        missing = [k for k in required if k not in data]
        if missing:
            raise RobotFileError(f"missing robot parameters: {missing}")
        known = {"d2", "d3", "d4", "r2", "r3", "alpha2", "alpha3", "joint_limits"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise RobotFileError(f"unknown robot parameters: {unknown}")
        try:
            kw = {k: float(data[k]) for k in ("d2", "d3", "d4", "r2")}
            kw["r3"] = float(data.get("r3", 0.0))
            kw["alpha2"] = float(data.get("alpha2", ALPHA2_DEFAULT))
            kw["alpha3"] = float(data.get("alpha3", ALPHA3_DEFAULT))
            if data.get("joint_limits") is not None:
                kw["joint_limits"] = tuple(tuple(p) for p in data["joint_limits"])
            return cls(**kw)
        except (TypeError, ValueError) as e:
            raise RobotFileError(f"invalid robot parameter: {e}") from e

    @classmethod
    def load(cls, path) -> "RobotParams":
        try:
            with open(path) as f:
                data = json.load(f)
        except OSError as e:
            raise RobotFileError(f"cannot read robot file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise RobotFileError(f"robot file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise RobotFileError(f"robot file {path} must hold a JSON object")
        return cls.from_dict(data)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


@dataclass(frozen=True)
class JointConfig:
    """A joint-space point; each angle normalized to (-pi, pi]."""

    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, wrap_angle(v))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    @classmethod
    def from_array(cls, q: Sequence[float]) -> "JointConfig":
        return cls(float(q[0]), float(q[1]), float(q[2]))

    def torus_distance(self, other: "JointConfig") -> float:
        d = torus_delta(self.as_array(), other.as_array())
        return float(np.linalg.norm(d))


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float
    z: float

    def rho(self) -> float:
        return math.hypot(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


# ---------------------------------------------------------------------------
# reduced kinematics on the (theta2, theta3) torus
# ---------------------------------------------------------------------------

def _frame_terms(p: RobotParams, t2, t3):
    """Position of P in frame 1 and its theta2/theta3 partials.

    Returns (u, v, w, u2, v2, w2, u3, v3, w3) where (u, v, w) is P expressed
    in frame 1 (so rho^2 = u^2 + v^2, z = w) and subscripts denote partial
    derivatives.  Broadcasts over array-valued t2, t3.
    """
    ca2, sa2 = math.cos(p.alpha2), math.sin(p.alpha2)
    ca3, sa3 = math.cos(p.alpha3), math.sin(p.alpha3)
    c2, s2 = np.cos(t2), np.sin(t2)
    c3, s3 = np.cos(t3), np.sin(t3)

    A3 = p.d3 + p.d4 * c3
    B3 = ca3 * p.d4 * s3 - p.r3 * sa3
    C3 = sa3 * p.d4 * s3 + p.r3 * ca3
    A3p = -p.d4 * s3
    B3p = ca3 * p.d4 * c3
    C3p = sa3 * p.d4 * c3

    S = s2 * A3 + c2 * B3
    T = c2 * A3 - s2 * B3
    u = p.d2 + T
    v = ca2 * S - sa2 * (C3 + p.r2)
    w = sa2 * S + ca2 * (C3 + p.r2)

    u2 = -S
    v2 = ca2 * T
    w2 = sa2 * T
    S3 = s2 * A3p + c2 * B3p
    T3 = c2 * A3p - s2 * B3p
    u3 = T3
    v3 = ca2 * S3 - sa2 * C3p
    w3 = sa2 * S3 + ca2 * C3p
    return u, v, w, u2, v2, w2, u3, v3, w3


def rho_z(p: RobotParams, t2, t3):
    """(rho, z) of the reference point; vectorized over t2, t3."""
    u, v, w = _frame_terms(p, t2, t3)[:3]
    return np.hypot(u, v), w


def forward_kinematics(p: RobotParams, q: JointConfig) -> CartesianPoint:
    """Cartesian position of the reference point P."""
    u, v, w = _frame_terms(p, q.theta2, q.theta3)[:3]
    c1, s1 = math.cos(q.theta1), math.sin(q.theta1)
    return CartesianPoint(c1 * u - s1 * v, s1 * u + c1 * v, float(w))


def jacobian(p: RobotParams, q: JointConfig) -> np.ndarray:
    """Analytic 3x3 Jacobian d(x, y, z)/d(theta1, theta2, theta3)."""
    u, v, w, u2, v2, w2, u3, v3, w3 = _frame_terms(p, q.theta2, q.theta3)
    c1, s1 = math.cos(q.theta1), math.sin(q.theta1)
    return np.array([
        [-s1 * u - c1 * v, c1 * u2 - s1 * v2, c1 * u3 - s1 * v3],
        [c1 * u - s1 * v, s1 * u2 + c1 * v2, s1 * u3 + c1 * v3],
        [0.0, w2, w3],
    ])


def det_jacobian(p: RobotParams, t2, t3):
    """det of the full Jacobian; independent of theta1.  Vectorized."""
    u, v, w, u2, v2, w2, u3, v3, w3 = _frame_terms(p, t2, t3)
    return (u * u3 + v * v3) * w2 - (u * u2 + v * v2) * w3


def det_and_grad(p: RobotParams, t2, t3):
    """(det J, d det/d theta2, d det/d theta3), analytic, vectorized.

    Uses the closed-form second partials of the frame terms; agreement with
    finite differences of det_jacobian is asserted in the test suite.
    """
    ca2, sa2 = math.cos(p.alpha2), math.sin(p.alpha2)
    ca3, sa3 = math.cos(p.alpha3), math.sin(p.alpha3)
    c2, s2 = np.cos(t2), np.sin(t2)
    c3, s3 = np.cos(t3), np.sin(t3)

    A3 = p.d3 + p.d4 * c3
    B3 = ca3 * p.d4 * s3 - p.r3 * sa3
    C3 = sa3 * p.d4 * s3 + p.r3 * ca3
    A3p = -p.d4 * s3
    B3p = ca3 * p.d4 * c3
    C3p = sa3 * p.d4 * c3
    A3pp = -p.d4 * c3
    B3pp = -ca3 * p.d4 * s3
    C3pp = -sa3 * p.d4 * s3

    S = s2 * A3 + c2 * B3
    T = c2 * A3 - s2 * B3
    S3 = s2 * A3p + c2 * B3p
    T3 = c2 * A3p - s2 * B3p
    S33 = s2 * A3pp + c2 * B3pp

    u = p.d2 + T
    v = ca2 * S - sa2 * (C3 + p.r2)
    w = sa2 * S + ca2 * (C3 + p.r2)
    u2, v2, w2 = -S, ca2 * T, sa2 * T
    u3 = T3
    v3 = ca2 * S3 - sa2 * C3p
    w3 = sa2 * S3 + ca2 * C3p

    u22, v22, w22 = -T, -ca2 * S, -sa2 * S
    u23, v23, w23 = -S3, ca2 * T3, sa2 * T3
    u33 = c2 * A3pp - s2 * B3pp
    v33 = ca2 * S33 - sa2 * C3pp
    w33 = sa2 * S33 + ca2 * C3pp

    P = u * u3 + v * v3
    Q = u * u2 + v * v2
    det = P * w2 - Q * w3
    P2 = u2 * u3 + u * u23 + v2 * v3 + v * v23
    P3 = u3 * u3 + u * u33 + v3 * v3 + v * v33
    Q2 = u2 * u2 + u * u22 + v2 * v2 + v * v22
    Q3 = u3 * u2 + u * u23 + v3 * v2 + v * v23
    d2_ = P2 * w2 + P * w22 - Q2 * w3 - Q * w23
    d3_ = P3 * w2 + P * w23 - Q3 * w3 - Q * w33
    return det, d2_, d3_


def reduced_jacobian(p: RobotParams, t2, t3) -> np.ndarray:
    """2x2 matrix d(rho, z)/d(theta2, theta3) at a single point."""
    u, v, w, u2, v2, w2, u3, v3, w3 = _frame_terms(p, t2, t3)
    rho = np.hypot(u, v)
    return np.array([
        [(u * u2 + v * v2) / rho, (u * u3 + v * v3) / rho],
        [w2, w3],
    ])


def det_jacobian_orthogonal(p: RobotParams, t2, t3):
    """Factored determinant for orthogonal robots:

        (d3 + c3*d4) * (c2*(s3*d3 - c3*r2) + s3*d2)

    Proportional to det_jacobian with constant ratio d4 when r3 = 0; for
    r3 != 0 the factored form is not valid and the full determinant must be
    used instead.
    """
    if not p.orthogonal():
        raise NonOrthogonalGeometry(
            "factored determinant requires alpha2, alpha3 = +-pi/2")
    c2, c3 = np.cos(t2), np.cos(t3)
    s2, s3 = np.sin(t2), np.sin(t3)
    return (p.d3 + c3 * p.d4) * (c2 * (s3 * p.d3 - c3 * p.r2) + s3 * p.d2)


def singularity_factors(p: RobotParams):
    """Factor fields of det J for an orthogonal robot with r3 = 0.

    Returns (first, second) callables of (t2, t3); det J = d4 * first * second.
    The first factor d3 + c3*d4 vanishes on horizontal lines
    theta3 = +-arccos(-d3/d4) (only when d3 <= d4), where the reference point
    sits on joint axis 2 and the whole theta2 circle maps to one point.
    """
    if not (p.orthogonal() and abs(p.r3) < 1e-12):
        raise NonOrthogonalGeometry(
            "factored singularity fields require an orthogonal robot with r3 = 0")

    def first(t2, t3):
        return (p.d3 + p.d4 * np.cos(t3)) + 0.0 * np.asarray(t2, dtype=float)

    def second(t2, t3):
        c2, s3, c3 = np.cos(t2), np.sin(t3), np.cos(t3)
        return c2 * (s3 * p.d3 - c3 * p.r2) + s3 * p.d2

    return first, second


@lru_cache(maxsize=64)
def det_scale(p: RobotParams, n: int = 64) -> float:
    """max |det J| over a coarse grid; the robot's determinant scale."""
    th = np.linspace(-math.pi, math.pi, n, endpoint=False)
    d = det_jacobian(p, th[:, None], th[None, :])
    return float(np.abs(d).max())


@lru_cache(maxsize=64)
def workspace_bounds(p: RobotParams, n: int = 128, margin: float = 1.05):
    """Bounding box (rho_max, z_min, z_max) of the workspace cross-section."""
    th = np.linspace(-math.pi, math.pi, n, endpoint=False)
    rho, z = rho_z(p, th[:, None], th[None, :])
    return (float(rho.max() * margin),
            float(z.min() * margin - 1e-9),
            float(z.max() * margin + 1e-9))

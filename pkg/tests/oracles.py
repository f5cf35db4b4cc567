"""Independent reference computations used to validate the library.

These deliberately avoid the code paths they check: finite differences
instead of the analytic Jacobian, sign-change bisection instead of the
companion-matrix root solver, dense re-solving with nearest-neighbour
matching instead of predictor-corrector continuation, residual grid scans
instead of the quartic for solution counting.
"""

import math

import numpy as np

from cuspidal import JointConfig, forward_kinematics, inverse_kinematics
from cuspidal.model import rho_z, torus_delta


def fd_jacobian(p, q, eps=1e-6):
    """Central finite differences of forward kinematics."""
    base = q.as_array()
    J = np.zeros((3, 3))
    for i in range(3):
        hi, lo = base.copy(), base.copy()
        hi[i] += eps
        lo[i] -= eps
        fhi = forward_kinematics(p, JointConfig.from_array(hi)).as_array()
        flo = forward_kinematics(p, JointConfig.from_array(lo)).as_array()
        J[:, i] = (fhi - flo) / (2 * eps)
    return J


def bisection_roots(coeffs, lo, hi, n_grid=400000, tol=1e-12):
    """Real roots of a polynomial by sign-change bisection on a fine grid.

    Finds odd-multiplicity roots only; suitable for random polynomials
    where multiple roots have probability zero.
    """
    xs = np.linspace(lo, hi, n_grid)
    vals = np.polyval(coeffs, xs)
    roots = []
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for k in sign_change:
        a, b = xs[k], xs[k + 1]
        fa = np.polyval(coeffs, a)
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = np.polyval(coeffs, m)
            if fa * fm <= 0:
                b = m
            else:
                a, fa = m, fm
            if b - a < tol:
                break
        roots.append(0.5 * (a + b))
    return roots


def grid_solution_count(p, x, y, z, n=2000, residual_cells=2.0):
    """Number of IK solutions by brute-force residual scan over (t2, t3).

    Counts clustered local minima of the (rho, z) residual below a grid-
    step-scaled threshold on an n-by-n periodic grid.
    """
    rho_t = math.hypot(x, y)
    th = np.linspace(-math.pi, math.pi, n, endpoint=False)
    rho, zz = rho_z(p, th[:, None], th[None, :])
    res = np.hypot(rho - rho_t, zz - z)
    h = 2 * math.pi / n
    # conservative local Lipschitz bound of the forward map
    lip = 1.05 * (p.d2 + p.d3 + 2 * p.d4 + abs(p.r2) + abs(p.r3))
    thresh = residual_cells * h * lip
    is_min = np.ones_like(res, dtype=bool)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1),
                   (-1, 1), (-1, -1)):
        is_min &= res <= np.roll(np.roll(res, di, axis=0), dj, axis=1)
    cand = np.argwhere(is_min & (res < thresh))
    # cluster minima within a few cells (torus metric)
    clusters = []
    for i, j in cand:
        placed = False
        for cl in clusters:
            ci, cj = cl[0]
            di = min(abs(i - ci), n - abs(i - ci))
            dj = min(abs(j - cj), n - abs(j - cj))
            if di <= 3 and dj <= 3:
                cl.append((i, j))
                placed = True
                break
        if not placed:
            clusters.append([(i, j)])
    return len(clusters)


def track_branches(p, path, n_steps=2500, jump_tol=0.35):
    """Follow every start posture along a path by dense global re-solving.

    Returns (alive, blocked_s): per-branch survival flags and the arc
    length at which a branch lost continuity (merged into a fold).
    """
    S = np.linspace(0.0, path.length, n_steps)
    start = inverse_kinematics(p, *path.point_at(0.0))
    branches = [s.config.as_array().copy() for s in start.solutions]
    alive = [True] * len(branches)
    blocked_s = [None] * len(branches)
    for k in range(1, n_steps):
        sols = inverse_kinematics(p, *path.point_at(S[k]))
        cand = [s.config.as_array() for s in sols.solutions]
        for bi, q in enumerate(branches):
            if not alive[bi]:
                continue
            best, bestd = None, np.inf
            for c in cand:
                d = np.linalg.norm(torus_delta(c, q))
                if d < bestd:
                    best, bestd = c, d
            if best is None or bestd > jump_tol:
                alive[bi] = False
                blocked_s[bi] = float(S[k])
            else:
                branches[bi] = q + torus_delta(best, q)
    return alive, blocked_s, [JointConfig.from_array(b) for b in branches]


def component_count_doubled(p, grid_n, joint_limits=None):
    """Aspect count by direct flood fill at doubled resolution."""
    from cuspidal import RobotParams, compute_aspects
    q = RobotParams(p.d2, p.d3, p.d4, p.r2, p.r3, p.alpha2, p.alpha3,
                    joint_limits)
    return len(compute_aspects(q, 2 * grid_n).aspect_ids)

import math

import numpy as np
import pytest

from cuspidal import (DegenerateElimination, IkTarget, JointConfig,
                      QuarticPoly, RobotParams, forward_kinematics,
                      ik_coefficients, inverse_kinematics, solve_quartic)
from cuspidal.ik import ik_coefficient_partials, ik_counts
from cuspidal.model import det_jacobian, rho_z

from conftest import random_general_robot, random_orthogonal_robot
from oracles import bisection_roots, grid_solution_count

PAPER_SOLUTIONS = [
    (-1.8, -2.8, 1.9),
    (-0.9, -0.7, 2.5),
    (-2.9, -3.0, -0.2),
    (0.2, -0.3, -1.9),
]


class TestSolveQuartic:
    def test_constructed_double_roots(self):
        # (t - 1)^2 (t + 2)^2 = t^4 + 2t^3 - 3t^2 - 4t + 4
        q = QuarticPoly(1, 2, -3, -4, 4)
        roots = solve_quartic(q)
        assert [(round(r.value, 6), r.multiplicity) for r in roots] == \
            [(-2.0, 2), (1.0, 2)]

    def test_no_real_roots(self):
        assert solve_quartic(QuarticPoly(1, 0, 0, 0, 1)) == []

    def test_degree_zero_rejected(self):
        with pytest.raises(ValueError):
            solve_quartic(QuarticPoly(0, 0, 0, 0, 5))

    def test_lower_degree_inputs(self):
        roots = solve_quartic(QuarticPoly(0, 0, 0, 2.0, -1.0))
        assert len(roots) == 1
        assert roots[0].value == pytest.approx(0.5, abs=1e-12)

    def test_against_bisection_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            c = rng.uniform(-3, 3, 5)
            if abs(c[0]) < 0.1:
                c[0] = 0.5
            q = QuarticPoly(*c)
            mine = [r.value for r in solve_quartic(q)]
            bound = 1 + np.abs(c[1:]).max() / abs(c[0])
            ref = bisection_roots(c, -bound - 1, bound + 1)
            assert len(mine) == len(ref)
            for a, b in zip(sorted(mine), sorted(ref)):
                assert a == pytest.approx(b, abs=1e-8)


class TestCoefficients:
    def test_roundtrip_root_residual(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            p = random_orthogonal_robot(rng)
            for _ in range(100):
                t2, t3 = rng.uniform(-math.pi, math.pi, 2)
                rho, z = (float(x) for x in rho_z(p, t2, t3))
                poly = ik_coefficients(p, IkTarget(rho, 0.0, float(z)))
                t = math.tan(t3 / 2)
                local = poly.scale() * max(1.0, abs(t)) ** 4
                assert abs(poly(t)) < 1e-8 * local

    def test_roundtrip_general_twists(self):
        rng = np.random.default_rng(12)
        for _ in range(6):
            p = random_general_robot(rng)
            for _ in range(60):
                t2, t3 = rng.uniform(-math.pi, math.pi, 2)
                rho, z = (float(x) for x in rho_z(p, t2, t3))
                poly = ik_coefficients(p, IkTarget(rho, 0.0, float(z)))
                t = math.tan(t3 / 2)
                local = poly.scale() * max(1.0, abs(t)) ** 4
                assert abs(poly(t)) < 1e-8 * local

    def test_even_in_z_for_orthogonal_any_r3(self, eight_cusp_robot):
        poly_up = ik_coefficients(eight_cusp_robot, IkTarget(1.1, 0, 0.8))
        poly_dn = ik_coefficients(eight_cusp_robot, IkTarget(1.1, 0, -0.8))
        assert np.allclose(poly_up.coeffs(), poly_dn.coeffs(), rtol=1e-12)

    def test_four_real_roots_at_paper_point(self, example_robot):
        poly = ik_coefficients(example_robot, IkTarget(2.5, 0.0, 0.5))
        assert sum(r.multiplicity for r in solve_quartic(poly)) == 4

    def test_unreachable_point_has_no_roots(self, example_robot):
        poly = ik_coefficients(example_robot, IkTarget(100.0, 0.0, 0.0))
        assert solve_quartic(poly) == []

    def test_degenerate_geometries_rejected(self):
        with pytest.raises(DegenerateElimination):
            ik_coefficients(RobotParams(1, 1, 1, 1, 0, alpha2=0.0),
                            IkTarget(1, 0, 0))
        with pytest.raises(DegenerateElimination):
            ik_coefficients(RobotParams(0, 1, 1, 1, 0), IkTarget(1, 0, 0))

    def test_partials_match_fd(self, eight_cusp_robot):
        p = eight_cusp_robot
        c, cR, cz = ik_coefficient_partials(p, 1.7, 0.4)
        eps = 1e-6
        cp, _, _ = ik_coefficient_partials(p, 1.7 + eps, 0.4)
        cm, _, _ = ik_coefficient_partials(p, 1.7 - eps, 0.4)
        assert np.allclose((cp - cm) / (2 * eps), cR, atol=1e-6)
        cp, _, _ = ik_coefficient_partials(p, 1.7, 0.4 + eps)
        cm, _, _ = ik_coefficient_partials(p, 1.7, 0.4 - eps)
        assert np.allclose((cp - cm) / (2 * eps), cz, atol=1e-5)


class TestInverseKinematics:
    def test_paper_solutions(self, example_robot):
        sols = inverse_kinematics(example_robot, 2.5, 0.0, 0.5)
        assert len(sols) == 4
        found = [s.config.as_array() for s in sols.solutions]
        for ref in PAPER_SOLUTIONS:
            best = min(np.max(np.abs(np.asarray(ref) - f)) for f in found)
            assert best < 0.06

    def test_outer_region_two_solutions(self, example_robot):
        sols = inverse_kinematics(example_robot, 4.2, 0.0, 0.0)
        assert len(sols) == 2

    def test_roundtrip_many_robots(self):
        rng = np.random.default_rng(13)
        for robot_i in range(8):
            p = random_orthogonal_robot(rng, r3_zero=robot_i % 2 == 0)
            n_ok = 0
            while n_ok < 60:
                q = JointConfig(*rng.uniform(-math.pi, math.pi, 3))
                if abs(det_jacobian(p, q.theta2, q.theta3)) < 1e-3:
                    continue
                n_ok += 1
                x = forward_kinematics(p, q)
                sols = inverse_kinematics(p, x.x, x.y, x.z)
                dist = min(q.torus_distance(s.config) for s in sols.solutions)
                assert dist < 1e-8

    def test_residual_postcondition(self, eight_cusp_robot):
        rng = np.random.default_rng(14)
        for _ in range(100):
            q = JointConfig(*rng.uniform(-math.pi, math.pi, 3))
            x = forward_kinematics(eight_cusp_robot, q)
            norm = 1 + np.linalg.norm(x.as_array())
            for s in inverse_kinematics(eight_cusp_robot, x.x, x.y, x.z).solutions:
                f = forward_kinematics(eight_cusp_robot, s.config)
                assert np.linalg.norm(f.as_array() - x.as_array()) < 1e-8 * norm

    def test_counts_match_grid_scan(self, example_robot):
        rng = np.random.default_rng(15)
        for _ in range(4):
            q = JointConfig(*rng.uniform(-math.pi, math.pi, 3))
            if abs(det_jacobian(example_robot, q.theta2, q.theta3)) < 0.3:
                continue
            x = forward_kinematics(example_robot, q)
            n_ik = len(inverse_kinematics(example_robot, x.x, x.y, x.z))
            n_grid = grid_solution_count(example_robot, x.x, x.y, x.z, n=2000)
            assert n_ik == n_grid

    def test_parity_off_boundary(self):
        rng = np.random.default_rng(16)
        p = random_orthogonal_robot(rng)
        for _ in range(150):
            q = JointConfig(*rng.uniform(-math.pi, math.pi, 3))
            if abs(det_jacobian(p, q.theta2, q.theta3)) < 1e-2:
                continue
            x = forward_kinematics(p, q)
            assert len(inverse_kinematics(p, x.x, x.y, x.z)) % 2 == 0

    def test_near_boundary_flagged_not_dropped(self, example_robot):
        # a point essentially on the internal boundary: the merging pair
        # must come back flagged near-coincident
        from cuspidal import scan_cusps, trace_singularity_curves
        curves = trace_singularity_curves(example_robot, 256)
        target = None
        for c in curves:
            img = c.image(example_robot)
            mid = img[len(img) // 4]
            if mid[0] > 0.2:
                target = mid
                break
        sols = inverse_kinematics(example_robot, target[0], 0.0, target[1])
        assert any(s.near_coincident for s in sols.solutions)

    def test_continuity_along_segment(self, example_robot):
        # inside the outer region, branches vary continuously
        zvals = np.linspace(-0.4, 0.4, 200)
        prev = None
        for z in zvals:
            sols = inverse_kinematics(example_robot, 3.6, 0.0, float(z))
            arr = sorted(s.config.as_array().tolist() for s in sols.solutions)
            if prev is not None:
                for a, b in zip(prev, arr):
                    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) < 0.08
            prev = arr


def test_ik_counts_batch_agrees_with_single(example_robot):
    rng = np.random.default_rng(17)
    R, Z = [], []
    singles = []
    for _ in range(150):
        t2, t3 = rng.uniform(-math.pi, math.pi, 2)
        rho, z = (float(x) for x in rho_z(example_robot, t2, t3))
        rho += rng.uniform(-0.2, 0.2)
        if rho <= 0.05:
            continue
        if abs(det_jacobian(example_robot, t2, t3)) < 0.05:
            continue
        R.append(rho * rho)
        Z.append(z)
        singles.append(len(inverse_kinematics(example_robot, rho, 0.0, z)))
    batch = ik_counts(example_robot, np.array(R), np.array(Z))
    assert np.sum(batch != np.array(singles)) <= 2  # boundary-grazing targets

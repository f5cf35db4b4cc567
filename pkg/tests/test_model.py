import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cuspidal import (CartesianPoint, JointConfig, NonOrthogonalGeometry,
                      RobotParams, RobotFileError, det_jacobian,
                      det_jacobian_orthogonal, forward_kinematics, jacobian,
                      wrap_angle)
from cuspidal.model import det_and_grad, rho_z

from conftest import random_general_robot
from oracles import fd_jacobian

angles = st.floats(-50.0, 50.0, allow_nan=False)


@given(angles)
def test_wrap_angle_idempotent_and_in_range(x):
    w = wrap_angle(x)
    assert -math.pi < w <= math.pi
    assert wrap_angle(w) == pytest.approx(w, abs=0)
    # congruent modulo 2 pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-9)


@given(angles, angles, angles)
def test_joint_config_normalization(a, b, c):
    q = JointConfig(a, b, c)
    for v in (q.theta1, q.theta2, q.theta3):
        assert -math.pi < v <= math.pi
    q2 = JointConfig(a + 2 * math.pi, b - 4 * math.pi, c)
    assert q.torus_distance(q2) < 1e-9


def test_fully_extended_reach(example_robot):
    pt = forward_kinematics(example_robot, JointConfig(0, 0, 0))
    total = example_robot.d2 + example_robot.d3 + example_robot.d4
    assert pt.rho() == pytest.approx(total, abs=1e-12)


def test_paper_configuration_maps_to_target(example_robot):
    pt = forward_kinematics(example_robot, JointConfig(-0.9, -0.7, 2.5))
    assert pt.rho() == pytest.approx(2.5, abs=0.06)
    assert pt.z == pytest.approx(0.5, abs=0.06)


@given(angles, angles, angles, angles)
def test_first_joint_only_rotates(a, b, c, delta):
    p = RobotParams(1.0, 2.0, 1.5, 1.0, 0.3)
    q = JointConfig(a, b, c)
    q2 = JointConfig(a + delta, b, c)
    p1 = forward_kinematics(p, q)
    p2 = forward_kinematics(p, q2)
    assert p1.rho() == pytest.approx(p2.rho(), abs=1e-9)
    assert p1.z == pytest.approx(p2.z, abs=1e-12)


def test_rho_z_independent_of_theta1_bulk(example_robot):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        t1, t2, t3, d = rng.uniform(-math.pi, math.pi, 4)
        a = forward_kinematics(example_robot, JointConfig(t1, t2, t3))
        b = forward_kinematics(example_robot, JointConfig(t1 + d, t2, t3))
        assert abs(a.rho() - b.rho()) < 1e-9 and abs(a.z - b.z) < 1e-12


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        p = random_general_robot(rng)
        q = JointConfig(*rng.uniform(-math.pi, math.pi, 3))
        J = jacobian(p, q)
        F = fd_jacobian(p, q)
        scale = max(1.0, np.abs(F).max())
        worst = max(worst, np.abs(J - F).max() / scale)
    assert worst < 1e-5


def test_det_independent_of_theta1(example_robot):
    rng = np.random.default_rng(2)
    for _ in range(200):
        t1a, t1b, t2, t3 = rng.uniform(-math.pi, math.pi, 4)
        Ja = jacobian(example_robot, JointConfig(t1a, t2, t3))
        Jb = jacobian(example_robot, JointConfig(t1b, t2, t3))
        assert np.linalg.det(Ja) == pytest.approx(np.linalg.det(Jb), rel=1e-9, abs=1e-12)


def test_det_and_grad_matches_fd():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = random_general_robot(rng)
        t2, t3 = rng.uniform(-math.pi, math.pi, 2)
        det, g2, g3 = det_and_grad(p, t2, t3)
        assert det == pytest.approx(float(det_jacobian(p, t2, t3)), rel=1e-9, abs=1e-12)
        eps = 1e-6
        f2 = (det_jacobian(p, t2 + eps, t3) - det_jacobian(p, t2 - eps, t3)) / (2 * eps)
        f3 = (det_jacobian(p, t2, t3 + eps) - det_jacobian(p, t2, t3 - eps)) / (2 * eps)
        assert g2 == pytest.approx(float(f2), rel=1e-5, abs=1e-6)
        assert g3 == pytest.approx(float(f3), rel=1e-5, abs=1e-6)


class TestFactoredDeterminant:
    def test_zero_on_first_factor_line(self):
        p = RobotParams(1.0, 1.0, 1.5, 0.7, 0.0)  # d3 <= d4
        t3 = math.acos(-p.d3 / p.d4)
        for t2 in np.linspace(-3, 3, 7):
            assert det_jacobian_orthogonal(p, t2, t3) == pytest.approx(0.0, abs=1e-12)

    def test_example_value_at_origin(self, example_robot):
        val = det_jacobian_orthogonal(example_robot, 0.0, 0.0)
        assert val == pytest.approx(-3.5, abs=1e-12)

    def test_full_determinant_value_at_origin(self, example_robot):
        J = jacobian(example_robot, JointConfig(0, 0, 0))
        # |det| = r2 (d3 + d4) up to the constant convention factor d4
        assert abs(np.linalg.det(J)) == pytest.approx(
            3.5 * example_robot.d4, rel=1e-9)

    def test_constant_ratio_when_r3_zero(self, example_robot):
        rng = np.random.default_rng(4)
        t2, t3 = rng.uniform(-math.pi, math.pi, (2, 10000))
        ratio = (det_jacobian_orthogonal(example_robot, t2, t3)
                 / det_jacobian(example_robot, t2, t3))
        mean = ratio.mean()
        assert mean == pytest.approx(1.0 / example_robot.d4, rel=1e-9)
        assert np.abs(ratio - mean).max() / abs(mean) < 1e-6

    def test_ratio_not_constant_when_r3_nonzero(self, eight_cusp_robot):
        rng = np.random.default_rng(5)
        t2, t3 = rng.uniform(-math.pi, math.pi, (2, 2000))
        ratio = (det_jacobian_orthogonal(eight_cusp_robot, t2, t3)
                 / det_jacobian(eight_cusp_robot, t2, t3))
        assert np.nanstd(ratio) / max(abs(np.nanmean(ratio)), 1e-12) > 1e-2

    def test_rejects_non_orthogonal(self):
        p = RobotParams(1, 1, 1, 1, 0, alpha2=0.7)
        with pytest.raises(NonOrthogonalGeometry):
            det_jacobian_orthogonal(p, 0.1, 0.2)


class TestRobotParams:
    def test_invariants(self):
        with pytest.raises(ValueError):
            RobotParams(1, -1, 1, 0)
        with pytest.raises(ValueError):
            RobotParams(1, 1, 1, math.inf)
        assert RobotParams(1, 1, 1, 0.5).orthogonal()
        assert not RobotParams(1, 1, 1, 0.5, alpha2=1.0).orthogonal()

    def test_normalized(self):
        p = RobotParams(2.0, 4.0, 3.0, 2.0, 1.0)
        n = p.normalized()
        assert n.d2 == 1.0 and n.d3 == 2.0 and n.r3 == 0.5

    def test_json_roundtrip(self, tmp_path, example_robot):
        f = tmp_path / "robot.json"
        example_robot.save(f)
        back = RobotParams.load(f)
        assert back == example_robot

    def test_file_defaults(self, tmp_path):
        f = tmp_path / "robot.json"
        f.write_text(json.dumps({"d2": 1, "d3": 2, "d4": 1.5, "r2": 1}))
        p = RobotParams.load(f)
        assert p.r3 == 0.0
        assert p.alpha2 == pytest.approx(-math.pi / 2)
        assert p.alpha3 == pytest.approx(math.pi / 2)

    def test_file_errors(self, tmp_path):
        f = tmp_path / "bad.json"
        f.write_text("{not json")
        with pytest.raises(RobotFileError):
            RobotParams.load(f)
        f.write_text(json.dumps({"d2": 1, "d3": 2}))
        with pytest.raises(RobotFileError):
            RobotParams.load(f)
        f.write_text(json.dumps({"d2": 1, "d3": 2, "d4": 1, "r2": 0, "bogus": 3}))
        with pytest.raises(RobotFileError):
            RobotParams.load(f)
        with pytest.raises(RobotFileError):
            RobotParams.load(tmp_path / "missing.json")


def test_cartesian_point_rho():
    assert CartesianPoint(3.0, 4.0, 1.0).rho() == pytest.approx(5.0)

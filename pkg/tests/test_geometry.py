import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from hapticloc.geometry import (
    FootOffset,
    Pose,
    compose,
    covariance_factor,
    inverse,
    load_trajectory,
    pose_exp,
    pose_log,
    quat_conjugate,
    quat_from_rotvec,
    quat_from_yaw,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_to_rotvec,
    quat_yaw,
    relative_increment,
    sample_pose_gaussian,
    sample_tangent,
    save_trajectory,
    transform_point,
    wrap_angle,
)

finite = st.floats(-10.0, 10.0, allow_nan=False)
angles = st.floats(-3.0, 3.0, allow_nan=False)


def random_pose(rng):
    q = quat_normalize(rng.normal(size=4))
    return Pose(rng.normal(size=3), q)


@st.composite
def poses(draw):
    p = [draw(finite) for _ in range(3)]
    q = np.array([draw(st.floats(-1, 1)) for _ in range(4)])
    if np.linalg.norm(q) < 1e-3:
        q = np.array([0.0, 0.0, 0.0, 1.0])
    return Pose(p, quat_normalize(q))


# quaternion layer against an independent implementation


def test_quat_mul_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = quat_normalize(rng.normal(size=4))
        b = quat_normalize(rng.normal(size=4))
        got = quat_mul(a, b)
        want = (Rotation.from_quat(a) * Rotation.from_quat(b)).as_quat()
        assert np.allclose(got, want, atol=1e-12) or np.allclose(got, -want, atol=1e-12)


def test_quat_rotate_matches_rotation_matrix():
    rng = np.random.default_rng(1)
    for _ in range(50):
        q = quat_normalize(rng.normal(size=4))
        v = rng.normal(size=3)
        assert np.allclose(quat_rotate(q, v), Rotation.from_quat(q).as_matrix() @ v, atol=1e-12)


def test_quat_from_rotvec_matches_scipy():
    rng = np.random.default_rng(2)
    for scale in (1.0, 1e-3, 1e-7, 1e-10, 0.0):
        rv = rng.normal(size=3) * scale
        got = quat_from_rotvec(rv)
        want = Rotation.from_rotvec(rv).as_quat()
        assert np.allclose(got, want, atol=1e-14) or np.allclose(got, -want, atol=1e-14)


def test_rotvec_round_trip_small_angles():
    for scale in (1.0, 1e-2, 1e-6, 1e-9):
        rv = np.array([0.3, -0.2, 0.45]) * scale
        back = quat_to_rotvec(quat_from_rotvec(rv))
        assert np.allclose(back, rv, rtol=1e-12, atol=1e-15)


def test_quat_yaw_of_pure_yaw():
    for yaw in (-3.0, -1.2, 0.0, 0.7, 2.9):
        assert quat_yaw(quat_from_yaw(yaw)) == pytest.approx(yaw, abs=1e-12)


def test_wrap_angle():
    assert wrap_angle(np.pi + 0.1) == pytest.approx(-np.pi + 0.1)
    assert wrap_angle(-np.pi - 0.1) == pytest.approx(np.pi - 0.1)
    assert wrap_angle(0.3) == pytest.approx(0.3)


# pose algebra


@settings(max_examples=100, deadline=None)
@given(poses(), poses())
def test_relative_increment_recomposes(a, b):
    inc = relative_increment(a, b)
    back = compose(a, inc)
    assert np.allclose(back.position, b.position, atol=1e-9)
    assert np.allclose(back.quat, b.quat, atol=1e-9) or np.allclose(back.quat, -b.quat, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(poses())
def test_inverse_composes_to_identity(p):
    ident = compose(p, inverse(p))
    assert np.allclose(ident.position, 0.0, atol=1e-9)
    assert abs(abs(ident.quat[3]) - 1.0) < 1e-9


def test_compose_is_associative():
    rng = np.random.default_rng(3)
    a, b, c = (random_pose(rng) for _ in range(3))
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    assert np.allclose(left.position, right.position, atol=1e-12)


def test_transform_point_hand_case():
    # 90 degree yaw: body +x maps to world +y
    p = Pose([1.0, 2.0, 3.0], quat_from_yaw(np.pi / 2))
    w = transform_point(p, [0.5, 0.0, 0.0])
    assert np.allclose(w, [1.0, 2.5, 3.0], atol=1e-12)


def test_transform_point_accepts_foot_offset():
    off = FootOffset("LF", [0.3, 0.2, -0.5])
    p = Pose([0.0, 0.0, 0.5], [0.0, 0.0, 0.0, 1.0])
    assert np.allclose(transform_point(p, off), [0.3, 0.2, 0.0])


def test_foot_offset_rejects_unknown_label():
    with pytest.raises(ValueError):
        FootOffset("XX", [0, 0, 0])


def test_pose_exp_log_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(20):
        delta = rng.normal(size=6) * 0.5
        assert np.allclose(pose_log(pose_exp(delta)), delta, atol=1e-10)


def test_pose_exp_zero_is_identity():
    p = pose_exp(np.zeros(6))
    assert np.allclose(p.position, 0.0)
    assert np.allclose(p.quat, [0, 0, 0, 1])


# sampling


def test_covariance_factor_reproduces_cov():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6))
    cov = a @ a.T
    f = covariance_factor(cov)
    assert np.allclose(f @ f.T, cov, atol=1e-10)


def test_covariance_factor_rejects_asymmetric():
    cov = np.eye(6)
    cov[0, 1] = 0.5
    with pytest.raises(ValueError):
        covariance_factor(cov)


def test_sample_tangent_deterministic():
    cov = np.diag([0.1, 0.2, 0.3, 0.01, 0.02, 0.03])
    a = sample_tangent(cov, np.random.default_rng(9), n=5)
    b = sample_tangent(cov, np.random.default_rng(9), n=5)
    assert np.array_equal(a, b)
    assert a.shape == (5, 6)


def test_sample_pose_gaussian_statistics():
    mean = Pose([1.0, -2.0, 0.5], quat_from_yaw(0.3))
    cov = np.diag([0.04, 0.04, 0.01, 0.001, 0.001, 0.004])
    rng = np.random.default_rng(6)
    samples = np.array([sample_pose_gaussian(mean, cov, rng).position for _ in range(4000)])
    assert np.allclose(samples.mean(axis=0), mean.position, atol=0.02)
    assert np.allclose(samples.std(axis=0), [0.2, 0.2, 0.1], atol=0.02)


# trajectory files


def test_trajectory_round_trip_exact(tmp_path):
    rng = np.random.default_rng(7)
    poses_in = [random_pose(rng) for _ in range(9)]
    times_in = np.cumsum(rng.uniform(0.1, 2.0, size=9))
    path = tmp_path / "a.traj"
    save_trajectory(path, poses_in, times_in)
    times, poses_out = load_trajectory(path)
    assert np.array_equal(times, times_in)
    for a, b in zip(poses_in, poses_out):
        assert np.array_equal(a.to_array(), b.to_array())


def test_trajectory_bad_line_reports_location(tmp_path):
    path = tmp_path / "bad.traj"
    path.write_text("0 1 2 3 0 0 0 1\n0 1 2\n")
    with pytest.raises(ValueError, match="bad.traj:2"):
        load_trajectory(path)


def test_pose_validation():
    with pytest.raises(ValueError):
        Pose([0, 0], [0, 0, 0, 1])
    with pytest.raises(ValueError):
        Pose([0, 0, 0], [0, 0, 0, 0])

"""Rigid-body poses as position plus scalar-last unit quaternion.

Quaternions are [qx, qy, qz, qw] everywhere in this package. Tangent vectors
are ordered [dx, dy, dz, droll, dpitch, dyaw] and perturb a pose on the right:
compose(mean, exp(delta)), i.e. noise lives in the body frame of the pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOOT_LABELS = ("LF", "RF", "LH", "RH")

_QUAT_IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("zero-norm quaternion cannot be normalized")
    return q / n


def quat_mul(a, b):
    """Hamilton product of scalar-last quaternions, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    av, aw = a[..., :3], a[..., 3:4]
    bv, bw = b[..., :3], b[..., 3:4]
    v = aw * bv + bw * av + np.cross(av, bv)
    w = aw * bw - np.sum(av * bv, axis=-1, keepdims=True)
    return np.concatenate([v, w], axis=-1)


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., :3] *= -1.0
    return out


def quat_rotate(q, v):
    """Rotate 3-vectors v by quaternions q (both broadcast over leading axes)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qv, qw = q[..., :3], q[..., 3:4]
    t = 2.0 * np.cross(qv, v)
    return v + qw * t + np.cross(qv, t)


def quat_from_rotvec(rv):
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(angle/2)/angle, series expansion below 1e-8 to avoid 0/0
    small = angle < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(small, 0.5 - angle * angle / 48.0, np.sin(half) / np.where(angle == 0.0, 1.0, angle))
    w = np.cos(half)
    return np.concatenate([rv * scale, w], axis=-1)


def quat_to_rotvec(q):
    """Logarithm map: quaternion to rotation vector with angle in [0, pi]."""
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., 3:4] < 0.0, -q, q)
    qv, qw = q[..., :3], q[..., 3:4]
    n = np.linalg.norm(qv, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(n, qw)
    small = n < 1e-9
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(
            small,
            2.0 / qw - 2.0 * n * n / (3.0 * qw**3),
            angle / np.where(n == 0.0, 1.0, n),
        )
    return qv * scale


def quat_yaw(q):
    """Heading angle about world z."""
    q = np.asarray(q, dtype=float)
    qx, qy, qz, qw = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.arctan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz))


def quat_from_yaw(yaw):
    yaw = np.asarray(yaw, dtype=float)
    z = np.sin(yaw / 2.0)
    w = np.cos(yaw / 2.0)
    zero = np.zeros_like(z)
    return np.stack([zero, zero, z, w], axis=-1)


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


@dataclass
class Pose:
    """World pose. position is a 3-vector, quat a scalar-last unit quaternion."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quat: np.ndarray = field(default_factory=lambda: _QUAT_IDENTITY.copy())

    def __post_init__(self):
        self.position = np.array(self.position, dtype=float).reshape(3)
        q = np.array(self.quat, dtype=float).reshape(4)
        self.quat = quat_normalize(q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @property
    def yaw(self) -> float:
        return float(quat_yaw(self.quat))

    def to_array(self) -> np.ndarray:
        """7-vector [x y z qx qy qz qw]."""
        return np.concatenate([self.position, self.quat])

    @staticmethod
    def from_array(a) -> "Pose":
        a = np.asarray(a, dtype=float).reshape(7)
        return Pose(a[:3], a[3:])


@dataclass
class FootOffset:
    """Contact point in the base frame, tagged with the foot that produced it."""

    label: str
    vec: np.ndarray

    def __post_init__(self):
        if self.label not in FOOT_LABELS:
            raise ValueError(f"unknown foot label {self.label!r}, expected one of {FOOT_LABELS}")
        self.vec = np.array(self.vec, dtype=float).reshape(3)


def compose(a: Pose, b: Pose) -> Pose:
    """a then b: the pose of frame b expressed in a's parent frame."""
    return Pose(a.position + quat_rotate(a.quat, b.position), quat_mul(a.quat, b.quat))


def inverse(p: Pose) -> Pose:
    qi = quat_conjugate(p.quat)
    return Pose(-quat_rotate(qi, p.position), qi)


def relative_increment(prev: Pose, curr: Pose) -> Pose:
    """Increment d with compose(prev, d) == curr."""
    return compose(inverse(prev), curr)


def transform_point(pose: Pose, offset) -> np.ndarray:
    """Map a base-frame point (3-vector or FootOffset) to world coordinates."""
    vec = offset.vec if isinstance(offset, FootOffset) else np.asarray(offset, dtype=float)
    return pose.position + quat_rotate(pose.quat, vec)


def pose_exp(delta) -> Pose:
    """Tangent vector [dx dy dz droll dpitch dyaw] to a small pose."""
    delta = np.asarray(delta, dtype=float).reshape(6)
    return Pose(delta[:3], quat_from_rotvec(delta[3:]))


def pose_log(p: Pose) -> np.ndarray:
    return np.concatenate([p.position, quat_to_rotvec(p.quat)])


def covariance_factor(cov) -> np.ndarray:
    """Factor F with F @ F.T == cov for a symmetric PSD 6x6 covariance.

    Eigenvalues may dip to -1e-12 from rounding; anything lower is rejected.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (6, 6):
        raise ValueError(f"pose covariance must be 6x6, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError("pose covariance must be symmetric")
    w, v = np.linalg.eigh(cov)
    floor = -1e-12 * max(1.0, float(w.max(initial=0.0)))
    if w.min() < floor:
        raise ValueError(f"pose covariance is not PSD (min eigenvalue {w.min():.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_tangent(cov, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Draw n tangent vectors from N(0, cov); a single 6-vector when n is None."""
    factor = covariance_factor(cov)
    if n is None:
        return factor @ rng.standard_normal(6)
    return rng.standard_normal((n, 6)) @ factor.T


def sample_pose_gaussian(mean: Pose, cov, rng: np.random.Generator) -> Pose:
    """Right-perturbed Gaussian sample: compose(mean, exp(delta)), delta ~ N(0, cov)."""
    return compose(mean, pose_exp(sample_tangent(cov, rng)))


def save_trajectory(path, poses, times=None) -> None:
    """Write one 't x y z qx qy qz qw' line per pose, full float precision."""
    poses = list(poses)
    if times is None:
        times = np.arange(len(poses), dtype=float)
    times = np.asarray(times, dtype=float)
    if len(times) != len(poses):
        raise ValueError("times and poses length mismatch")
    with open(path, "w") as f:
        for t, p in zip(times, poses):
            vals = np.concatenate([[t], p.to_array()])
            f.write(" ".join(format(v, ".17g") for v in vals) + "\n")


def load_trajectory(path):
    """Read a trajectory file; returns (times (K,), [Pose] * K)."""
    times, poses = [], []
    with open(path) as f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ValueError(f"{path}:{ln}: expected 8 fields 't x y z qx qy qz qw', got {len(parts)}")
            vals = [float(p) for p in parts]
            times.append(vals[0])
            poses.append(Pose.from_array(vals[1:]))
    return np.array(times), poses

"""Synthetic courses, a crawl-gait walker, and contact signal synthesis.

The walker advances the base a fixed distance per four-support phase and
repositions one leg per phase in crawl order LF -> RH -> RF -> LH. Every phase
logs the true pose, a noisy odometry increment (white noise plus an unreported
deterministic z/yaw bias, so raw odometry drifts), and one contact per foot
with its base-frame offset. True foot heights come from the elevation layer, so
a logged contact's world z equals the map height under it exactly.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .classifier import StepSignal, baseline_predict
from .geometry import (
    FOOT_LABELS,
    FootOffset,
    Pose,
    compose,
    pose_exp,
    quat_conjugate,
    quat_from_yaw,
    quat_rotate,
    relative_increment,
)
from .likelihood import ContactMeasurement
from .maps import (
    UNKNOWN_CLASS,
    ClassGrid,
    ElevationGrid,
    MapSet,
    PointCloudMap,
    class_at,
    elevation_at,
)

COURSE_KINDS = ("chevron-ramp", "class-tiles", "wall-room")

GAIT_ORDER = ("LF", "RH", "RF", "LH")

N_TERRAIN_CLASSES = 8

# per-class signal template parameters: amplitude, frequency, damping,
# vertical-force offset, torque scale; rows are distinct so the summary
# features separate the classes
CLASS_SIGNAL_PARAMS = np.array(
    [
        [0.6, 1.5, 1.2, 4.0, 0.20],
        [1.2, 2.6, 2.4, 5.2, 0.32],
        [1.8, 3.7, 1.6, 6.4, 0.44],
        [2.4, 4.8, 2.8, 7.6, 0.56],
        [3.0, 2.0, 2.0, 8.8, 0.68],
        [3.6, 3.1, 3.2, 10.0, 0.80],
        [4.2, 4.2, 1.4, 11.2, 0.92],
        [4.8, 5.3, 2.6, 12.4, 1.04],
    ]
)

SIGNAL_LENGTH_RANGE = (40, 120)


@dataclass(frozen=True)
class GaitParams:
    step_length: float = 0.05
    standing_height: float = 0.5
    foot_dx: float = 0.3  # half the 0.6 m foot rectangle, along the body
    foot_dy: float = 0.2  # half the 0.4 m rectangle, across the body
    dt: float = 1.0

    def nominal_offset(self, label: str) -> np.ndarray:
        sx = 1.0 if label in ("LF", "RF") else -1.0
        sy = 1.0 if label in ("LF", "LH") else -1.0
        return np.array([sx * self.foot_dx, sy * self.foot_dy, 0.0])


@dataclass(frozen=True)
class NoiseSpec:
    """Odometry corruption: reported white noise plus unreported per-step bias."""

    white_std: tuple = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    z_bias: float = 0.0
    yaw_bias: float = 0.0
    outlier_prob: float = 0.0
    outlier_shift: float = 0.15

    def white_array(self) -> np.ndarray:
        a = np.asarray(self.white_std, dtype=float)
        if a.shape != (6,):
            raise ValueError("white_std must have 6 entries")
        return a

    def bias_vector(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.z_bias, 0.0, 0.0, self.yaw_bias])


@dataclass(frozen=True)
class WallRoomLayout:
    floor_x: tuple = (-0.5, 2.0)
    floor_y: tuple = (-2.0, 1.0)
    wall_x: float = 2.0  # probing wall plane, faces the robot
    wall_y: float = -2.0  # side wall reached late in the lateral walk
    wall_height: float = 0.8
    spacing: float = 0.02
    margin: float = 0.5  # extra flat grid border around the floor


@dataclass(frozen=True)
class CourseSpec:
    kind: str
    resolution: float = 0.05
    seed: int = 0
    wall_room: WallRoomLayout = field(default_factory=WallRoomLayout)

    def __post_init__(self):
        if self.kind not in COURSE_KINDS:
            raise ValueError(f"unknown course kind {self.kind!r}, expected one of {COURSE_KINDS}")
        if not self.resolution > 0.0:
            raise ValueError("course resolution must be positive")


def _cell_centers(n_cols, n_rows, res, origin):
    xs = origin[0] + (np.arange(n_cols) + 0.5) * res
    ys = origin[1] + (np.arange(n_rows) + 0.5) * res
    return np.meshgrid(xs, ys)


CHEVRON_RAMP_DEG = 12.0
CHEVRON_HEIGHT = 0.13
CHEVRON_PERIOD = 0.26
CHEVRON_STRIP_X = 1.5  # strip segments: ramp 1.0, blocks 1.0, chevrons 1.2, ramp 1.0
CHEVRON_STRIP_Y = (0.2, 1.6)
CHEVRON_BLOCK = 0.25
CHEVRON_BLOCK_HMAX = 0.10
CHEVRON_TILT = 0.025  # gentle cross slope so lateral position is observable early


def _chevron_course(spec: CourseSpec) -> MapSet:
    size_x, size_y = 7.0, 3.0
    res = spec.resolution
    n_cols, n_rows = round(size_x / res), round(size_y / res)
    x, y = _cell_centers(n_cols, n_rows, res, (0.0, 0.0))
    h = np.zeros((n_rows, n_cols))

    slope = np.tan(np.radians(CHEVRON_RAMP_DEG))
    plateau = slope * 1.0
    x0 = CHEVRON_STRIP_X
    y_lo, y_hi = CHEVRON_STRIP_Y
    yc = 0.5 * (y_lo + y_hi)
    strip = (y >= y_lo) & (y < y_hi)
    tilt = CHEVRON_TILT * (y - y_lo)

    up = strip & (x >= x0) & (x < x0 + 1.0)
    h[up] = slope * (x[up] - x0) + tilt[up]

    # random block field first: non-repeating, so the filter can lock on
    # before it meets the periodic chevron section
    rng = np.random.default_rng(spec.seed)
    blocks = strip & (x >= x0 + 1.0) & (x < x0 + 2.0)
    bi = np.floor((x - (x0 + 1.0)) / CHEVRON_BLOCK).astype(int)
    bj = np.floor((y - y_lo) / CHEVRON_BLOCK).astype(int)
    block_h = rng.uniform(0.0, CHEVRON_BLOCK_HMAX, size=(int(bj.max()) + 1, int(bi.max()) + 1))
    h[blocks] = plateau + tilt[blocks] + block_h[bj[blocks], bi[blocks]]

    # chevron ridges: triangular profile along u, folded about the strip axis
    chev = strip & (x >= x0 + 2.0) & (x < x0 + 3.2)
    u = (x - (x0 + 2.0)) + np.abs(y - yc)
    m = np.mod(u, CHEVRON_PERIOD)
    tent = CHEVRON_HEIGHT * (1.0 - np.abs(2.0 * m / CHEVRON_PERIOD - 1.0))
    h[chev] = plateau + tilt[chev] + tent[chev]

    down = strip & (x >= x0 + 3.2) & (x < x0 + 4.2)
    h[down] = (plateau + tilt[down]) * (1.0 - (x[down] - (x0 + 3.2)) / 1.0)

    return MapSet(elevation=ElevationGrid(res, (0.0, 0.0), h))


TILES_PLATFORM_X = (3.0, 5.0)  # ramp up, 1 m top, ramp down
TILES_PLATFORM_Y = (1.25, 2.25)
TILES_PLATFORM_H = 0.20
TILES_RAMP_LEN = 0.5


def _tiles_course(spec: CourseSpec) -> MapSet:
    size_x, size_y = 7.0, 3.5
    res = spec.resolution
    n_cols, n_rows = round(size_x / res), round(size_y / res)
    x, y = _cell_centers(n_cols, n_rows, res, (0.0, 0.0))

    h = np.zeros((n_rows, n_cols))
    px0, px1 = TILES_PLATFORM_X
    py0, py1 = TILES_PLATFORM_Y
    on_y = (y >= py0) & (y < py1)
    up = on_y & (x >= px0) & (x < px0 + TILES_RAMP_LEN)
    top = on_y & (x >= px0 + TILES_RAMP_LEN) & (x < px1 - TILES_RAMP_LEN)
    down = on_y & (x >= px1 - TILES_RAMP_LEN) & (x < px1)
    h[up] = TILES_PLATFORM_H * (x[up] - px0) / TILES_RAMP_LEN
    h[top] = TILES_PLATFORM_H
    h[down] = TILES_PLATFORM_H * (px1 - x[down]) / TILES_RAMP_LEN

    # 1 x 1 m material tiles; a seeded assignment that uses every class
    n_tx, n_ty = int(np.ceil(size_x)), int(np.ceil(size_y))
    rng = np.random.default_rng(spec.seed)
    tile_class = rng.integers(0, N_TERRAIN_CLASSES, size=(n_ty, n_tx))
    order = rng.permutation(n_tx * n_ty)[:N_TERRAIN_CLASSES]
    tile_class.flat[order] = np.arange(N_TERRAIN_CLASSES)
    ti = np.clip(np.floor(x).astype(int), 0, n_tx - 1)
    tj = np.clip(np.floor(y).astype(int), 0, n_ty - 1)
    ids = tile_class[tj, ti].astype(np.uint8)

    return MapSet(
        elevation=ElevationGrid(res, (0.0, 0.0), h),
        class_grid=ClassGrid(res, (0.0, 0.0), ids, N_TERRAIN_CLASSES),
    )


def _wall_room_course(spec: CourseSpec) -> MapSet:
    lay = spec.wall_room
    res = spec.resolution
    m = lay.margin
    origin = (lay.floor_x[0] - m, lay.floor_y[0] - m)
    n_cols = round((lay.floor_x[1] - lay.floor_x[0] + 2 * m) / res)
    n_rows = round((lay.floor_y[1] - lay.floor_y[0] + 2 * m) / res)
    elevation = ElevationGrid(res, origin, np.zeros((n_rows, n_cols)))

    s = lay.spacing
    xs = np.arange(lay.floor_x[0], lay.floor_x[1] + s / 2, s)
    ys = np.arange(lay.floor_y[0], lay.floor_y[1] + s / 2, s)
    zs = np.arange(s, lay.wall_height + s / 2, s)
    fx, fy = np.meshgrid(xs, ys)
    floor = np.column_stack([fx.ravel(), fy.ravel(), np.zeros(fx.size)])
    wy, wz = np.meshgrid(ys, zs)
    front = np.column_stack([np.full(wy.size, lay.wall_x), wy.ravel(), wz.ravel()])
    sx, sz = np.meshgrid(xs, zs)
    side = np.column_stack([sx.ravel(), np.full(sx.size, lay.wall_y), sz.ravel()])

    cloud = PointCloudMap(np.vstack([floor, front, side]))
    return MapSet(elevation=elevation, cloud=cloud)


def generate_course(spec: CourseSpec) -> MapSet:
    """Build the named course's map layers, deterministic in the seed."""
    if spec.kind == "chevron-ramp":
        return _chevron_course(spec)
    if spec.kind == "class-tiles":
        return _tiles_course(spec)
    return _wall_room_course(spec)


def sample_signal_length(rng: np.random.Generator) -> int:
    lo, hi = SIGNAL_LENGTH_RANGE
    return int(rng.integers(lo, hi + 1))


def synth_force_signal(class_id: int, n_samples: int, rng: np.random.Generator, noise_scale: float = 1.0) -> StepSignal:
    """Class-conditioned damped-oscillation force/torque signal.

    With noise_scale 0 the deterministic class template is returned.
    """
    class_id = int(class_id)
    if not 0 <= class_id < len(CLASS_SIGNAL_PARAMS):
        raise ValueError(f"class id {class_id} outside [0, {len(CLASS_SIGNAL_PARAMS)})")
    if n_samples < 1:
        raise ValueError("signal needs at least one sample")
    amp, freq, damp, offset, torque = CLASS_SIGNAL_PARAMS[class_id]
    t = np.arange(n_samples) / max(n_samples - 1, 1)
    env = np.exp(-damp * t)
    w = 2.0 * np.pi * freq * t
    cols = np.column_stack(
        [
            0.3 * amp * env * np.sin(w + 0.7),
            0.3 * amp * env * np.cos(w + 1.3),
            offset * (1.0 - np.exp(-8.0 * t)) + amp * env * np.sin(w),
            torque * env * np.sin(w + 0.4),
            torque * env * np.cos(w + 2.1),
            0.5 * torque * env * np.sin(0.5 * w),
        ]
    )
    sigma = 0.06 * noise_scale * np.array([0.3 * amp, 0.3 * amp, amp, torque, torque, 0.5 * torque])
    cols = cols + rng.standard_normal((n_samples, 6)) * sigma
    return StepSignal(cols)


@dataclass
class StepRecord:
    k: int
    timestamp: float
    true_pose: Pose
    odom_increment: Pose
    odom_cov_diag: np.ndarray
    contacts: list  # ContactMeasurement, one per foot in FOOT_LABELS order
    true_foot_world: np.ndarray  # (4, 3)
    true_class_ids: np.ndarray  # (4,), UNKNOWN_CLASS where no class layer
    signals: list  # StepSignal or None, per foot


@dataclass
class WalkLog:
    start_pose: Pose
    init_prior: Pose
    records: list

    @property
    def n_steps(self) -> int:
        return len(self.records)

    def true_poses(self) -> list:
        return [self.start_pose] + [r.true_pose for r in self.records]

    def timestamps(self) -> np.ndarray:
        return np.array([0.0] + [r.timestamp for r in self.records])

    def odometry_poses(self, start: Pose | None = None) -> list:
        """Dead-reckoned trajectory: composed increments from the prior mean."""
        pose = self.init_prior if start is None else start
        out = [pose]
        for r in self.records:
            pose = compose(pose, r.odom_increment)
            out.append(pose)
        return out


def _path_samples(waypoints, step_length):
    """Positions and headings every step_length metres along a polyline."""
    wp = np.asarray(waypoints, dtype=float)
    if wp.ndim != 2 or wp.shape[1] != 2 or len(wp) < 2:
        raise ValueError("waypoints must be an (n>=2, 2) array")
    seg = np.diff(wp, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    if np.any(seg_len == 0.0):
        raise ValueError("duplicate consecutive waypoints")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    n = int(np.floor(total / step_length + 1e-9))
    pts, yaws = [], []
    for k in range(n + 1):
        s = min(k * step_length, total)
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
        f = (s - cum[i]) / seg_len[i]
        pts.append(wp[i] + f * seg[i])
        yaws.append(np.arctan2(seg[i, 1], seg[i, 0]))
    return np.array(pts), np.array(yaws)


def _base_pose(maps, xy, yaw, gait) -> Pose:
    z = elevation_at(maps.elevation, xy)
    if np.isnan(z):
        raise ValueError(f"walk path leaves the map at xy={tuple(np.round(xy, 3))}")
    return Pose([xy[0], xy[1], z + gait.standing_height], quat_from_yaw(yaw))


def _place_foot(maps, pose: Pose, label: str, gait) -> np.ndarray | None:
    world = pose.position + quat_rotate(pose.quat, gait.nominal_offset(label))
    z = elevation_at(maps.elevation, world[:2])
    if np.isnan(z):
        return None
    return np.array([world[0], world[1], z])


def _record_step(maps, k, pose, prev_pose, feet, noise, gait, rng, synth_signals, probe_world=None):
    incr_true = relative_increment(prev_pose, pose)
    delta = noise.white_array() * rng.standard_normal(6) + noise.bias_vector()
    odom = compose(incr_true, pose_exp(delta))

    contacts, worlds, classes, signals = [], [], [], []
    for label in FOOT_LABELS:
        world = feet[label].copy()
        in_contact = True
        if probe_world is not None and label == probe_world[0]:
            world = np.array(probe_world[1], dtype=float)
        offset = quat_rotate(quat_conjugate(pose.quat), world - pose.position)
        if noise.outlier_prob > 0.0 and rng.random() < noise.outlier_prob:
            offset = offset.copy()
            offset[2] += noise.outlier_shift * (1.0 if rng.random() < 0.5 else -1.0)
        class_id = UNKNOWN_CLASS
        signal = None
        if maps.class_grid is not None:
            class_id = class_at(maps.class_grid, world[:2])
            if class_id != UNKNOWN_CLASS and synth_signals:
                signal = synth_force_signal(class_id, sample_signal_length(rng), rng)
        contacts.append(ContactMeasurement(FootOffset(label, offset), in_contact=in_contact))
        worlds.append(world)
        classes.append(class_id)
        signals.append(signal)

    return StepRecord(
        k=k,
        timestamp=k * gait.dt,
        true_pose=pose,
        odom_increment=odom,
        odom_cov_diag=noise.white_array() ** 2,
        contacts=contacts,
        true_foot_world=np.array(worlds),
        true_class_ids=np.array(classes, dtype=np.uint8),
        signals=signals,
    )


def simulate_walk(
    maps: MapSet,
    waypoints,
    gait: GaitParams = GaitParams(),
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    n_steps: int | None = None,
    synth_signals: bool = True,
) -> WalkLog:
    """Walk the waypoint polyline and log every four-support phase."""
    rng = np.random.default_rng(seed)
    pts, yaws = _path_samples(waypoints, gait.step_length)
    if n_steps is not None:
        if n_steps + 1 > len(pts):
            raise ValueError(f"path supports at most {len(pts) - 1} steps, requested {n_steps}")
        pts, yaws = pts[: n_steps + 1], yaws[: n_steps + 1]

    start = _base_pose(maps, pts[0], yaws[0], gait)
    feet = {}
    for label in FOOT_LABELS:
        placed = _place_foot(maps, start, label, gait)
        if placed is None:
            raise ValueError(f"foot {label} starts off the map")
        feet[label] = placed

    records = []
    prev = start
    for k in range(1, len(pts)):
        pose = _base_pose(maps, pts[k], yaws[k], gait)
        swing = GAIT_ORDER[(k - 1) % 4]
        placed = _place_foot(maps, pose, swing, gait)
        if placed is not None:
            feet[swing] = placed
        records.append(_record_step(maps, k, pose, prev, feet, noise, gait, rng, synth_signals))
        prev = pose

    return WalkLog(start_pose=start, init_prior=start, records=records)


def probe_scenario(
    maps: MapSet,
    layout: WallRoomLayout = WallRoomLayout(),
    gait: GaitParams = GaitParams(),
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    start_xy: tuple = (1.4, 0.2),
    walk_length: float = 2.0,
    probe_reach: float = 0.8,
    probe_height: float = 0.3,
    prior_offset: tuple = (0.10, 0.10, 0.0),
) -> WalkLog:
    """Lateral wall-probing walk: side-steps toward the side wall, facing the
    front wall, with the RF leg alternating front and side probes.

    The filter prior is the true start pose shifted by prior_offset in world
    coordinates, so the scripted contacts must pull the estimate back.
    """
    rng = np.random.default_rng(seed)
    n = int(round(walk_length / gait.step_length))
    start = _base_pose(maps, np.asarray(start_xy, dtype=float), 0.0, gait)
    feet = {label: _place_foot(maps, start, label, gait) for label in FOOT_LABELS}
    if any(v is None for v in feet.values()):
        raise ValueError("a foot starts off the map")

    records = []
    prev = start
    for k in range(1, n + 1):
        xy = np.array([start_xy[0], start_xy[1] - k * gait.step_length])
        pose = _base_pose(maps, xy, 0.0, gait)
        swing = GAIT_ORDER[(k - 1) % 4]
        placed = _place_foot(maps, pose, swing, gait)
        if placed is not None:
            feet[swing] = placed

        probe = None
        if k % 2 == 1:
            target = np.array([layout.wall_x, pose.position[1] - gait.foot_dy, probe_height])
        else:
            target = np.array([pose.position[0] + gait.foot_dx, layout.wall_y, probe_height])
        if np.linalg.norm(target - pose.position) <= probe_reach:
            probe = ("RF", target)

        records.append(_record_step(maps, k, pose, prev, feet, noise, gait, rng, False, probe_world=probe))
        prev = pose

    prior = Pose(start.position + np.asarray(prior_offset, dtype=float), start.quat)
    return WalkLog(start_pose=start, init_prior=prior, records=records)


def classify_log(log: WalkLog, model) -> WalkLog:
    """Fill contact class probabilities from the baseline classifier, in place."""
    for rec in log.records:
        for contact, signal in zip(rec.contacts, rec.signals):
            if signal is not None:
                contact.class_probs = baseline_predict(model, signal)
    return log


def one_hot_log(log: WalkLog, n_classes: int = N_TERRAIN_CLASSES) -> WalkLog:
    """Fill contact class probabilities from the logged true classes, in place."""
    for rec in log.records:
        for contact, cid in zip(rec.contacts, rec.true_class_ids):
            if cid != UNKNOWN_CLASS:
                probs = np.zeros(n_classes)
                probs[int(cid)] = 1.0
                contact.class_probs = probs
    return log


_POSE_COLS = ("x", "y", "z", "qx", "qy", "qz", "qw")


def _walklog_header() -> str:
    cols = ["k", "t"]
    cols += [f"true_{c}" for c in _POSE_COLS]
    cols += [f"odo_{c}" for c in _POSE_COLS]
    cols += ["cov_x", "cov_y", "cov_z", "cov_roll", "cov_pitch", "cov_yaw"]
    for label in FOOT_LABELS:
        cols += [
            f"{label}_off_x",
            f"{label}_off_y",
            f"{label}_off_z",
            f"{label}_contact",
            f"{label}_world_z",
            f"{label}_class",
            f"{label}_signal",
        ]
    return ",".join(cols)


def _write_walklog(log: WalkLog, f, signal_refs=None) -> None:
    g = lambda v: format(v, ".17g")
    f.write("# walklog 1\n")
    f.write("# start_pose " + " ".join(g(v) for v in log.start_pose.to_array()) + "\n")
    f.write("# init_prior " + " ".join(g(v) for v in log.init_prior.to_array()) + "\n")
    f.write(_walklog_header() + "\n")
    for i, r in enumerate(log.records):
        row = [str(r.k), g(r.timestamp)]
        row += [g(v) for v in r.true_pose.to_array()]
        row += [g(v) for v in r.odom_increment.to_array()]
        row += [g(v) for v in r.odom_cov_diag]
        for j, contact in enumerate(r.contacts):
            row += [g(v) for v in contact.foot.vec]
            row.append("1" if contact.in_contact else "0")
            row.append(g(r.true_foot_world[j, 2]))
            row.append(str(int(r.true_class_ids[j])))
            row.append(signal_refs[i][j] if signal_refs else "")
        f.write(",".join(row) + "\n")


def save_walklog(log: WalkLog, path, signals_dir: str | None = None) -> None:
    """Write the walk log CSV; signals go to companion per-step CSV files when
    signals_dir is given (stored relative to the log)."""
    refs = None
    base = os.path.dirname(os.path.abspath(path))
    if signals_dir is not None:
        os.makedirs(os.path.join(base, signals_dir), exist_ok=True)
        refs = []
        for r in log.records:
            row = []
            for label, signal in zip(FOOT_LABELS, r.signals):
                if signal is None:
                    row.append("")
                    continue
                rel = os.path.join(signals_dir, f"sig_{r.k:05d}_{label}.csv")
                save_signal(signal, os.path.join(base, rel))
                row.append(rel)
            refs.append(row)
    with open(path, "w") as f:
        _write_walklog(log, f, refs)


def walklog_hash(log: WalkLog) -> str:
    """Content hash of the canonical CSV serialization, signal files excluded."""
    buf = io.StringIO()
    _write_walklog(log, buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def save_signal(signal: StepSignal, path) -> None:
    with open(path, "w") as f:
        f.write("fx,fy,fz,tx,ty,tz\n")
        for row in signal.samples:
            f.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_signal(path) -> StepSignal:
    rows = []
    with open(path) as f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("fx,"):
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"{path}:{ln}: expected 6 channels, got {len(parts)}")
            rows.append([float(p) for p in parts])
    return StepSignal(np.array(rows))


def load_walklog(path, load_signals: bool = False) -> WalkLog:
    base = os.path.dirname(os.path.abspath(path))
    start = prior = None
    records = []
    with open(path) as f:
        lines = f.readlines()
    header_seen = False
    for ln, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("# start_pose"):
            start = Pose.from_array([float(v) for v in s.split()[2:]])
            continue
        if s.startswith("# init_prior"):
            prior = Pose.from_array([float(v) for v in s.split()[2:]])
            continue
        if s.startswith("#"):
            continue
        if not header_seen:
            if s != _walklog_header():
                raise ValueError(f"{path}:{ln}: unexpected walk log header")
            header_seen = True
            continue
        parts = s.split(",")
        expected = 22 + 7 * len(FOOT_LABELS)
        if len(parts) != expected:
            raise ValueError(f"{path}:{ln}: expected {expected} fields, got {len(parts)}")
        k = int(parts[0])
        t = float(parts[1])
        true_pose = Pose.from_array([float(v) for v in parts[2:9]])
        odom = Pose.from_array([float(v) for v in parts[9:16]])
        cov = np.array([float(v) for v in parts[16:22]])
        contacts, worlds, classes, signals = [], [], [], []
        for j, label in enumerate(FOOT_LABELS):
            o = 22 + 7 * j
            vec = np.array([float(v) for v in parts[o : o + 3]])
            in_contact = parts[o + 3] == "1"
            world_z = float(parts[o + 4])
            cid = int(parts[o + 5])
            ref = parts[o + 6]
            contacts.append(ContactMeasurement(FootOffset(label, vec), in_contact=in_contact))
            world = true_pose.position + quat_rotate(true_pose.quat, vec)
            worlds.append([world[0], world[1], world_z])
            classes.append(cid)
            sig = None
            if load_signals and ref:
                sig = load_signal(os.path.join(base, ref))
            signals.append(sig)
        records.append(
            StepRecord(k, t, true_pose, odom, cov, contacts, np.array(worlds), np.array(classes, dtype=np.uint8), signals)
        )
    if start is None or prior is None or not header_seen:
        raise ValueError(f"{path}: missing walk log header lines")
    return WalkLog(start_pose=start, init_prior=prior, records=records)

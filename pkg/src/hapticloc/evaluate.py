"""Trajectory evaluation and end-to-end experiment runs.

ATE here is the mean norm of the translational part of T_true^-1 T_est over
all poses, with no alignment step: estimates are judged in the map frame the
filter localizes in.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import LogisticBaseline, baseline_train
from .geometry import Pose, quat_conjugate, quat_rotate, quat_yaw, save_trajectory, wrap_angle
from .likelihood import LikelihoodConfig
from .maps import MapSet
from .mcl import FilterState, StepInput, run_filter, write_diagnostics_csv
from .sim import (
    N_TERRAIN_CLASSES,
    CourseSpec,
    GaitParams,
    NoiseSpec,
    WalkLog,
    classify_log,
    generate_course,
    one_hot_log,
    probe_scenario,
    sample_signal_length,
    simulate_walk,
    synth_force_signal,
    walklog_hash,
)

MODES = ("odom-only", "HL-G", "HL-GC", "HL-C", "HL-3D")

_MODE_NEEDS = {
    "HL-G": ("elevation",),
    "HL-GC": ("elevation", "class"),
    "HL-C": ("class",),
    "HL-3D": ("cloud",),
}


def ate(truth, est) -> float:
    """Mean translational error of T_true^-1 T_est, no alignment, metres."""
    truth, est = list(truth), list(est)
    if len(truth) != len(est):
        raise ValueError(f"trajectory length mismatch: {len(truth)} truth vs {len(est)} estimated")
    if not truth:
        raise ValueError("cannot evaluate empty trajectories")
    tp = np.stack([p.position for p in truth])
    ep = np.stack([p.position for p in est])
    tq = np.stack([p.quat for p in truth])
    rel = quat_rotate(quat_conjugate(tq), ep - tp)
    return float(np.mean(np.linalg.norm(rel, axis=1)))


def per_step_errors(truth, est) -> np.ndarray:
    """World-frame error components per pose: columns x, y, z, yaw."""
    truth, est = list(truth), list(est)
    if len(truth) != len(est):
        raise ValueError("trajectory length mismatch")
    tp = np.stack([p.position for p in truth])
    ep = np.stack([p.position for p in est])
    dyaw = wrap_angle(
        np.array([quat_yaw(e.quat) - quat_yaw(t.quat) for t, e in zip(truth, est)])
    )
    return np.column_stack([ep - tp, dyaw])


def to_step_inputs(log: WalkLog, cov_scale: float = 1.0) -> list:
    s2 = cov_scale**2
    return [StepInput(r.odom_increment, np.diag(s2 * r.odom_cov_diag), r.contacts) for r in log.records]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; every field has a working default."""

    name: str
    course: CourseSpec
    scenario: str  # "waypoints" or "wall-probe"
    waypoints: tuple | None
    gait: GaitParams = GaitParams()
    noise: NoiseSpec = NoiseSpec()
    likelihood: LikelihoodConfig = LikelihoodConfig()
    modes: tuple = ("HL-G",)
    seeds: tuple = (1, 2, 3, 4, 5)
    n_particles: int = 500
    resample_frac: float = 0.5
    xy_std_threshold: float = 0.10
    prior_std_xyz: float = 0.12
    # standing height is known well; a loose z prior just starves the first
    # contact update of effective particles
    prior_std_z: float = 0.02
    prior_std_rot: float = 0.02
    prior_std_yaw: float = 0.05
    # the filter's process noise is the odometry covariance scaled up: the
    # injected bias is deliberately absent from the reported covariance
    cov_scale: float = 1.5
    train_per_class: int = 150
    use_classifier: bool = True

    def __post_init__(self):
        if self.scenario not in ("waypoints", "wall-probe"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "waypoints" and self.waypoints is None:
            raise ValueError("waypoint scenario needs waypoints")
        if self.scenario == "wall-probe" and self.course.kind != "wall-room":
            raise ValueError("wall-probe scenario requires the wall-room course")
        has = {"elevation"}
        if self.course.kind == "class-tiles":
            has.add("class")
        if self.course.kind == "wall-room":
            has.add("cloud")
        for mode in self.modes:
            if mode == "odom-only":
                continue
            needs = _MODE_NEEDS.get(mode)
            if needs is None:
                raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
            missing = [l for l in needs if l not in has]
            if missing:
                raise ValueError(f"mode {mode} needs map layers {missing} absent from course {self.course.kind}")

    def prior_cov(self) -> np.ndarray:
        return np.diag(
            [
                self.prior_std_xyz**2,
                self.prior_std_xyz**2,
                self.prior_std_z**2,
                self.prior_std_rot**2,
                self.prior_std_rot**2,
                self.prior_std_yaw**2,
            ]
        )


# both long legs cross the feature strip so drift never builds for long
CHEVRON_WAYPOINTS = (
    (1.0, 0.7),
    (6.2, 0.7),
    (6.2, 1.3),
    (1.0, 1.3),
    (1.0, 0.7),
    (6.2, 0.7),
    (6.2, 1.3),
    (1.0, 1.3),
)

TILES_WAYPOINTS = (
    (0.6, 0.6),
    (6.4, 0.6),
    (6.4, 1.75),
    (0.6, 1.75),
    (0.6, 2.9),
    (6.4, 2.9),
    (6.4, 1.75),
    (0.6, 1.75),
)


def default_chevron_experiment(seeds=(1, 2, 3, 4, 5)) -> ExperimentConfig:
    """Uneven-terrain loop with drifting odometry; geometry-only localization."""
    return ExperimentConfig(
        name="chevron",
        course=CourseSpec("chevron-ramp"),
        scenario="waypoints",
        waypoints=CHEVRON_WAYPOINTS,
        noise=NoiseSpec(
            white_std=(0.004, 0.004, 0.003, 0.0004, 0.0004, 0.002),
            z_bias=0.0015,
            yaw_bias=0.0003,
        ),
        modes=("HL-G",),
        seeds=tuple(seeds),
    )


def default_tiles_experiment(seeds=(1, 2, 3, 4, 5)) -> ExperimentConfig:
    """Material-tile field: geometry, geometry+class, and class-only modes."""
    return ExperimentConfig(
        name="class-tiles",
        course=CourseSpec("class-tiles"),
        scenario="waypoints",
        waypoints=TILES_WAYPOINTS,
        noise=NoiseSpec(
            white_std=(0.004, 0.004, 0.003, 0.0004, 0.0004, 0.002),
            z_bias=0.0015,
            yaw_bias=0.0006,
        ),
        modes=("HL-G", "HL-GC", "HL-C"),
        seeds=tuple(seeds),
    )


def default_wallroom_experiment(seeds=(1, 2, 3, 4, 5)) -> ExperimentConfig:
    """Flat room with two walls, offset prior, scripted probing; 3D cloud mode."""
    return ExperimentConfig(
        name="wall-room",
        course=CourseSpec("wall-room"),
        scenario="wall-probe",
        waypoints=None,
        noise=NoiseSpec(white_std=(0.005, 0.005, 0.002, 0.0003, 0.0003, 0.001)),
        modes=("HL-3D",),
        seeds=tuple(seeds),
    )


def make_training_set(per_class: int, seed: int, noise_scale: float = 1.0):
    """Labeled synthetic signals covering every class, deterministic in seed."""
    rng = np.random.default_rng(seed)
    signals, labels = [], []
    for c in range(N_TERRAIN_CLASSES):
        for _ in range(per_class):
            signals.append(synth_force_signal(c, sample_signal_length(rng), rng, noise_scale))
            labels.append(c)
    return signals, labels


def train_contact_classifier(seed: int, per_class: int = 150) -> LogisticBaseline:
    signals, labels = make_training_set(per_class, seed)
    return baseline_train(signals, labels, n_classes=N_TERRAIN_CLASSES, seed=seed)


def simulate_for_config(cfg: ExperimentConfig, seed: int):
    """Course + walk log for one seed of an experiment."""
    course = generate_course(replace(cfg.course, seed=seed))
    needs_class = any(m in ("HL-GC", "HL-C") for m in cfg.modes)
    if cfg.scenario == "wall-probe":
        log = probe_scenario(course, cfg.course.wall_room, cfg.gait, cfg.noise, seed)
    else:
        log = simulate_walk(
            course, cfg.waypoints, cfg.gait, cfg.noise, seed, synth_signals=needs_class and cfg.use_classifier
        )
    if needs_class:
        if cfg.use_classifier:
            model = train_contact_classifier(seed=seed + 10_000, per_class=cfg.train_per_class)
            classify_log(log, model)
        else:
            one_hot_log(log)
    return course, log


def run_localization(
    log: WalkLog,
    maps: MapSet,
    mode: str,
    cfg: LikelihoodConfig = LikelihoodConfig(),
    n_particles: int = 500,
    seed: int = 0,
    prior_cov=None,
    resample_frac: float = 0.5,
    xy_std_threshold: float = 0.10,
    cov_scale: float = 1.5,
) -> FilterState:
    """Run one filter mode over a walk log, starting from the log's prior."""
    if prior_cov is None:
        prior_cov = np.diag([0.0144, 0.0144, 0.0004, 0.0004, 0.0004, 0.0025])
    return run_filter(
        log.init_prior,
        prior_cov,
        to_step_inputs(log, cov_scale),
        maps,
        cfg,
        mode=mode,
        n_particles=n_particles,
        seed=seed,
        resample_frac=resample_frac,
        xy_std_threshold=xy_std_threshold,
    )


@dataclass
class ReportRow:
    mode: str
    seed: str
    ate_m: float
    improvement_pct: float


@dataclass
class EvalReport:
    name: str
    rows: list = field(default_factory=list)
    walklog_hashes: dict = field(default_factory=dict)

    def mean_ate(self, mode: str) -> float:
        vals = [r.ate_m for r in self.rows if r.mode == mode and r.seed != "mean"]
        if not vals:
            raise KeyError(f"no rows for mode {mode}")
        return float(np.mean(vals))


def write_report(report: EvalReport, path) -> None:
    with open(path, "w") as f:
        f.write(f"# hapticloc report: {report.name}\n")
        for seed in sorted(report.walklog_hashes):
            f.write(f"# walklog seed={seed} sha256={report.walklog_hashes[seed]}\n")
        f.write("mode,seed,ate_m,improvement_pct\n")
        for r in report.rows:
            f.write(f"{r.mode},{r.seed},{r.ate_m:.6f},{r.improvement_pct:.6f}\n")


def _write_per_seed_outputs(out_dir, seed, log, results):
    d = os.path.join(out_dir, f"seed_{seed}")
    os.makedirs(d, exist_ok=True)
    times = log.timestamps()
    truth = log.true_poses()
    save_trajectory(os.path.join(d, "truth.traj"), truth, times)
    for mode, traj, state in results:
        save_trajectory(os.path.join(d, f"{mode}.traj"), traj, times)
        errs = per_step_errors(truth, traj)
        with open(os.path.join(d, f"errors_{mode}.csv"), "w") as f:
            f.write("k,err_x,err_y,err_z,err_yaw\n")
            for k, row in enumerate(errs):
                f.write(f"{k}," + ",".join(format(v, ".9g") for v in row) + "\n")
        if state is not None:
            write_diagnostics_csv(state, os.path.join(d, f"diagnostics_{mode}.csv"))


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> EvalReport:
    """Simulate, localize in every configured mode, and score each seed.

    Odometry-only dead reckoning is always evaluated as the baseline that
    improvement percentages refer to.
    """
    report = EvalReport(name=cfg.name)
    per_mode = {m: [] for m in cfg.modes}
    odom_ates = []
    for seed in cfg.seeds:
        course, log = simulate_for_config(cfg, seed)
        report.walklog_hashes[seed] = walklog_hash(log)
        truth = log.true_poses()
        odom_traj = log.odometry_poses()
        ate_odom = ate(truth, odom_traj)
        odom_ates.append(ate_odom)
        report.rows.append(ReportRow("odom-only", str(seed), ate_odom, 0.0))
        results = [("odom-only", odom_traj, None)]
        for mode in cfg.modes:
            state = run_localization(
                log,
                course,
                mode,
                cfg.likelihood,
                n_particles=cfg.n_particles,
                seed=seed,
                prior_cov=cfg.prior_cov(),
                resample_frac=cfg.resample_frac,
                xy_std_threshold=cfg.xy_std_threshold,
                cov_scale=cfg.cov_scale,
            )
            a = ate(truth, state.trajectory)
            per_mode[mode].append(a)
            report.rows.append(ReportRow(mode, str(seed), a, 100.0 * (ate_odom - a) / ate_odom))
            results.append((mode, state.trajectory, state))
        if out_dir is not None:
            _write_per_seed_outputs(out_dir, seed, log, results)

    mean_odom = float(np.mean(odom_ates))
    report.rows.append(ReportRow("odom-only", "mean", mean_odom, 0.0))
    for mode in cfg.modes:
        mean_mode = float(np.mean(per_mode[mode]))
        report.rows.append(ReportRow(mode, "mean", mean_mode, 100.0 * (mean_odom - mean_mode) / mean_odom))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_report(report, os.path.join(out_dir, "report.csv"))
    return report


_DEFAULT_BUILDERS = {
    "chevron-ramp": default_chevron_experiment,
    "class-tiles": default_tiles_experiment,
    "wall-room": default_wallroom_experiment,
}


def load_experiment_config(path):
    """Parse an INI experiment file; unset keys keep the course's defaults.

    Returns (ExperimentConfig, out_dir or None).
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValueError(f"cannot read config file {path}")
    if "experiment" not in cp or "kind" not in cp["experiment"]:
        raise ValueError(f"{path}: config needs an [experiment] section with a 'kind' key")
    exp = cp["experiment"]
    kind = exp["kind"]
    if kind not in _DEFAULT_BUILDERS:
        raise ValueError(f"{path}: unknown course kind {kind!r}")
    cfg = _DEFAULT_BUILDERS[kind]()

    updates = {}
    if "name" in exp:
        updates["name"] = exp["name"]
    if "seeds" in exp:
        updates["seeds"] = tuple(int(s) for s in exp["seeds"].split())
    if "modes" in exp:
        updates["modes"] = tuple(exp["modes"].split())
    if "particles" in exp:
        updates["n_particles"] = int(exp["particles"])

    if "course" in cp:
        sec = cp["course"]
        course = cfg.course
        if "resolution" in sec:
            course = replace(course, resolution=float(sec["resolution"]))
        updates["course"] = course
    if "walk" in cp:
        sec = cp["walk"]
        if "waypoints" in sec:
            pairs = [p.split(",") for p in sec["waypoints"].split()]
            updates["waypoints"] = tuple((float(a), float(b)) for a, b in pairs)
        gait = cfg.gait
        for key, fld in (("step_length", "step_length"), ("standing_height", "standing_height")):
            if key in sec:
                gait = replace(gait, **{fld: float(sec[key])})
        updates["gait"] = gait
    if "noise" in cp:
        sec = cp["noise"]
        noise = cfg.noise
        if "white_std" in sec:
            noise = replace(noise, white_std=tuple(float(v) for v in sec["white_std"].split()))
        for key in ("z_bias", "yaw_bias", "outlier_prob"):
            if key in sec:
                noise = replace(noise, **{key: float(sec[key])})
        updates["noise"] = noise
    if "filter" in cp:
        sec = cp["filter"]
        lik = cfg.likelihood
        if "sigma_z" in sec or "sigma_c" in sec:
            lik = LikelihoodConfig(
                sigma_z=float(sec.get("sigma_z", lik.sigma_z)),
                sigma_c=float(sec.get("sigma_c", lik.sigma_c)),
            )
        updates["likelihood"] = lik
        if "particles" in sec:
            updates["n_particles"] = int(sec["particles"])
        if "resample_frac" in sec:
            updates["resample_frac"] = float(sec["resample_frac"])
        if "xy_std_threshold" in sec:
            updates["xy_std_threshold"] = float(sec["xy_std_threshold"])
        if "prior_std_xyz" in sec:
            updates["prior_std_xyz"] = float(sec["prior_std_xyz"])

    out_dir = exp.get("out", None)
    return replace(cfg, **updates), out_dir

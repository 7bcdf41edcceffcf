"""Command-line front end.

Subcommands: make-course, simulate, localize, eval, classify, run-experiment.
A course directory holds course.hmap plus course.cmap / course.xyz when the
course has those layers. Failures print one `error: ...` line on stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import evaluate, sim
from .classifier import load_baseline
from .geometry import load_trajectory, save_trajectory
from .likelihood import LikelihoodConfig
from .maps import MapSet, load_map, save_map
from .mcl import write_diagnostics_csv
from .network import forward, load_weights
from .sim import CourseSpec, GaitParams, NoiseSpec, WallRoomLayout


def save_course_dir(maps: MapSet, out_dir) -> list:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    save_map(maps.elevation, os.path.join(out_dir, "course.hmap"))
    written.append(os.path.join(out_dir, "course.hmap"))
    if maps.class_grid is not None:
        save_map(maps.class_grid, os.path.join(out_dir, "course.cmap"))
        written.append(os.path.join(out_dir, "course.cmap"))
    if maps.cloud is not None:
        save_map(maps.cloud, os.path.join(out_dir, "course.xyz"))
        written.append(os.path.join(out_dir, "course.xyz"))
    return written


def load_course_dir(path) -> MapSet:
    hmap = os.path.join(path, "course.hmap")
    if not os.path.isfile(hmap):
        raise FileNotFoundError(f"no course.hmap in {path}")
    elevation = load_map(hmap)
    class_grid = cloud = None
    cmap = os.path.join(path, "course.cmap")
    if os.path.isfile(cmap):
        class_grid = load_map(cmap)
    xyz = os.path.join(path, "course.xyz")
    if os.path.isfile(xyz):
        cloud = load_map(xyz)
    return MapSet(elevation, class_grid=class_grid, cloud=cloud)


def _parse_waypoints(text):
    pairs = [p.split(",") for p in text.split()]
    try:
        return tuple((float(a), float(b)) for a, b in pairs)
    except ValueError as e:
        raise ValueError(f"bad waypoint list {text!r}: expected 'x,y x,y ...'") from e


def _cmd_make_course(args) -> int:
    spec = CourseSpec(args.kind, resolution=args.resolution, seed=args.seed)
    course = sim.generate_course(spec)
    for path in save_course_dir(course, args.out):
        print(path)
    return 0


def _cmd_simulate(args) -> int:
    course = load_course_dir(args.course)
    gait, noise = GaitParams(), NoiseSpec()
    if args.scenario == "wall-probe":
        if course.cloud is None:
            raise ValueError("wall-probe scenario needs a course with a point cloud layer")
        log = sim.probe_scenario(course, WallRoomLayout(), gait, noise, args.seed)
    else:
        if args.waypoints:
            waypoints = _parse_waypoints(args.waypoints)
        elif course.class_grid is not None:
            waypoints = evaluate.TILES_WAYPOINTS
        else:
            waypoints = evaluate.CHEVRON_WAYPOINTS
        log = sim.simulate_walk(
            course, waypoints, gait, noise, args.seed, synth_signals=course.class_grid is not None
        )
    signals_dir = "signals" if any(s is not None for r in log.records for s in r.signals) else None
    sim.save_walklog(log, args.out, signals_dir=signals_dir)
    print(args.out)
    print(f"steps={log.n_steps} sha256={sim.walklog_hash(log)}")
    return 0


def _cmd_localize(args) -> int:
    course = load_course_dir(args.course)
    needs_class = args.mode in ("HL-GC", "HL-C")
    log = sim.load_walklog(args.walklog, load_signals=needs_class and args.baseline is not None)
    if needs_class:
        if args.baseline is not None:
            sim.classify_log(log, load_baseline(args.baseline))
        else:
            sim.one_hot_log(log)
    state = evaluate.run_localization(
        log, course, args.mode, LikelihoodConfig(), n_particles=args.particles, seed=args.seed
    )
    os.makedirs(args.out, exist_ok=True)
    save_trajectory(os.path.join(args.out, "estimate.traj"), state.trajectory, log.timestamps())
    write_diagnostics_csv(state, os.path.join(args.out, "diagnostics.csv"))
    a = evaluate.ate(log.true_poses(), state.trajectory)
    p = state.trajectory[-1].position
    print(f"final=({p[0]:.4f}, {p[1]:.4f}, {p[2]:.4f}) ate={a:.6f}")
    return 0


def _cmd_eval(args) -> int:
    _, truth = load_trajectory(args.truth)
    _, est = load_trajectory(args.est)
    print(f"{evaluate.ate(truth, est):.6f}")
    return 0


def _cmd_classify(args) -> int:
    net = load_weights(args.weights)
    signal = sim.load_signal(args.signal)
    probs = forward(net, signal.samples)
    print(" ".join(format(p, ".9f") for p in probs))
    return 0


def _cmd_run_experiment(args) -> int:
    cfg, out_dir = evaluate.load_experiment_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.particles is not None:
        cfg = replace(cfg, n_particles=args.particles)
    if args.out is not None:
        out_dir = args.out
    if out_dir is None:
        out_dir = os.path.join("runs", cfg.name)
    report = evaluate.run_experiment(cfg, out_dir)
    print(f"report: {os.path.join(out_dir, 'report.csv')}")
    for row in report.rows:
        if row.seed == "mean":
            print(f"{row.mode:>10s}  ate={row.ate_m:.4f} m  improvement={row.improvement_pct:+.1f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hapticloc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-course", help="generate a synthetic course into a directory")
    p.add_argument("--kind", required=True, choices=sim.COURSE_KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_make_course)

    p = sub.add_parser("simulate", help="walk a course and write the log")
    p.add_argument("--course", required=True, help="course directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="walk log csv path")
    p.add_argument("--waypoints", help="override path: 'x,y x,y ...'")
    p.add_argument("--scenario", choices=("walk", "wall-probe"), default="walk")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("localize", help="run the particle filter over a walk log")
    p.add_argument("--course", required=True)
    p.add_argument("--walklog", required=True)
    p.add_argument("--mode", default="HL-G", choices=tuple(m for m in evaluate.MODES if m != "odom-only"))
    p.add_argument("--particles", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", help="trained baseline classifier json for class modes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("eval", help="mean translational error between two trajectories")
    p.add_argument("--truth", required=True)
    p.add_argument("--est", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("classify", help="run the contact network on one signal file")
    p.add_argument("--weights", required=True, help="network weights file")
    p.add_argument("--signal", required=True, help="signal csv")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("run-experiment", help="full multi-seed experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
    p.add_argument("--particles", type=int)
    p.add_argument("--out", help="output directory (overrides config)")
    p.set_defaults(func=_cmd_run_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

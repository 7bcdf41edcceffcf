"""Course generation, gait simulation, walk log round trips."""

import numpy as np
import pytest

from hapticloc.geometry import FOOT_LABELS, Pose, quat_rotate
from hapticloc.maps import UNKNOWN_CLASS, elevation_at
from hapticloc.sim import (
    CHEVRON_HEIGHT,
    CHEVRON_RAMP_DEG,
    CHEVRON_STRIP_Y,
    N_TERRAIN_CLASSES,
    SIGNAL_LENGTH_RANGE,
    TILES_PLATFORM_H,
    CourseSpec,
    GaitParams,
    NoiseSpec,
    WallRoomLayout,
    classify_log,
    generate_course,
    load_signal,
    load_walklog,
    one_hot_log,
    probe_scenario,
    sample_signal_length,
    save_signal,
    save_walklog,
    simulate_walk,
    synth_force_signal,
    walklog_hash,
)

WAYPOINTS = ((1.0, 0.7), (6.2, 0.7), (6.2, 1.3), (1.0, 1.3))


def test_course_spec_validation():
    with pytest.raises(ValueError):
        CourseSpec("mystery-maze")
    with pytest.raises(ValueError):
        CourseSpec("chevron-ramp", resolution=0.0)


def test_courses_deterministic_in_seed():
    for kind in ("chevron-ramp", "class-tiles"):
        a = generate_course(CourseSpec(kind, seed=4))
        b = generate_course(CourseSpec(kind, seed=4))
        c = generate_course(CourseSpec(kind, seed=5))
        assert np.array_equal(a.elevation.heights, b.elevation.heights)
        if kind == "class-tiles":
            assert np.array_equal(a.class_grid.class_ids, b.class_grid.class_ids)
            assert not np.array_equal(a.class_grid.class_ids, c.class_grid.class_ids)
        else:
            assert not np.array_equal(a.elevation.heights, c.elevation.heights)


def test_chevron_course_geometry():
    maps = generate_course(CourseSpec("chevron-ramp", seed=0))
    h = maps.elevation.heights
    assert maps.class_grid is None and maps.cloud is None
    assert np.all(np.isfinite(h))
    assert h.min() == 0.0
    plateau = np.tan(np.radians(CHEVRON_RAMP_DEG))
    tilt_max = 0.025 * (CHEVRON_STRIP_Y[1] - CHEVRON_STRIP_Y[0])
    assert h.max() <= plateau + tilt_max + CHEVRON_HEIGHT + 0.10 + 1e-9
    # approach corridor in front of the strip stays flat
    ys = int(0.7 / 0.05)
    assert np.all(h[:, : int(1.5 / 0.05)][ys] == 0.0)


def test_tiles_course_uses_every_class_and_exact_platform_height():
    maps = generate_course(CourseSpec("class-tiles", seed=3))
    ids = maps.class_grid.class_ids
    assert set(np.unique(ids)) == set(range(N_TERRAIN_CLASSES))
    assert maps.elevation.heights.max() == TILES_PLATFORM_H  # exact, not approx
    assert maps.class_grid.n_classes == N_TERRAIN_CLASSES


def test_wall_room_cloud_geometry():
    lay = WallRoomLayout()
    maps = generate_course(CourseSpec("wall-room", seed=0))
    assert np.all(maps.elevation.heights == 0.0)
    pts = maps.cloud.points
    floor = pts[pts[:, 2] == 0.0]
    front = pts[pts[:, 0] == lay.wall_x]
    side = pts[pts[:, 1] == lay.wall_y]
    assert len(floor) and len(front) and len(side)
    assert len(floor) + len(front) + len(side) >= len(pts)
    assert front[:, 2].max() == pytest.approx(lay.wall_height)
    assert front[:, 2].min() > 0.0
    assert side[:, 2].max() == pytest.approx(lay.wall_height)


def test_signal_length_range_and_synthesis():
    rng = np.random.default_rng(0)
    lo, hi = SIGNAL_LENGTH_RANGE
    lengths = {sample_signal_length(rng) for _ in range(500)}
    assert min(lengths) >= lo and max(lengths) <= hi
    assert lo in lengths and hi in lengths
    a = synth_force_signal(3, 50, np.random.default_rng(9))
    b = synth_force_signal(3, 50, np.random.default_rng(9))
    assert np.array_equal(a.samples, b.samples)
    tpl = synth_force_signal(3, 50, np.random.default_rng(1), noise_scale=0.0)
    tpl2 = synth_force_signal(3, 50, np.random.default_rng(2), noise_scale=0.0)
    assert np.array_equal(tpl.samples, tpl2.samples)
    with pytest.raises(ValueError):
        synth_force_signal(8, 50, rng)
    with pytest.raises(ValueError):
        synth_force_signal(0, 0, rng)


def test_signal_file_round_trip(tmp_path):
    sig = synth_force_signal(5, 33, np.random.default_rng(4))
    p = tmp_path / "s.csv"
    save_signal(sig, p)
    loaded = load_signal(p)
    assert np.array_equal(loaded.samples, sig.samples)
    p.write_text("fx,fy,fz,tx,ty,tz\n1,2,3\n")
    with pytest.raises(ValueError, match=":2"):
        load_signal(p)


def test_walk_foot_placement_matches_map_exactly():
    maps = generate_course(CourseSpec("chevron-ramp", seed=1))
    log = simulate_walk(maps, WAYPOINTS, seed=0, n_steps=40)
    assert log.n_steps == 40
    for r in log.records:
        for w in r.true_foot_world:
            assert w[2] == elevation_at(maps.elevation, w[:2])  # exact lookup
        # body-frame offsets reconstruct the same world points
        for contact, w in zip(r.contacts, r.true_foot_world):
            back = r.true_pose.position + quat_rotate(r.true_pose.quat, contact.foot.vec)
            assert np.allclose(back, w, atol=1e-12)


def test_noise_free_odometry_reproduces_truth():
    maps = generate_course(CourseSpec("chevron-ramp", seed=1))
    log = simulate_walk(maps, WAYPOINTS, seed=0, n_steps=30, noise=NoiseSpec())
    odo = log.odometry_poses(start=log.start_pose)
    for a, b in zip(odo, log.true_poses()):
        assert np.allclose(a.to_array(), b.to_array(), atol=1e-10)


def test_z_bias_accumulates_in_odometry():
    maps = generate_course(CourseSpec("chevron-ramp", seed=1))
    n = 30
    log = simulate_walk(maps, WAYPOINTS, seed=0, n_steps=n, noise=NoiseSpec(z_bias=0.01))
    odo = log.odometry_poses(start=log.start_pose)
    drift = odo[-1].position[2] - log.true_poses()[-1].position[2]
    assert drift == pytest.approx(0.01 * n, abs=1e-6)


def test_walk_step_metadata():
    maps = generate_course(CourseSpec("chevron-ramp", seed=1))
    gait = GaitParams()
    noise = NoiseSpec(white_std=(0.003,) * 6)
    log = simulate_walk(maps, WAYPOINTS, gait=gait, noise=noise, seed=2, n_steps=12)
    for i, r in enumerate(log.records):
        assert r.k == i + 1
        assert r.timestamp == r.k * gait.dt
        assert np.array_equal(r.odom_cov_diag, np.full(6, 0.003**2))
        assert all(c.in_contact for c in r.contacts)
        assert np.all(r.true_class_ids == UNKNOWN_CLASS)  # no class layer here


def test_walk_truncation_and_path_errors():
    maps = generate_course(CourseSpec("chevron-ramp", seed=1))
    with pytest.raises(ValueError, match="supports at most"):
        simulate_walk(maps, WAYPOINTS, n_steps=100000)
    with pytest.raises(ValueError, match="leaves the map"):
        simulate_walk(maps, ((1.0, 0.7), (50.0, 0.7)))
    with pytest.raises(ValueError):
        simulate_walk(maps, ((1.0, 0.7),))
    with pytest.raises(ValueError, match="duplicate"):
        simulate_walk(maps, ((1.0, 0.7), (1.0, 0.7), (2.0, 0.7)))


def test_walklog_hash_depends_on_seed_and_noise():
    maps = generate_course(CourseSpec("chevron-ramp", seed=1))
    noise = NoiseSpec(white_std=(0.004,) * 6)
    a = simulate_walk(maps, WAYPOINTS, noise=noise, seed=1, n_steps=15)
    b = simulate_walk(maps, WAYPOINTS, noise=noise, seed=1, n_steps=15)
    c = simulate_walk(maps, WAYPOINTS, noise=noise, seed=2, n_steps=15)
    assert walklog_hash(a) == walklog_hash(b)
    assert walklog_hash(a) != walklog_hash(c)


def test_walklog_round_trip_with_signals(tmp_path):
    maps = generate_course(CourseSpec("class-tiles", seed=2))
    noise = NoiseSpec(white_std=(0.004, 0.004, 0.003, 0.0004, 0.0004, 0.002), z_bias=0.0015)
    log = simulate_walk(maps, ((0.6, 0.6), (3.0, 0.6)), noise=noise, seed=3, n_steps=20)
    path = tmp_path / "walk.log"
    save_walklog(log, path, signals_dir="signals")
    loaded = load_walklog(path, load_signals=True)
    assert loaded.n_steps == log.n_steps
    assert np.array_equal(loaded.start_pose.to_array(), log.start_pose.to_array())
    assert np.array_equal(loaded.init_prior.to_array(), log.init_prior.to_array())
    for ro, rl in zip(log.records, loaded.records):
        assert rl.k == ro.k and rl.timestamp == ro.timestamp
        assert np.array_equal(rl.true_pose.to_array(), ro.true_pose.to_array())
        assert np.array_equal(rl.odom_increment.to_array(), ro.odom_increment.to_array())
        assert np.array_equal(rl.odom_cov_diag, ro.odom_cov_diag)
        assert np.array_equal(rl.true_class_ids, ro.true_class_ids)
        for co, cl, so, sl in zip(ro.contacts, rl.contacts, ro.signals, rl.signals):
            assert np.array_equal(cl.foot.vec, co.foot.vec)
            assert cl.in_contact == co.in_contact
            assert (so is None) == (sl is None)
            if so is not None:
                assert np.array_equal(sl.samples, so.samples)
    assert walklog_hash(loaded) == walklog_hash(log)


def test_load_walklog_errors(tmp_path):
    p = tmp_path / "bad.log"
    p.write_text("# walklog 1\nnot,a,header\n")
    with pytest.raises(ValueError, match="header"):
        load_walklog(p)
    p.write_text("")
    with pytest.raises(ValueError, match="missing"):
        load_walklog(p)


def test_probe_scenario_prior_offset_and_probes():
    maps = generate_course(CourseSpec("wall-room", seed=0))
    lay = WallRoomLayout()
    log = probe_scenario(maps, lay, seed=1, noise=NoiseSpec(white_std=(0.005,) * 6))
    shift = log.init_prior.position - log.start_pose.position
    assert np.allclose(shift, [0.10, 0.10, 0.0])
    assert np.array_equal(log.init_prior.quat, log.start_pose.quat)

    rf = FOOT_LABELS.index("RF")
    front_probes = side_probes = 0
    for r in log.records:
        w = r.true_foot_world[rf]
        if w[2] > 0.0:  # probing in the air, not standing on the floor
            assert w[2] == pytest.approx(0.3)
            if r.k % 2 == 1:
                assert w[0] == pytest.approx(lay.wall_x)
                front_probes += 1
            else:
                assert w[1] == pytest.approx(lay.wall_y)
                side_probes += 1
        others = [j for j in range(4) if j != rf]
        assert np.all(r.true_foot_world[others, 2] == 0.0)
    assert front_probes > 5
    assert side_probes > 0  # the side wall comes into reach late in the walk


def test_one_hot_and_classifier_probs():
    maps = generate_course(CourseSpec("class-tiles", seed=2))
    log = simulate_walk(maps, ((0.6, 0.6), (2.0, 0.6)), seed=3, n_steps=10)
    one_hot_log(log)
    for r in log.records:
        for contact, cid in zip(r.contacts, r.true_class_ids):
            if cid != UNKNOWN_CLASS:
                assert contact.class_probs is not None
                assert contact.class_probs[int(cid)] == 1.0
                assert contact.class_probs.sum() == 1.0

    from hapticloc.evaluate import train_contact_classifier

    log2 = simulate_walk(maps, ((0.6, 0.6), (2.0, 0.6)), seed=3, n_steps=10)
    model = train_contact_classifier(seed=0, per_class=20)
    classify_log(log2, model)
    for r in log2.records:
        for contact, sig in zip(r.contacts, r.signals):
            if sig is not None:
                assert contact.class_probs is not None
                assert contact.class_probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_gait_nominal_offsets():
    g = GaitParams()
    assert np.array_equal(g.nominal_offset("LF"), [0.3, 0.2, 0.0])
    assert np.array_equal(g.nominal_offset("RF"), [0.3, -0.2, 0.0])
    assert np.array_equal(g.nominal_offset("LH"), [-0.3, 0.2, 0.0])
    assert np.array_equal(g.nominal_offset("RH"), [-0.3, -0.2, 0.0])


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(white_std=(0.1, 0.1)).white_array()
    assert np.array_equal(NoiseSpec(z_bias=0.2, yaw_bias=0.3).bias_vector(), [0, 0, 0.2, 0, 0, 0.3])

"""Particle filter mechanics: resampling, normalization, branches, determinism."""

import numpy as np
import pytest

from hapticloc.geometry import FOOT_LABELS, FootOffset, Pose, quat_from_yaw
from hapticloc.likelihood import ContactMeasurement, LikelihoodConfig
from hapticloc.maps import ElevationGrid, MapSet
from hapticloc.mcl import (
    MODE_CONTACT_KINDS,
    FilterState,
    StepInput,
    contacts_for_mode,
    effective_sample_size,
    estimate,
    estimate_detail,
    init_filter,
    run_filter,
    step,
    systematic_resample_indices,
    write_diagnostics_csv,
)

STAND_Z = 0.3
FEET = tuple(
    FootOffset(lab, (sx * 0.2, sy * 0.15, -STAND_Z))
    for lab, (sx, sy) in zip(FOOT_LABELS, ((1, 1), (1, -1), (-1, 1), (-1, -1)))
)


def flat_maps(n=20, res=0.5):
    return MapSet(ElevationGrid(res, (-n * res / 2, -n * res / 2), np.zeros((n, n))))


def stand_pose(x=0.0, y=0.0, yaw=0.0):
    return Pose(np.array([x, y, STAND_Z]), quat_from_yaw(yaw))


def contacts():
    return [ContactMeasurement(f, kind="elevation") for f in FEET]


def forward_input(dx=0.05, cov_scale=1.0):
    cov = np.array([4e-4, 4e-4, 1e-4, 1e-6, 1e-6, 4e-5]) * cov_scale
    return StepInput(Pose(np.array([dx, 0.0, 0.0]), np.array([0.0, 0.0, 0.0, 1.0])), cov, contacts())


def test_systematic_resample_equal_weights_is_identity_permutation():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        idx = systematic_resample_indices(np.full(4, 0.25), rng)
        assert np.array_equal(idx, np.arange(4))


def test_systematic_resample_zero_weight_never_drawn():
    rng = np.random.default_rng(0)
    for _ in range(200):
        idx = systematic_resample_indices(np.array([0.0, 1.0, 0.0]), rng)
        assert np.all(idx == 1)


def test_systematic_resample_unbiased_within_multinomial_3_sigma():
    rng = np.random.default_rng(42)
    n = 16
    weights = rng.dirichlet(np.ones(n))
    trials = 10_000
    counts = np.zeros(n)
    for _ in range(trials):
        counts += np.bincount(systematic_resample_indices(weights, rng), minlength=n)
    expected = trials * n * weights
    sigma = np.sqrt(trials * n * weights * (1.0 - weights))
    assert np.all(np.abs(counts - expected) <= 3.0 * sigma)


def test_systematic_resample_deterministic_under_seed():
    w = np.random.default_rng(1).dirichlet(np.ones(30))
    a = systematic_resample_indices(w, np.random.default_rng(9))
    b = systematic_resample_indices(w, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_effective_sample_size_bounds():
    n = 64
    assert effective_sample_size(np.full(n, -np.log(n))) == pytest.approx(n)
    lw = np.full(n, -1e3)
    lw[3] = 0.0
    assert effective_sample_size(lw) == pytest.approx(1.0)


def test_init_filter_validation_and_prior():
    with pytest.raises(ValueError):
        init_filter(stand_pose(), np.eye(6) * 1e-4, n_particles=0)
    with pytest.raises(ValueError):
        init_filter(stand_pose(), np.eye(6) * 1e-4, resample_frac=1.5)
    st = init_filter(stand_pose(1.0, 2.0), np.eye(6) * 1e-4, n_particles=300, seed=3)
    assert st.n_particles == 300
    assert len(st.trajectory) == 1 and st.trajectory[0] is st.last_estimate
    assert np.allclose(st.positions.mean(axis=0), [1.0, 2.0, STAND_Z], atol=0.01)
    assert np.sum(st.weights()) == pytest.approx(1.0, abs=1e-12)


def test_step_normalizes_weights_within_tolerance():
    maps = flat_maps()
    st = init_filter(stand_pose(), np.eye(6) * 2.5e-3, n_particles=200, seed=0)
    for _ in range(10):
        step(st, forward_input(), maps, LikelihoodConfig())
        assert abs(np.sum(st.weights()) - 1.0) < 1e-9


def test_step_counts_and_trajectory_growth():
    maps = flat_maps()
    st = init_filter(stand_pose(), np.eye(6) * 1e-4, n_particles=100, seed=0)
    for k in range(5):
        step(st, forward_input(), maps, LikelihoodConfig())
        assert st.step_count == k + 1
        assert len(st.trajectory) == k + 2
        assert st.diagnostics[-1].k == k + 1


def test_resample_resets_weights_uniform():
    maps = flat_maps()
    st = init_filter(stand_pose(), np.eye(6) * 1e-4, n_particles=150, seed=1, resample_frac=1.0)
    # frac 1.0 forces a resample every step
    step(st, forward_input(), maps, LikelihoodConfig())
    assert np.allclose(st.log_weights, -np.log(150))


def test_underflow_resets_to_uniform_and_counts():
    st = init_filter(stand_pose(), np.eye(6) * 1e-4, n_particles=50, seed=0)
    st.log_weights = np.full(50, -np.inf)
    step(st, forward_input(), flat_maps(), LikelihoodConfig())
    assert st.divergence_count == 1
    assert np.sum(st.weights()) == pytest.approx(1.0, abs=1e-9)


def test_out_of_contact_feet_are_skipped():
    maps = flat_maps()
    cfg = LikelihoodConfig()
    lifted = [
        ContactMeasurement(FootOffset("LF", (0.2, 0.15, 5.0)), kind="elevation", in_contact=False)
    ]
    st = init_filter(stand_pose(), np.diag([0.01, 0.01, 0.01, 0, 0, 0]) ** 1, n_particles=80, seed=2)
    inp = StepInput(Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0])), np.zeros(6), lifted)
    step(st, inp, maps, cfg)
    # no active contact: weights stay exactly uniform after normalization
    assert np.allclose(st.log_weights, -np.log(80))


def test_stepinput_covariance_shapes():
    inc = Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))
    si = StepInput(inc, np.arange(1, 7, dtype=float), [])
    assert si.odom_cov.shape == (6, 6)
    assert np.array_equal(np.diag(si.odom_cov), np.arange(1, 7, dtype=float))
    with pytest.raises(ValueError):
        StepInput(inc, np.zeros((3, 3)), [])


def test_estimate_full_branch_on_tight_cluster():
    st = init_filter(stand_pose(0.5, -0.25), np.eye(6) * 1e-6, n_particles=400, seed=5)
    pose, xy_std, branch = estimate_detail(st)
    assert branch == "full"
    assert np.all(xy_std < 0.01)
    assert np.allclose(pose.position[:2], [0.5, -0.25], atol=0.005)
    assert estimate(st).position == pytest.approx(pose.position)


def test_estimate_z_only_branch_on_bimodal_cluster():
    st = init_filter(stand_pose(), np.eye(6) * 1e-6, n_particles=200, seed=7)
    half = 100
    st.positions[:half, 1] -= 0.5
    st.positions[half:, 1] += 0.5
    st.positions[:, 2] = 0.41
    pose, xy_std, branch = estimate_detail(st)
    assert branch == "z-only"
    assert xy_std[1] > st.xy_std_threshold
    # x, y, heading held at the last estimate; z follows the particles
    assert np.allclose(pose.position[:2], st.last_estimate.position[:2])
    assert pose.position[2] == pytest.approx(0.41, abs=1e-6)
    assert np.array_equal(pose.quat, st.last_estimate.quat)


def test_z_only_branch_dead_reckons_with_last_increment():
    st = init_filter(stand_pose(), np.eye(6) * 1e-6, n_particles=200, seed=7)
    st.positions[:100, 1] -= 0.5
    st.positions[100:, 1] += 0.5
    st.last_increment = Pose(np.array([0.07, 0.0, 0.0]), np.array([0.0, 0.0, 0.0, 1.0]))
    pose, _, branch = estimate_detail(st)
    assert branch == "z-only"
    assert pose.position[0] == pytest.approx(0.07)


def test_contacts_for_mode_retags_kind():
    base = contacts()
    for mode, kind in MODE_CONTACT_KINDS.items():
        out = contacts_for_mode(base, mode)
        assert all(c.kind == kind for c in out)
    # originals untouched
    assert all(c.kind == "elevation" for c in base)
    with pytest.raises(ValueError):
        contacts_for_mode(base, "HL-X")


def test_run_filter_bit_exact_determinism():
    maps = flat_maps()
    inputs = [forward_input() for _ in range(8)]
    kw = dict(n_particles=120, seed=11, mode="HL-G")
    a = run_filter(stand_pose(), np.eye(6) * 1e-4, inputs, maps, LikelihoodConfig(), **kw)
    b = run_filter(stand_pose(), np.eye(6) * 1e-4, inputs, maps, LikelihoodConfig(), **kw)
    ta = np.stack([p.to_array() for p in a.trajectory])
    tb = np.stack([p.to_array() for p in b.trajectory])
    assert np.array_equal(ta, tb)
    c = run_filter(stand_pose(), np.eye(6) * 1e-4, inputs, maps, LikelihoodConfig(), n_particles=120, seed=12)
    tc = np.stack([p.to_array() for p in c.trajectory])
    assert not np.array_equal(ta, tc)


def test_run_filter_rejects_unknown_mode():
    with pytest.raises(ValueError):
        run_filter(
            stand_pose(), np.eye(6) * 1e-4, [forward_input()], flat_maps(), LikelihoodConfig(), mode="nope"
        )


def test_diagnostics_csv_layout(tmp_path):
    maps = flat_maps()
    st = init_filter(stand_pose(), np.eye(6) * 1e-4, n_particles=60, seed=0)
    for _ in range(3):
        step(st, forward_input(), maps, LikelihoodConfig())
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(st, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "k,ess,xy_std_x,xy_std_y,branch,x,y,z,qx,qy,qz,qw"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "1" and first[4] in ("full", "z-only")
    assert len(first) == 12


def test_filter_tracks_through_height_feature():
    """Alternating slopes give the filter gradient to pull back injected x drift.

    The tent period (0.8 m) puts front and hind feet (0.4 m apart) on opposite
    slopes, so no common z shift can explain an x offset away.
    """
    from hapticloc.maps import elevation_at

    res = 0.1
    nx = ny = 60
    xc = (np.arange(nx) + 0.5) * res
    u = np.mod(xc, 0.8) / 0.8
    heights = np.tile(0.12 * (1.0 - np.abs(2.0 * u - 1.0)), (ny, 1))
    maps = MapSet(ElevationGrid(res, (0.0, 0.0), heights))
    g = maps.elevation

    rng = np.random.default_rng(0)
    truth = stand_pose(1.0, 3.0)
    inputs = []
    truths = []
    n_steps = 70
    for k in range(n_steps):
        old_z = truth.position[2]
        x_new = truth.position[0] + 0.05
        gz = float(elevation_at(g, (x_new, 3.0)))
        truth = Pose(np.array([x_new, 3.0, gz + STAND_Z]), truth.quat)
        truths.append(truth)
        cs = []
        for f in FEET:
            fw = truth.position + f.vec
            vec = f.vec.copy()
            vec[2] = float(elevation_at(g, fw[:2])) - truth.position[2]
            cs.append(ContactMeasurement(FootOffset(f.label, vec), kind="elevation"))
        inc_true = np.array([0.05, 0.0, truth.position[2] - old_z])
        noisy = inc_true + rng.normal(0.0, [3e-3, 3e-3, 1e-3])
        noisy[0] += 0.004  # systematic forward drift the map must correct
        inputs.append(
            StepInput(Pose(noisy, np.array([0.0, 0.0, 0.0, 1.0])),
                      # inflated x variance: exploration must outrun the bias
                      np.array([6e-5, 2e-5, 4e-6, 1e-8, 1e-8, 1e-8]), cs)
        )
    # y carries no information here, so its prior must start under the spread
    # threshold or the estimate never leaves the dead-reckoning branch
    prior = np.diag([0.01, 4e-4, 1e-4, 1e-6, 1e-6, 1e-4])
    st = run_filter(stand_pose(1.0, 3.0), prior, inputs, maps, LikelihoodConfig(),
                    mode="HL-G", n_particles=400, seed=1)
    assert st.diagnostics[-1].branch == "full"
    final_err = abs(st.trajectory[-1].position[0] - truths[-1].position[0])
    dead_reckon = 0.004 * n_steps  # error if the drift were never corrected
    assert final_err < dead_reckon / 2

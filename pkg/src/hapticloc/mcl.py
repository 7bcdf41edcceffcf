"""Sequential Monte Carlo localization over foot-contact measurements.

Particles are SE(3) poses stored as flat arrays (positions (N, 3), scalar-last
quaternions (N, 4)) with log-domain weights. Each step propagates every
particle by the odometry increment with body-frame Gaussian noise, multiplies
weights by the joint contact likelihood, resamples systematically when the
effective sample size drops below a fraction of N, and appends a pose estimate.

The estimate is the weighted mean while the particle spread in x and y stays
below a threshold. Beyond it (ambiguous, typically multimodal sets) x, y, and
heading continue by dead reckoning from the previous estimate and only z is
taken from the particles, so the reported pose never teleports between modes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    Pose,
    compose,
    covariance_factor,
    pose_exp,
    quat_conjugate,
    quat_from_rotvec,
    quat_mul,
    quat_rotate,
    quat_to_rotvec,
)
from .likelihood import ContactMeasurement, LikelihoodConfig, contact_log_likelihood
from .maps import MapSet

log = logging.getLogger(__name__)


@dataclass
class StepInput:
    """Odometry increment with its 6x6 tangent covariance, plus foot contacts."""

    odom_increment: Pose
    odom_cov: np.ndarray
    contacts: list[ContactMeasurement]

    def __post_init__(self):
        self.odom_cov = np.asarray(self.odom_cov, dtype=float)
        if self.odom_cov.shape == (6,):
            self.odom_cov = np.diag(self.odom_cov)
        if self.odom_cov.shape != (6, 6):
            raise ValueError(f"odometry covariance must be 6x6, got {self.odom_cov.shape}")


@dataclass
class StepDiagnostics:
    k: int
    ess: float
    xy_std: np.ndarray
    branch: str
    estimate: Pose


@dataclass
class FilterState:
    positions: np.ndarray
    quats: np.ndarray
    log_weights: np.ndarray
    rng: np.random.Generator
    resample_frac: float
    xy_std_threshold: float
    last_estimate: Pose
    last_increment: Pose | None = None
    trajectory: list[Pose] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)
    step_count: int = 0
    divergence_count: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.log_weights)

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def init_filter(
    prior_mean: Pose,
    prior_cov,
    n_particles: int = 500,
    seed: int = 0,
    resample_frac: float = 0.5,
    xy_std_threshold: float = 0.10,
) -> FilterState:
    """Sample the prior particle set; the trajectory starts at the prior mean."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if not 0.0 <= resample_frac <= 1.0:
        raise ValueError("resample_frac must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    factor = covariance_factor(prior_cov)
    delta = rng.standard_normal((n_particles, 6)) @ factor.T
    positions = prior_mean.position + quat_rotate(prior_mean.quat, delta[:, :3])
    quats = quat_mul(prior_mean.quat, quat_from_rotvec(delta[:, 3:]))
    state = FilterState(
        positions=positions,
        quats=quats,
        log_weights=np.full(n_particles, -np.log(n_particles)),
        rng=rng,
        resample_frac=float(resample_frac),
        xy_std_threshold=float(xy_std_threshold),
        last_estimate=prior_mean,
    )
    state.trajectory.append(prior_mean)
    return state


def systematic_resample_indices(weights, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: N evenly spaced pointers with one shared random offset.

    Unbiased: particle i is drawn N * weights[i] times in expectation.
    """
    weights = np.asarray(weights, dtype=float)
    n = len(weights)
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    pointers = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cum, pointers, side="right").clip(max=n - 1)


def effective_sample_size(log_weights) -> float:
    w = np.exp(log_weights - _logsumexp(log_weights))
    return float(1.0 / np.sum(w * w))


def _logsumexp(a):
    m = np.max(a)
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(a - m)))


def estimate_detail(state: FilterState):
    """(pose, xy_std, branch): weighted mean, or the dead-reckoning fallback.

    The full branch averages positions with the weights and averages orientation
    in the tangent space linearized at the highest-weight particle. The z-only
    branch composes the previous estimate with the latest odometry increment
    for x, y, and orientation, and takes just z from the weighted mean.
    """
    w = np.exp(state.log_weights - _logsumexp(state.log_weights))
    mean_p = w @ state.positions
    xy_std = np.sqrt(w @ (state.positions[:, :2] - mean_p[:2]) ** 2)
    if np.all(xy_std <= state.xy_std_threshold):
        ref = state.quats[int(np.argmax(state.log_weights))]
        dq = quat_mul(quat_conjugate(ref), state.quats)
        mean_rv = w @ quat_to_rotvec(dq)
        q = quat_mul(ref, quat_from_rotvec(mean_rv))
        return Pose(mean_p, q), xy_std, "full"
    base = state.last_estimate
    if state.last_increment is not None:
        base = compose(base, state.last_increment)
    return Pose([base.position[0], base.position[1], mean_p[2]], base.quat), xy_std, "z-only"


def estimate(state: FilterState) -> Pose:
    return estimate_detail(state)[0]


def step(state: FilterState, inp: StepInput, maps: MapSet, cfg: LikelihoodConfig) -> FilterState:
    """Advance the filter by one four-support phase; mutates and returns state.

    Contacts with in_contact False are skipped. The contact's kind field selects
    which likelihood channels apply.
    """
    n = state.n_particles
    inc = inp.odom_increment

    # propagate: particle o increment, then right-perturbation noise
    factor = covariance_factor(inp.odom_cov)
    delta = state.rng.standard_normal((n, 6)) @ factor.T
    state.positions = state.positions + quat_rotate(state.quats, inc.position)
    state.quats = quat_mul(state.quats, inc.quat)
    state.positions = state.positions + quat_rotate(state.quats, delta[:, :3])
    state.quats = quat_mul(state.quats, quat_from_rotvec(delta[:, 3:]))

    for contact in inp.contacts:
        if not contact.in_contact:
            continue
        state.log_weights = state.log_weights + contact_log_likelihood(
            state.positions, state.quats, contact, maps, cfg
        )

    total = _logsumexp(state.log_weights)
    if not np.isfinite(total):
        # every weight underflowed: reset rather than crash, and record it
        state.divergence_count += 1
        log.warning("step %d: all particle weights underflowed, resetting to uniform", state.step_count + 1)
        state.log_weights = np.full(n, -np.log(n))
    else:
        state.log_weights = state.log_weights - total

    w = np.exp(state.log_weights)
    ess = float(1.0 / np.sum(w * w))
    if ess < state.resample_frac * n:
        idx = systematic_resample_indices(w, state.rng)
        state.positions = state.positions[idx]
        state.quats = state.quats[idx]
        state.log_weights = np.full(n, -np.log(n))

    state.last_increment = inc
    est, xy_std, branch = estimate_detail(state)
    state.step_count += 1
    state.trajectory.append(est)
    state.last_estimate = est
    state.diagnostics.append(StepDiagnostics(state.step_count, ess, xy_std, branch, est))
    return state


MODE_CONTACT_KINDS = {
    "HL-G": "elevation",
    "HL-GC": "elevation+class",
    "HL-C": "class",
    "HL-3D": "cloud",
}


def contacts_for_mode(contacts, mode: str):
    """Retag contacts with the likelihood kind the given mode uses."""
    if mode not in MODE_CONTACT_KINDS:
        raise ValueError(f"unknown mode {mode!r}, expected one of {sorted(MODE_CONTACT_KINDS)}")
    kind = MODE_CONTACT_KINDS[mode]
    return [replace(c, kind=kind) for c in contacts]


def run_filter(
    prior_mean: Pose,
    prior_cov,
    inputs,
    maps: MapSet,
    cfg: LikelihoodConfig,
    mode: str = "HL-G",
    n_particles: int = 500,
    seed: int = 0,
    resample_frac: float = 0.5,
    xy_std_threshold: float = 0.10,
) -> FilterState:
    """Run the filter over a sequence of StepInputs in the given mode."""
    state = init_filter(prior_mean, prior_cov, n_particles, seed, resample_frac, xy_std_threshold)
    for inp in inputs:
        retagged = StepInput(inp.odom_increment, inp.odom_cov, contacts_for_mode(inp.contacts, mode))
        step(state, retagged, maps, cfg)
    return state


def write_diagnostics_csv(state: FilterState, path) -> None:
    """Per-step diagnostics: ESS, xy spread, estimate branch, estimated pose."""
    with open(path, "w") as f:
        f.write("k,ess,xy_std_x,xy_std_y,branch,x,y,z,qx,qy,qz,qw\n")
        for d in state.diagnostics:
            pose = ",".join(format(v, ".17g") for v in d.estimate.to_array())
            f.write(f"{d.k},{d.ess:.17g},{d.xy_std[0]:.17g},{d.xy_std[1]:.17g},{d.branch},{pose}\n")

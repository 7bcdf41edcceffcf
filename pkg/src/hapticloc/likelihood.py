"""Contact measurement likelihoods, all in the log domain.

Three channels, one per map layer:

  elevation   residual z = foot_world_z - grid height under the foot, N(z; 0, sigma_z)
  cloud       residual z = distance from the foot to the nearest map point, N(z; 0, sigma_z)
  class       matching class -> the N(.; 0, sigma_c) peak density; mismatch ->
              N(d; 0, sigma_c) of the lattice distance d to the nearest cell of
              the estimated class

Every channel is floored in the linear domain (default floor: the channel's
density at 3 sigma) so a single bad contact cannot zero a particle. A foot that
falls outside the map, or on a no-data / unlabeled cell, contributes a neutral
factor of 1 (log-likelihood 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import FootOffset, Pose, quat_rotate, transform_point
from .maps import (
    UNKNOWN_CLASS,
    ClassGrid,
    ElevationGrid,
    MapSet,
    PointCloudMap,
    class_at_many,
    class_distance_many,
    cloud_distances,
    elevation_at_many,
)

CONTACT_KINDS = ("elevation", "cloud", "class", "elevation+class")

_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_density(x, sigma):
    """N(x; 0, sigma) in the linear domain."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def gaussian_log_density(x, sigma):
    x = np.asarray(x, dtype=float)
    return -0.5 * (x / sigma) ** 2 - math.log(sigma) - 0.5 * _LOG_2PI


@dataclass(frozen=True)
class LikelihoodConfig:
    """Channel sigmas and linear-domain floors.

    Floors left as None resolve to the channel density at 3 sigma, which keeps
    the floor strictly below the peak for any sigma.
    """

    sigma_z: float = 0.01
    sigma_c: float = 0.05
    rho: float | None = None
    class_rho: float | None = None

    def __post_init__(self):
        if not self.sigma_z > 0.0 or not self.sigma_c > 0.0:
            raise ValueError("likelihood sigmas must be positive")
        if self.rho is None:
            object.__setattr__(self, "rho", float(gaussian_density(3.0 * self.sigma_z, self.sigma_z)))
        if self.class_rho is None:
            object.__setattr__(self, "class_rho", float(gaussian_density(3.0 * self.sigma_c, self.sigma_c)))
        if not 0.0 < self.rho < float(gaussian_density(0.0, self.sigma_z)):
            raise ValueError("rho must lie strictly between 0 and the elevation peak density")
        if not 0.0 < self.class_rho < float(gaussian_density(0.0, self.sigma_c)):
            raise ValueError("class_rho must lie strictly between 0 and the class peak density")

    @property
    def log_rho(self) -> float:
        return math.log(self.rho)

    @property
    def log_class_rho(self) -> float:
        return math.log(self.class_rho)

    @property
    def log_class_peak(self) -> float:
        return float(gaussian_log_density(0.0, self.sigma_c))


@dataclass
class ContactMeasurement:
    """One foot contact handed to the filter.

    kind selects the likelihood channels. class_probs carries the classifier's
    distribution over terrain classes; its argmax is the class the map is
    queried for.
    """

    foot: FootOffset
    kind: str = "elevation"
    class_probs: np.ndarray | None = None
    in_contact: bool = True

    def __post_init__(self):
        if self.kind not in CONTACT_KINDS:
            raise ValueError(f"unknown contact kind {self.kind!r}, expected one of {CONTACT_KINDS}")
        if self.class_probs is not None:
            self.class_probs = np.array(self.class_probs, dtype=float)

    def estimated_class(self) -> int:
        if self.class_probs is None:
            raise ValueError("contact carries no class probabilities")
        return int(np.argmax(self.class_probs))


def elevation_log_likelihood_points(points, grid: ElevationGrid, cfg: LikelihoodConfig) -> np.ndarray:
    """Per-point elevation channel for world contact points (N, 3)."""
    points = np.asarray(points, dtype=float)
    h = elevation_at_many(grid, points[..., :2])
    z = points[..., 2] - h
    nodata = np.isnan(h)
    ll = np.maximum(gaussian_log_density(np.where(nodata, 0.0, z), cfg.sigma_z), cfg.log_rho)
    ll[nodata] = 0.0
    return ll


def cloud_log_likelihood_points(points, cloud: PointCloudMap, cfg: LikelihoodConfig) -> np.ndarray:
    """Per-point cloud channel for world contact points (N, 3)."""
    d = cloud_distances(cloud, points)
    return np.maximum(gaussian_log_density(d, cfg.sigma_z), cfg.log_rho)


def class_log_likelihood_points(points_xy, class_id: int, grid: ClassGrid, cfg: LikelihoodConfig) -> np.ndarray:
    """Per-point class channel for world xy contact points (N, 2).

    class_id is the classifier's estimate for this contact. Cells already of
    that class score the peak density; other cells score the floored density of
    the lattice distance to the nearest cell of that class. An estimate absent
    from the map scores the floor itself; off-map and unlabeled cells are
    neutral.
    """
    class_id = int(class_id)
    if not 0 <= class_id < grid.n_classes:
        raise ValueError(f"class id {class_id} outside [0, {grid.n_classes})")
    points_xy = np.asarray(points_xy, dtype=float)
    ids = class_at_many(grid, points_xy)
    ll = np.full(points_xy.shape[:-1], cfg.log_class_rho)
    neutral = ids == UNKNOWN_CLASS
    match = ids == class_id
    if grid._present[class_id]:
        mismatch = ~neutral & ~match
        if mismatch.any():
            d = class_distance_many(grid, points_xy[mismatch], class_id)
            ll[mismatch] = np.maximum(gaussian_log_density(d, cfg.sigma_c), cfg.log_class_rho)
    ll[match] = cfg.log_class_peak
    ll[neutral] = 0.0
    return ll


def contact_log_likelihood(positions, quats, contact: ContactMeasurement, maps: MapSet, cfg: LikelihoodConfig) -> np.ndarray:
    """Joint per-particle log-likelihood of one contact, particles as arrays."""
    world = quat_rotate(quats, contact.foot.vec) + positions
    kind = contact.kind
    if kind == "cloud":
        if maps.cloud is None:
            raise ValueError("contact kind 'cloud' requires a point cloud layer")
        return cloud_log_likelihood_points(world, maps.cloud, cfg)
    ll = np.zeros(len(world))
    if kind in ("elevation", "elevation+class"):
        ll = ll + elevation_log_likelihood_points(world, maps.elevation, cfg)
    if kind in ("class", "elevation+class"):
        if maps.class_grid is None:
            raise ValueError(f"contact kind {kind!r} requires a class layer")
        ll = ll + class_log_likelihood_points(world[..., :2], contact.estimated_class(), maps.class_grid, cfg)
    return ll


def elevation_loglik(pose: Pose, foot, grid: ElevationGrid, cfg: LikelihoodConfig) -> float:
    """Elevation channel for a single pose and base-frame foot offset."""
    p = transform_point(pose, foot)
    return float(elevation_log_likelihood_points(p.reshape(1, 3), grid, cfg)[0])


def cloud_loglik(pose: Pose, foot, cloud: PointCloudMap, cfg: LikelihoodConfig) -> float:
    p = transform_point(pose, foot)
    return float(cloud_log_likelihood_points(p.reshape(1, 3), cloud, cfg)[0])


def class_loglik(pose: Pose, foot, class_id: int, grid: ClassGrid, cfg: LikelihoodConfig) -> float:
    p = transform_point(pose, foot)
    return float(class_log_likelihood_points(p[:2].reshape(1, 2), class_id, grid, cfg)[0])


def joint_loglik(pose: Pose, contact: ContactMeasurement, maps: MapSet, cfg: LikelihoodConfig) -> float:
    """Sum of the contact's active channels at one pose (conditional independence)."""
    return float(
        contact_log_likelihood(pose.position.reshape(1, 3), pose.quat.reshape(1, 4), contact, maps, cfg)[0]
    )

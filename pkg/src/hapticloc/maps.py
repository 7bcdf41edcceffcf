"""Terrain map layers and their plain-text file formats.

All grid layers share the same lattice convention: `origin` is the world xy of
the outer corner of cell (col 0, row 0), cells are `resolution` squares, and a
query point belongs to the cell that contains it (no interpolation). Values are
stored row-major, one grid row per file line.

File formats:

  elevation   header ``HMAP 1 <n_cols> <n_rows> <resolution> <origin_x> <origin_y>``
              followed by n_rows * n_cols heights; missing cells are ``nan``.
  class map   header ``CMAP 1 <n_cols> <n_rows> <resolution> <origin_x> <origin_y> <n_classes>``
              followed by integer ids; 255 marks unlabeled cells.
  point cloud one ``x y z`` triple per line, no header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

UNKNOWN_CLASS = 255


class MapFormatError(ValueError):
    """Raised when a map file does not parse; message carries path and line."""


@dataclass
class ElevationGrid:
    """2.5D height field. heights has shape (n_rows, n_cols), nan = no data."""

    resolution: float
    origin: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        self.resolution = float(self.resolution)
        if not self.resolution > 0.0:
            raise ValueError("grid resolution must be positive")
        self.origin = np.array(self.origin, dtype=float).reshape(2)
        self.heights = np.array(self.heights, dtype=float)
        if self.heights.ndim != 2 or self.heights.size == 0:
            raise ValueError("heights must be a non-empty 2D array")

    @property
    def n_rows(self) -> int:
        return self.heights.shape[0]

    @property
    def n_cols(self) -> int:
        return self.heights.shape[1]


@dataclass
class ClassGrid:
    """Per-cell terrain class ids on the same lattice convention as ElevationGrid.

    Per-class distance fields are precomputed at construction from an exact
    Euclidean distance transform, so nearest-class queries are O(1). Distances
    are measured center-to-center on the cell lattice.
    """

    resolution: float
    origin: np.ndarray
    class_ids: np.ndarray
    n_classes: int
    _dist: np.ndarray = field(init=False, repr=False)
    _nearest: np.ndarray = field(init=False, repr=False)
    _present: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.resolution = float(self.resolution)
        if not self.resolution > 0.0:
            raise ValueError("grid resolution must be positive")
        self.origin = np.array(self.origin, dtype=float).reshape(2)
        self.class_ids = np.array(self.class_ids, dtype=np.uint8)
        if self.class_ids.ndim != 2 or self.class_ids.size == 0:
            raise ValueError("class_ids must be a non-empty 2D array")
        self.n_classes = int(self.n_classes)
        if not 0 < self.n_classes <= 254:
            raise ValueError("n_classes must be in [1, 254]")
        bad = (self.class_ids >= self.n_classes) & (self.class_ids != UNKNOWN_CLASS)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValueError(
                f"class id {int(self.class_ids[r, c])} at cell (row {r}, col {c}) "
                f"outside [0, {self.n_classes}) and not the unknown sentinel {UNKNOWN_CLASS}"
            )
        self._build_distance_fields()

    @property
    def n_rows(self) -> int:
        return self.class_ids.shape[0]

    @property
    def n_cols(self) -> int:
        return self.class_ids.shape[1]

    def _build_distance_fields(self):
        rows, cols = self.class_ids.shape
        self._dist = np.full((self.n_classes, rows, cols), np.inf)
        self._nearest = np.zeros((self.n_classes, rows, cols, 2), dtype=np.int32)
        self._present = np.zeros(self.n_classes, dtype=bool)
        row_idx, col_idx = np.indices((rows, cols))
        for c in range(self.n_classes):
            mask = self.class_ids == c
            if not mask.any():
                continue
            self._present[c] = True
            _, (nr, nc) = distance_transform_edt(~mask, return_indices=True)
            # recompute from integer offsets so lattice distances are exact
            d2 = (nr - row_idx).astype(np.int64) ** 2 + (nc - col_idx).astype(np.int64) ** 2
            self._dist[c] = self.resolution * np.sqrt(d2.astype(float))
            self._nearest[c, ..., 0] = nr
            self._nearest[c, ..., 1] = nc


@dataclass
class PointCloudMap:
    """3D map as a raw point set with a kd-tree for nearest-neighbour queries."""

    points: np.ndarray
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3 or len(self.points) == 0:
            raise ValueError("point cloud must be a non-empty (M, 3) array")
        if not np.isfinite(self.points).all():
            raise ValueError("point cloud contains non-finite coordinates")
        self._tree = cKDTree(self.points)


@dataclass
class MapSet:
    """Map layers of one course. Grid layers, when both present, share a lattice."""

    elevation: ElevationGrid
    class_grid: ClassGrid | None = None
    cloud: PointCloudMap | None = None

    def __post_init__(self):
        if self.class_grid is not None:
            check_same_lattice(self.elevation, self.class_grid)


def check_same_lattice(a, b) -> None:
    if (
        a.n_rows != b.n_rows
        or a.n_cols != b.n_cols
        or a.resolution != b.resolution
        or not np.array_equal(a.origin, b.origin)
    ):
        raise ValueError(
            "grid lattice mismatch: "
            f"{a.n_cols}x{a.n_rows}@{a.resolution} origin {a.origin} vs "
            f"{b.n_cols}x{b.n_rows}@{b.resolution} origin {b.origin}"
        )


def _cell_indices(grid, xy):
    """Column/row indices and inside-mask for query points (..., 2)."""
    xy = np.asarray(xy, dtype=float)
    rel = (xy - grid.origin) / grid.resolution
    ix = np.floor(rel[..., 0]).astype(np.int64)
    iy = np.floor(rel[..., 1]).astype(np.int64)
    inside = (ix >= 0) & (ix < grid.n_cols) & (iy >= 0) & (iy < grid.n_rows)
    return ix, iy, inside


def elevation_at_many(grid: ElevationGrid, xy) -> np.ndarray:
    """Heights at query points (M, 2); nan outside the grid or on no-data cells."""
    xy = np.asarray(xy, dtype=float)
    ix, iy, inside = _cell_indices(grid, xy)
    out = np.full(xy.shape[:-1], np.nan)
    out[inside] = grid.heights[iy[inside], ix[inside]]
    return out


def elevation_at(grid: ElevationGrid, xy) -> float:
    """Height of the cell containing xy; nan outside the grid or on no-data cells."""
    return float(elevation_at_many(grid, np.asarray(xy, dtype=float).reshape(1, 2))[0])


def class_at_many(grid: ClassGrid, xy) -> np.ndarray:
    """Class ids at query points (M, 2); the unknown sentinel outside the grid."""
    xy = np.asarray(xy, dtype=float)
    ix, iy, inside = _cell_indices(grid, xy)
    out = np.full(xy.shape[:-1], UNKNOWN_CLASS, dtype=np.uint8)
    out[inside] = grid.class_ids[iy[inside], ix[inside]]
    return out


def class_at(grid: ClassGrid, xy) -> int:
    return int(class_at_many(grid, np.asarray(xy, dtype=float).reshape(1, 2))[0])


def cell_center(grid, ix, iy) -> np.ndarray:
    return grid.origin + (np.stack([np.asarray(ix), np.asarray(iy)], axis=-1) + 0.5) * grid.resolution


def nearest_class_point(grid: ClassGrid, xy, class_id: int):
    """Center of the closest cell holding class_id, and its lattice distance.

    The query is resolved on the cell lattice: xy is mapped to its containing
    cell (clamped to the border for points outside the grid) and the distance
    is center-to-center. Returns (None, inf) when the class is absent.
    """
    class_id = int(class_id)
    if not 0 <= class_id < grid.n_classes:
        raise ValueError(f"class id {class_id} outside [0, {grid.n_classes})")
    if not grid._present[class_id]:
        return None, math.inf
    xy = np.asarray(xy, dtype=float).reshape(2)
    ix, iy, _ = _cell_indices(grid, xy)
    ix = int(np.clip(ix, 0, grid.n_cols - 1))
    iy = int(np.clip(iy, 0, grid.n_rows - 1))
    nr, nc = grid._nearest[class_id, iy, ix]
    return cell_center(grid, int(nc), int(nr)), float(grid._dist[class_id, iy, ix])


def class_distance_many(grid: ClassGrid, xy, class_id: int) -> np.ndarray:
    """Lattice distances to the nearest class_id cell for query points (M, 2).

    Points outside the grid get inf (callers treat them as off-map before this).
    """
    class_id = int(class_id)
    if not 0 <= class_id < grid.n_classes:
        raise ValueError(f"class id {class_id} outside [0, {grid.n_classes})")
    xy = np.asarray(xy, dtype=float)
    ix, iy, inside = _cell_indices(grid, xy)
    out = np.full(xy.shape[:-1], np.inf)
    if grid._present[class_id]:
        out[inside] = grid._dist[class_id, iy[inside], ix[inside]]
    return out


def kd_nearest(cloud: PointCloudMap, point):
    """Nearest cloud point and its Euclidean distance; exact ties -> lowest index."""
    point = np.asarray(point, dtype=float).reshape(3)
    dist, idx = cloud._tree.query(point)
    # the tree's tie order is unspecified; normalize to the lowest index
    ties = cloud._tree.query_ball_point(point, dist)
    if len(ties) > 1:
        idx = min(ties)
    return cloud.points[idx].copy(), float(dist)


def cloud_distances(cloud: PointCloudMap, points) -> np.ndarray:
    """Nearest-neighbour distances for query points (M, 3)."""
    points = np.asarray(points, dtype=float)
    dist, _ = cloud._tree.query(points)
    return np.asarray(dist, dtype=float)


def _read_tokens(path):
    with open(path) as f:
        lines = f.readlines()
    return lines


def _parse_grid_header(path, line, tag, n_fields):
    parts = line.split()
    if len(parts) != n_fields or parts[0] != tag or parts[1] != "1":
        raise MapFormatError(
            f"{path}:1: expected header '{tag} 1 <n_cols> <n_rows> <resolution> <origin_x> <origin_y>"
            + (" <n_classes>'" if tag == "CMAP" else "'")
            + f", got {line.strip()!r}"
        )
    try:
        n_cols, n_rows = int(parts[2]), int(parts[3])
        resolution = float(parts[4])
        origin = (float(parts[5]), float(parts[6]))
    except ValueError as e:
        raise MapFormatError(f"{path}:1: bad header field: {e}") from e
    if n_cols <= 0 or n_rows <= 0:
        raise MapFormatError(f"{path}:1: grid dimensions must be positive")
    return n_cols, n_rows, resolution, origin, parts


def load_map(path):
    """Load a map file; the format is sniffed from the first line.

    Returns ElevationGrid, ClassGrid, or PointCloudMap.
    """
    lines = _read_tokens(path)
    if not lines:
        raise MapFormatError(f"{path}:1: empty map file")
    first = lines[0].split()
    tag = first[0] if first else ""

    if tag == "HMAP":
        n_cols, n_rows, resolution, origin, _ = _parse_grid_header(path, lines[0], "HMAP", 7)
        values = _parse_floats(path, lines[1:], n_rows * n_cols, "height")
        return ElevationGrid(resolution, origin, values.reshape(n_rows, n_cols))

    if tag == "CMAP":
        n_cols, n_rows, resolution, origin, parts = _parse_grid_header(path, lines[0], "CMAP", 8)
        try:
            n_classes = int(parts[7])
        except ValueError as e:
            raise MapFormatError(f"{path}:1: bad n_classes field: {e}") from e
        ids = _parse_ints(path, lines[1:], n_rows * n_cols, n_classes)
        return ClassGrid(resolution, origin, ids.reshape(n_rows, n_cols), n_classes)

    # no recognized header: point cloud
    pts = []
    for ln, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MapFormatError(f"{path}:{ln}: expected 'x y z', got {len(parts)} fields")
        try:
            pts.append([float(p) for p in parts])
        except ValueError as e:
            raise MapFormatError(f"{path}:{ln}: bad coordinate: {e}") from e
    if not pts:
        raise MapFormatError(f"{path}: point cloud file has no points")
    return PointCloudMap(np.array(pts))


def _parse_floats(path, lines, expected, what):
    vals = []
    for ln, line in enumerate(lines, start=2):
        for tok in line.split():
            try:
                vals.append(float(tok))
            except ValueError as e:
                raise MapFormatError(f"{path}:{ln}: bad {what} value {tok!r}") from e
    if len(vals) != expected:
        raise MapFormatError(f"{path}: expected {expected} {what} values, found {len(vals)}")
    return np.array(vals)


def _parse_ints(path, lines, expected, n_classes):
    vals = []
    for ln, line in enumerate(lines, start=2):
        for fld, tok in enumerate(line.split()):
            try:
                v = int(tok)
            except ValueError as e:
                raise MapFormatError(f"{path}:{ln}: field {fld}: bad class id {tok!r}") from e
            if (v < 0 or v >= n_classes) and v != UNKNOWN_CLASS:
                raise MapFormatError(
                    f"{path}:{ln}: field {fld}: class id {v} outside [0, {n_classes}) "
                    f"and not the unknown sentinel {UNKNOWN_CLASS}"
                )
            vals.append(v)
    if len(vals) != expected:
        raise MapFormatError(f"{path}: expected {expected} class ids, found {len(vals)}")
    return np.array(vals, dtype=np.uint8)


def save_map(obj, path) -> None:
    """Write a map layer in its text format; loading it back is lossless."""
    with open(path, "w") as f:
        if isinstance(obj, ElevationGrid):
            f.write(
                f"HMAP 1 {obj.n_cols} {obj.n_rows} {obj.resolution:.17g} "
                f"{obj.origin[0]:.17g} {obj.origin[1]:.17g}\n"
            )
            for row in obj.heights:
                f.write(" ".join(format(v, ".17g") for v in row) + "\n")
        elif isinstance(obj, ClassGrid):
            f.write(
                f"CMAP 1 {obj.n_cols} {obj.n_rows} {obj.resolution:.17g} "
                f"{obj.origin[0]:.17g} {obj.origin[1]:.17g} {obj.n_classes}\n"
            )
            for row in obj.class_ids:
                f.write(" ".join(str(int(v)) for v in row) + "\n")
        elif isinstance(obj, PointCloudMap):
            for p in obj.points:
                f.write(" ".join(format(v, ".17g") for v in p) + "\n")
        else:
            raise TypeError(f"cannot save object of type {type(obj).__name__} as a map")

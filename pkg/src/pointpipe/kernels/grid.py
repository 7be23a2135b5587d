"""Spatial chunking of point clouds.

Uniform grid partitioning with sliding chunk groups (a coarse-grained
stencil over cells), serial arrival-order splitting for sensor streams, and
bucketed sorting that reconstructs a global order from per-chunk sorts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud


@dataclass(frozen=True)
class ChunkGroup:
    origin: tuple[int, int, int]      # cell coordinate of the window corner
    cells: tuple[int, ...]            # linear cell ids inside the window
    points: np.ndarray                # member point indices, ascending


@dataclass
class ChunkGrid:
    """Axis-aligned uniform cell grid with sliding window groups.

    Cell boundaries belong to the lower-indexed cell. A degenerate axis
    (zero extent) collapses to a single cell on that axis.
    """

    bbox_min: np.ndarray
    bbox_max: np.ndarray
    dims: tuple[int, int, int]
    kernel: tuple[int, int, int]
    stride: tuple[int, int, int]
    cell_of_point: np.ndarray          # (n,) linear cell id per point
    cells: list[np.ndarray]            # point indices per linear cell
    groups: list[ChunkGroup]

    @property
    def cell_count(self) -> int:
        gx, gy, gz = self.dims
        return gx * gy * gz

    def linear_cell(self, cx: int, cy: int, cz: int) -> int:
        _, gy, gz = self.dims
        return (cx * gy + cy) * gz + cz

    def group_counts(self) -> tuple[int, int, int]:
        return tuple(
            (g - k) // s + 1
            for g, k, s in zip(self.dims, self.kernel, self.stride)
        )


def _axis_cells(coords: np.ndarray, lo: float, hi: float, g: int) -> np.ndarray:
    if g == 1 or hi <= lo:
        return np.zeros(len(coords), dtype=np.int64)
    # ceil(t) - 1 sends exact boundary values to the lower cell.
    t = (coords - lo) / (hi - lo) * g
    idx = np.ceil(t).astype(np.int64) - 1
    return np.clip(idx, 0, g - 1)


def split_grid(
    cloud: PointCloud,
    dims: tuple[int, int, int],
    kernel: tuple[int, int, int] = (1, 1, 1),
    stride: tuple[int, int, int] = (1, 1, 1),
) -> ChunkGrid:
    """Partition the cloud's bounding box into ``dims`` cells and slide a
    ``kernel`` window with ``stride`` to form chunk groups."""
    if any(d < 1 for d in dims):
        raise ValueError("grid dims must be positive")
    if any(s < 1 for s in stride):
        raise ValueError("stride must be positive")
    pts = cloud.points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    # Collapse degenerate axes rather than dividing a zero extent.
    dims = tuple(1 if hi[a] <= lo[a] else dims[a] for a in range(3))
    if any(not (1 <= kernel[a] <= dims[a]) for a in range(3)):
        raise ValueError(f"kernel {kernel} must fit within grid dims {dims}")

    per_axis = [_axis_cells(pts[:, a], lo[a], hi[a], dims[a]) for a in range(3)]
    gx, gy, gz = dims
    linear = (per_axis[0] * gy + per_axis[1]) * gz + per_axis[2]
    cells = [
        np.flatnonzero(linear == c).astype(np.int64) for c in range(gx * gy * gz)
    ]

    groups: list[ChunkGroup] = []
    counts = [(dims[a] - kernel[a]) // stride[a] + 1 for a in range(3)]
    for ox in range(counts[0]):
        for oy in range(counts[1]):
            for oz in range(counts[2]):
                corner = (ox * stride[0], oy * stride[1], oz * stride[2])
                window = []
                for dx in range(kernel[0]):
                    for dy in range(kernel[1]):
                        for dz in range(kernel[2]):
                            window.append(
                                ((corner[0] + dx) * gy + (corner[1] + dy)) * gz
                                + (corner[2] + dz)
                            )
                members = np.sort(np.concatenate([cells[c] for c in window]))
                groups.append(
                    ChunkGroup(origin=corner, cells=tuple(window), points=members)
                )

    return ChunkGrid(
        bbox_min=lo,
        bbox_max=hi,
        dims=dims,
        kernel=kernel,
        stride=stride,
        cell_of_point=linear,
        cells=cells,
        groups=groups,
    )


def split_serial(cloud: PointCloud, points_per_chunk: int) -> list[np.ndarray]:
    """Split in arrival order: chunk i holds points [i*N, (i+1)*N)."""
    if points_per_chunk < 1:
        raise ValueError("points_per_chunk must be >= 1")
    n = len(cloud)
    return [
        np.arange(i, min(i + points_per_chunk, n), dtype=np.int64)
        for i in range(0, n, points_per_chunk)
    ]


def chunked_sort(
    cloud: PointCloud, axis: int, chunk_boundaries: list[float]
) -> np.ndarray:
    """Sort along ``axis`` by bucketing into contiguous intervals, sorting
    each bucket, and concatenating. Because the intervals partition the
    axis, the concatenation equals one global stable sort.

    Returns the permutation (point indices in sorted order); ties keep
    arrival order. Values equal to a boundary go to the lower bucket.
    """
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1, or 2")
    cuts = np.asarray(sorted(chunk_boundaries), dtype=np.float64)
    coords = cloud.points[:, axis]
    bucket = np.searchsorted(cuts, coords, side="left")
    pieces = []
    for b in range(len(cuts) + 1):
        members = np.flatnonzero(bucket == b)
        order = np.argsort(coords[members], kind="stable")
        pieces.append(members[order])
    return np.concatenate(pieces)

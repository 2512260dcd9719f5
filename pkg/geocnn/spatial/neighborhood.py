"""Ball and k-nearest-neighbor queries on a :class:`SpatialIndex`"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import (
    TYPE_CHECKING,
    NamedTuple,
)

import numpy as np

from geocnn.pointcloud import rotation_matrix_z

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .index import SpatialIndex

__all__ = [
    'DEFAULT_CAP',
    'Neighborhood',
    'NeighborhoodSet',
    'ball_query',
    'knn_query',
    'knn_table',
    'radius_neighborhoods',
]

lgr = logging.getLogger('geocnn.spatial')

DEFAULT_CAP = 64
"""Default maximum neighborhood size of :func:`radius_neighborhoods`"""

# relative slack on search extents, absorbs rounding in the cell coordinates
_SLACK = 1e-9


class Neighborhood(NamedTuple):
    """Neighbors of one point, ordered by (distance, index)"""

    indices: np.ndarray
    edges: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class NeighborhoodSet:
    """Radius neighborhoods of all points of a cloud, in CSR layout

    The neighbors of point ``i`` are ``indices[offsets[i]:offsets[i + 1]]``,
    with edge vectors ``q - p`` in ``edges`` and their lengths in
    ``distances`` (all double precision). Within a point, neighbors are
    ordered by distance, ties by lower index. Every stored distance is in
    ``(0, radius]``.
    """

    offsets: np.ndarray
    indices: np.ndarray
    edges: np.ndarray
    distances: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        n_edges = int(self.offsets[-1])
        if (
            self.offsets[0] != 0
            or self.indices.shape != (n_edges,)
            or self.edges.shape != (n_edges, 3)
            or self.distances.shape != (n_edges,)
        ):
            msg = 'inconsistent neighborhood arrays'
            raise ValueError(msg)
        for a in (self.offsets, self.indices, self.edges, self.distances):
            a.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_edges(self) -> int:
        return int(self.offsets[-1])

    @property
    def counts(self) -> np.ndarray:
        """Neighborhood size per point"""
        return np.diff(self.offsets)

    @property
    def centers(self) -> np.ndarray:
        """Center point index of each edge"""
        return np.repeat(np.arange(self.n_points, dtype=np.int64), self.counts)

    def __len__(self) -> int:
        return self.n_points

    def __getitem__(self, i: int) -> Neighborhood:
        sl = slice(int(self.offsets[i]), int(self.offsets[i + 1]))
        return Neighborhood(self.indices[sl], self.edges[sl], self.distances[sl])

    @classmethod
    def concat(cls, sets: Sequence[NeighborhoodSet]) -> NeighborhoodSet:
        """Stack the neighborhoods of several clouds

        Point indices of the ``i``-th set are shifted by the total point count
        of the sets before it, matching row-wise stacked feature matrices.
        """
        if not sets:
            msg = 'need at least one neighborhood set'
            raise ValueError(msg)
        radius = sets[0].radius
        if any(s.radius != radius for s in sets):
            msg = 'cannot concatenate neighborhoods of different radii'
            raise ValueError(msg)
        point_shift = np.cumsum([0] + [s.n_points for s in sets[:-1]])
        edge_shift = np.cumsum([0] + [s.n_edges for s in sets[:-1]])
        return cls(
            offsets=np.concatenate(
                [[0]] + [s.offsets[1:] + e for s, e in zip(sets, edge_shift)]
            ).astype(np.int64),
            indices=np.concatenate(
                [s.indices + p for s, p in zip(sets, point_shift)]
            ).astype(np.int64),
            edges=np.concatenate([s.edges for s in sets]).reshape(-1, 3),
            distances=np.concatenate([s.distances for s in sets]),
            radius=radius,
        )

    def rotate_edges(self, angle: float) -> NeighborhoodSet:
        """Return the set with edge vectors rotated by ``angle`` about z

        Indices and distances are shared, only the edge vectors change.
        """
        rot = rotation_matrix_z(angle)
        return NeighborhoodSet(
            offsets=self.offsets,
            indices=self.indices,
            edges=self.edges @ rot.T,
            distances=self.distances,
            radius=self.radius,
        )


def _lengths(edges: np.ndarray) -> np.ndarray:
    # fixed evaluation order, identical bits for any array shape
    return np.sqrt(
        edges[..., 0] * edges[..., 0]
        + edges[..., 1] * edges[..., 1]
        + edges[..., 2] * edges[..., 2]
    )


def _check_center(index: SpatialIndex, center_idx: int) -> None:
    if not 0 <= center_idx < index.n:
        msg = f'point index {center_idx} out of range [0, {index.n})'
        raise ValueError(msg)


def _check_radius(r: float) -> None:
    if not r > 0:
        msg = f'radius must be positive, got {r}'
        raise ValueError(msg)


def _ball_rows(
    index: SpatialIndex,
    centers: np.ndarray,
    cand: np.ndarray,
    r: float,
    cap: int | None,
) -> list[Neighborhood]:
    pos = index.positions
    edges = pos[cand][None, :, :] - pos[centers][:, None, :]
    dist = _lengths(edges)
    # excludes the center, and coincident points with undefined direction
    ok = (dist <= r) & (dist > 0)
    # candidates ascend by index, a stable sort yields (distance, index)
    order = np.argsort(np.where(ok, dist, np.inf), axis=1, kind='stable')
    counts = ok.sum(axis=1)
    if cap is not None:
        counts = np.minimum(counts, cap)
    rows = []
    for i, count in enumerate(counts):
        sel = order[i, :count]
        rows.append(Neighborhood(cand[sel], edges[i, sel], dist[i, sel]))
    return rows


def ball_query(
    index: SpatialIndex,
    center_idx: int,
    r: float,
    cap: int | None = None,
) -> Neighborhood:
    """Indices of all points within distance ``r`` of a center point

    The boundary is inclusive (``|p - q| <= r``). The center, and any other
    point at the very same position, is excluded. If ``cap`` is given, only
    the ``cap`` nearest neighbors are kept. Neighbors are ordered by
    distance, ties by lower index.

    >>> from geocnn.spatial import build_index
    >>> index = build_index([[0, 0, 0], [0.1, 0, 0], [2, 0, 0]], 0.5)
    >>> ball_query(index, 0, 0.5).indices
    array([1])
    """
    _check_center(index, center_idx)
    _check_radius(r)
    if cap is not None and cap < 1:
        msg = f'neighbor cap must be positive, got {cap}'
        raise ValueError(msg)
    p = index.positions[center_idx : center_idx + 1]
    reach = r * (1.0 + _SLACK)
    cand = index.cells_between(
        index.cell_coords(p - reach)[0],
        index.cell_coords(p + reach)[0],
    )
    centers = np.array([center_idx], dtype=np.int64)
    return _ball_rows(index, centers, cand, r, cap)[0]


def radius_neighborhoods(
    index: SpatialIndex,
    r: float,
    cap: int | None = DEFAULT_CAP,
) -> NeighborhoodSet:
    """:func:`ball_query` for every indexed point, as one NeighborhoodSet

    Points are processed per occupied cell, which share one candidate list.
    Results are identical to per-point :func:`ball_query` calls.
    """
    _check_radius(r)
    if cap is not None and cap < 1:
        msg = f'neighbor cap must be positive, got {cap}'
        raise ValueError(msg)
    pos = index.positions
    reach = r * (1.0 + _SLACK)
    per_point: list[Neighborhood | None] = [None] * index.n
    for members in index.grid.values():
        mpos = pos[members]
        cand = index.cells_between(
            index.cell_coords(mpos - reach).min(axis=0),
            index.cell_coords(mpos + reach).max(axis=0),
        )
        for i, row in zip(members, _ball_rows(index, members, cand, r, cap)):
            per_point[i] = row
    rows: list[Neighborhood] = per_point  # type: ignore[assignment]
    counts = np.array([len(row.indices) for row in rows], dtype=np.int64)
    n_empty = int((counts == 0).sum())
    if n_empty == index.n:
        lgr.warning('No point has a neighbor within radius %g', r)
    elif n_empty:
        lgr.debug('%i of %i points without neighbors at r=%g', n_empty, index.n, r)
    return NeighborhoodSet(
        offsets=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
        indices=np.concatenate([row.indices for row in rows]).astype(np.int64),
        edges=np.concatenate([row.edges for row in rows]).reshape(-1, 3),
        distances=np.concatenate([row.distances for row in rows]),
        radius=float(r),
    )


def _knn_all(index: SpatialIndex, centers: np.ndarray, k: int) -> np.ndarray:
    # n <= k: every point, center included, repeated cyclically
    pos = index.positions
    dist = _lengths(pos[None, :, :] - pos[centers][:, None, :])
    order = np.argsort(dist, axis=1, kind='stable')
    return order[:, np.arange(k) % index.n].astype(np.int64)


def _knn_rows(
    index: SpatialIndex,
    centers: np.ndarray,
    cell: np.ndarray,
    k: int,
) -> np.ndarray:
    # grow a cube of cells around ``cell`` until the k-th candidate is
    # provably closer than anything outside of it
    pos = index.positions
    s = 1
    while True:
        lo, hi = cell - s, cell + s
        complete = index.covers(lo, hi)
        cand = index.cells_between(lo, hi)
        if len(cand) > k or complete:
            dist = _lengths(pos[cand][None, :, :] - pos[centers][:, None, :])
            dist[cand[None, :] == centers[:, None]] = np.inf
            order = np.argsort(dist, axis=1, kind='stable')
            kth = dist[np.arange(len(centers)), order[:, k - 1]]
            bound = s * index.cell_size * (1.0 - _SLACK)
            if complete or np.all(kth < bound):
                return cand[order[:, :k]]
        s += 1


def knn_query(index: SpatialIndex, center_idx: int, k: int) -> np.ndarray:
    """The ``k`` nearest points of a center point

    If the cloud has more than ``k`` points, the center is excluded and the
    result lists the ``k`` nearest other points by (distance, index).
    Otherwise all points, the center included, are sorted the same way and
    the whole sorted list is repeated cyclically up to ``k`` entries, so a
    three-point cloud with ``k = 5`` yields ``[c, a, b, c, a]`` rather than
    repeating only the nearest point.
    """
    _check_center(index, center_idx)
    if k < 1:
        msg = f'k must be positive, got {k}'
        raise ValueError(msg)
    centers = np.array([center_idx], dtype=np.int64)
    if index.n <= k:
        return _knn_all(index, centers, k)[0]
    cell = index.cell_coords(index.positions[center_idx : center_idx + 1])[0]
    return _knn_rows(index, centers, cell, k)[0]


def knn_table(index: SpatialIndex, k: int) -> np.ndarray:
    """:func:`knn_query` for every indexed point, as an ``n x k`` table"""
    if k < 1:
        msg = f'k must be positive, got {k}'
        raise ValueError(msg)
    everyone = np.arange(index.n, dtype=np.int64)
    if index.n <= k:
        return _knn_all(index, everyone, k)
    table = np.empty((index.n, k), dtype=np.int64)
    for cell, members in index.grid.items():
        table[members] = _knn_rows(index, members, np.array(cell), k)
    return table

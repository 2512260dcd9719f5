"""Sparse neighborhood aggregation operators

An operator maps per-point reduced features, one block per basis, to the
aggregated edge feature of every point. It is an ``N x (n_bases * N)``
CSR matrix: the entry at row ``p``, column ``b * N + q`` is the weight of
neighbor ``q``'s basis-``b`` feature in the edge feature of ``p``. For
GeoConv that weight is the normalized distance weight times the squared
direction cosine, for the averaging baseline it is ``1 / |N(p)|``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.sparse import csr_matrix

from .geometry import (
    BASES,
    EdgeGeometry,
    edge_geometry,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import DTypeLike

    from geocnn.spatial import NeighborhoodSet

__all__ = [
    'EdgeOperator',
    'MultiViewConfig',
    'aggregation_operators',
    'multiview_operators',
    'uniform_views',
]

lgr = logging.getLogger('geocnn.geoconv')

N_BASES = len(BASES)


@dataclass(frozen=True)
class EdgeOperator:
    """Aggregation matrix with the mask of points that have an edge term

    ``valid`` is false for points without neighbors, and (GeoConv only) for
    points whose neighbors all sit exactly on the radius, so that the
    distance weights sum to zero.
    """

    matrix: csr_matrix
    valid: np.ndarray
    n_bases: int

    @property
    def n_points(self) -> int:
        return int(self.matrix.shape[0])

    def block(self, b: int) -> csr_matrix:
        """The ``N x N`` operator of basis ``b``"""
        n = self.n_points
        return self.matrix[:, b * n : (b + 1) * n]


@dataclass(frozen=True)
class MultiViewConfig:
    """Rotation angles (about z) of the virtual views of the aggregation"""

    angles: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.angles:
            msg = 'multi-view aggregation needs at least one view'
            raise ValueError(msg)
        for a in self.angles:
            if not 0.0 <= a < 2.0 * np.pi:
                msg = f'view angle {a} outside [0, 2 pi)'
                raise ValueError(msg)

    def __len__(self) -> int:
        return len(self.angles)


def uniform_views(count: int) -> MultiViewConfig:
    """``count`` views at angles ``2 pi v / count``"""
    if count < 1:
        msg = f'number of views must be positive, got {count}'
        raise ValueError(msg)
    return MultiViewConfig(tuple(2.0 * np.pi * v / count for v in range(count)))


def aggregation_operators(
    nbrs: NeighborhoodSet,
    *,
    baseline: bool = False,
    geometry: EdgeGeometry | None = None,
    dtype: DTypeLike = np.float64,
) -> EdgeOperator:
    """Build the aggregation operator of a neighborhood set

    With ``baseline``, a single ``N x N`` block averages neighbor features
    uniformly. Otherwise the six basis blocks implement the distance-weighted
    mean of cos²-decomposed edge features; ``geometry`` defaults to
    :func:`~geocnn.geoconv.edge_geometry` of ``nbrs``.
    """
    n = nbrs.n_points
    centers = nbrs.centers
    counts = nbrs.counts
    if baseline:
        valid = counts > 0
        data = 1.0 / counts[centers]
        matrix = csr_matrix(
            (data.astype(dtype), (centers, nbrs.indices)),
            shape=(n, n),
        )
        return EdgeOperator(matrix=matrix, valid=valid, n_bases=1)
    geo = edge_geometry(nbrs) if geometry is None else geometry
    totals = np.bincount(centers, weights=geo.weights, minlength=n)
    valid = totals > 0
    n_flat = int((valid != (counts > 0)).sum())
    if n_flat:
        lgr.debug('%i points with all neighbors on the radius', n_flat)
    norm_weights = geo.weights / np.where(valid, totals, 1.0)[centers]
    data = (norm_weights[:, None] * geo.coefficients).reshape(-1)
    rows = np.repeat(centers, 3)
    cols = (geo.quadrants * n + nbrs.indices[:, None]).reshape(-1)
    matrix = csr_matrix(
        (data.astype(dtype), (rows, cols)),
        shape=(n, N_BASES * n),
    )
    return EdgeOperator(matrix=matrix, valid=valid, n_bases=N_BASES)


def multiview_operators(
    nbrs: NeighborhoodSet,
    views: MultiViewConfig,
    *,
    dtype: DTypeLike = np.float64,
) -> tuple[EdgeOperator, ...]:
    """One GeoConv operator per view, from edge vectors rotated about z

    Quadrants and coefficients are recomputed for the rotated edges, while
    neighborhoods and distance weights are shared by all views.
    """
    return tuple(
        aggregation_operators(nbrs.rotate_edges(angle), dtype=dtype)
        for angle in views.angles
    )


def check_operators(operators: Sequence[EdgeOperator], n_points: int) -> None:
    if not operators:
        msg = 'need at least one aggregation operator'
        raise ValueError(msg)
    for op in operators:
        if op.n_points != n_points:
            msg = f'operator for {op.n_points} points applied to {n_points} rows'
            raise ValueError(msg)

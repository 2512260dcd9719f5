"""Edge geometry: quadrant bases, squared direction cosines, distance weights"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

    from geocnn.spatial import NeighborhoodSet

__all__ = [
    'BASES',
    'BASIS_NAMES',
    'EdgeGeometry',
    'decomposition_coefficients',
    'distance_weight',
    'edge_geometry',
    'quadrant_bases',
]

BASES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)
"""The six signed coordinate bases; ``2k`` and ``2k + 1`` are antipodal"""
BASES.setflags(write=False)

BASIS_NAMES = ('+x', '-x', '+y', '-y', '+z', '-z')


def _select(edges: np.ndarray) -> np.ndarray:
    # per axis k: basis 2k for a non-negative component, 2k + 1 otherwise
    return 2 * np.arange(3) + (edges < 0).astype(np.int64)


def quadrant_bases(edge: ArrayLike) -> np.ndarray:
    """Indices of the three bases spanning the octant of ``edge``

    A zero component selects the positive basis; its coefficient is zero
    either way.

    >>> quadrant_bases([0.2, -0.1, 0.3]).tolist()
    [0, 3, 4]
    """
    e = np.asarray(edge, dtype=np.float64)
    if e.shape != (3,) or not np.any(e):
        msg = f'need a nonzero 3-vector, got {e.tolist()}'
        raise ValueError(msg)
    return _select(e)


def decomposition_coefficients(edge: ArrayLike, bases: ArrayLike) -> np.ndarray:
    """Squared direction cosines of ``edge`` with respect to ``bases``

    For the quadrant bases of an edge they are non-negative and sum to one.

    >>> decomposition_coefficients([3, 4, 0], [0, 2, 4]).tolist()
    [0.36, 0.64, 0.0]
    """
    e = np.asarray(edge, dtype=np.float64)
    if e.shape != (3,) or not np.any(e):
        msg = f'need a nonzero 3-vector, got {e.tolist()}'
        raise ValueError(msg)
    proj = BASES[np.asarray(bases, dtype=np.int64)] @ e
    return proj * proj / (e @ e)


def distance_weight(dist: ArrayLike, r: float) -> np.ndarray:
    """Neighbor weight ``(r - dist)**2``

    Zero at the radius, largest close to the center, monotonically
    decreasing in between.
    """
    d = np.asarray(dist, dtype=np.float64)
    if np.any(d > r) or np.any(d < 0):
        msg = f'distances must be within [0, {r}]'
        raise ValueError(msg)
    return (r - d) ** 2


@dataclass(frozen=True)
class EdgeGeometry:
    """Per-edge quadrant bases, coefficients, and distance weights

    Rows follow the edge order of the :class:`~geocnn.spatial.NeighborhoodSet`
    the geometry was computed for.
    """

    quadrants: np.ndarray
    coefficients: np.ndarray
    weights: np.ndarray


def edge_geometry(nbrs: NeighborhoodSet) -> EdgeGeometry:
    """Vectorized :func:`quadrant_bases`, :func:`decomposition_coefficients`,
    and :func:`distance_weight` for all edges of a neighborhood set"""
    edges = nbrs.edges
    sq = edges * edges
    norm2 = sq.sum(axis=1)
    if np.any(norm2 == 0):
        msg = 'neighborhood contains a zero-length edge'
        raise ValueError(msg)
    quadrants = _select(edges)
    proj = np.einsum('ek,ejk->ej', edges, BASES[quadrants])
    if np.any(proj < 0):
        msg = 'edge projects negatively onto a selected basis'
        raise RuntimeError(msg)
    return EdgeGeometry(
        quadrants=quadrants,
        coefficients=sq / norm2[:, None],
        weights=distance_weight(nbrs.distances, nbrs.radius),
    )

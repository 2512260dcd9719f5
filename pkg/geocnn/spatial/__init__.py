"""Radius and k-nearest-neighbor search on a uniform grid

A :class:`SpatialIndex` buckets positions into cubic cells. GeoConv layers
use radius neighborhoods (built once per layer radius, in CSR layout as a
:class:`NeighborhoodSet`), the point-grouping branch uses k-NN tables.
All queries are exact; ties are broken by lower point index.

.. currentmodule:: geocnn.spatial
.. autosummary::
   :toctree: generated

   SpatialIndex
   NeighborhoodSet
   Neighborhood
   build_index
   ball_query
   knn_query
   radius_neighborhoods
   knn_table
"""

__all__ = [
    'DEFAULT_CAP',
    'Neighborhood',
    'NeighborhoodSet',
    'SpatialIndex',
    'ball_query',
    'build_index',
    'knn_query',
    'knn_table',
    'radius_neighborhoods',
]

from .index import (
    SpatialIndex,
    build_index,
)
from .neighborhood import (
    DEFAULT_CAP,
    Neighborhood,
    NeighborhoodSet,
    ball_query,
    knn_query,
    knn_table,
    radius_neighborhoods,
)

"""The GeoConv operator, its averaging baseline, and multi-view aggregation

GeoConv extracts an edge feature for every neighbor ``q`` of a point ``p``
by decomposing the edge vector ``q - p`` onto the three signed coordinate
bases of its octant. Neighbor features are reduced with one learnable
matrix per basis, weighted by the squared direction cosines, and averaged
with distance weights ``(r - |p - q|)**2``. The averaged edge feature is
batch-normalized, rectified, expanded, and added to the center path
``x_p W_c``.

.. currentmodule:: geocnn.geoconv
.. autosummary::
   :toctree: generated

   BASES
   quadrant_bases
   decomposition_coefficients
   distance_weight
   edge_geometry
   EdgeGeometry
   aggregation_operators
   multiview_operators
   EdgeOperator
   MultiViewConfig
   uniform_views
   GeoConvParams
   geoconv_forward
   geoconv_backward
   geoconv_forward_multiview
   baseline_edge_forward
   bottleneck_forward
   bottleneck_backward
"""

__all__ = [
    'BASES',
    'BASIS_NAMES',
    'BottleneckCache',
    'EdgeGeometry',
    'EdgeOperator',
    'GeoConvParams',
    'MultiViewConfig',
    'aggregation_operators',
    'baseline_edge_forward',
    'bottleneck_backward',
    'bottleneck_forward',
    'decomposition_coefficients',
    'distance_weight',
    'edge_geometry',
    'geoconv_backward',
    'geoconv_forward',
    'geoconv_forward_multiview',
    'multiview_operators',
    'quadrant_bases',
    'uniform_views',
    'with_running',
]

from .geometry import (
    BASES,
    BASIS_NAMES,
    EdgeGeometry,
    decomposition_coefficients,
    distance_weight,
    edge_geometry,
    quadrant_bases,
)
from .layer import (
    BottleneckCache,
    GeoConvParams,
    baseline_edge_forward,
    bottleneck_backward,
    bottleneck_forward,
    geoconv_backward,
    geoconv_forward,
    geoconv_forward_multiview,
    with_running,
)
from .operator import (
    EdgeOperator,
    MultiViewConfig,
    aggregation_operators,
    multiview_operators,
    uniform_views,
)

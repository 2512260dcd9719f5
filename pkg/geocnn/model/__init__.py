"""The Geo-CNN classifier

A model combines a k-NN grouping branch with a GeoConv branch of three
layers at growing radii, concatenates both, and max-pools over all points
before a small classifier head. ``baseline`` configurations swap GeoConv for
unweighted neighbor averaging with a single reduction matrix.

>>> from geocnn.model import preset, reduction_parameter_count
>>> sum(reduction_parameter_count(preset('modelnet40')))
557056
>>> sum(reduction_parameter_count(preset('baseline')))
167936

.. currentmodule:: geocnn.model
.. autosummary::
   :toctree: generated

   GeoCnnConfig
   ConfigError
   preset
   reduction_parameter_count
   Model
   build_model
   batch_geometry
   cloud_geometries
   stack_geometry
   forward_cloud
   forward_batch
   backward_batch
   forward_features
   backward_features
   save_checkpoint
   load_checkpoint
"""

__all__ = [
    'CONFIG_VERSION',
    'PRESETS',
    'BatchGeometry',
    'BatchResult',
    'Checkpoint',
    'CloudGeometry',
    'ConfigError',
    'ForwardCache',
    'GeoCnnConfig',
    'Model',
    'backward_batch',
    'backward_features',
    'batch_geometry',
    'build_model',
    'cloud_geometries',
    'cloud_geometry',
    'forward_batch',
    'forward_cloud',
    'forward_features',
    'load_checkpoint',
    'parameter_shapes',
    'preset',
    'reduction_parameter_count',
    'save_checkpoint',
    'stack_geometry',
]

from .checkpoint import (
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .config import (
    CONFIG_VERSION,
    PRESETS,
    GeoCnnConfig,
    preset,
    reduction_parameter_count,
)
from .exception import ConfigError
from .network import (
    BatchGeometry,
    BatchResult,
    CloudGeometry,
    ForwardCache,
    Model,
    backward_batch,
    backward_features,
    batch_geometry,
    build_model,
    cloud_geometries,
    cloud_geometry,
    forward_batch,
    forward_cloud,
    forward_features,
    parameter_shapes,
    stack_geometry,
)

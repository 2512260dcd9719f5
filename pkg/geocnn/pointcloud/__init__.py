"""Point-cloud representation, file I/O, transformations, and synthetic data

A :class:`PointCloud` is an immutable ``n x c`` float32 matrix (``c`` is 3,
or 6 with unit normals) with an optional class label. Clouds are stored in
the little-endian GPC1 format; datasets are described by a ``path,label``
CSV manifest with a ``classes.txt`` sidecar.

.. currentmodule:: geocnn.pointcloud
.. autosummary::
   :toctree: generated

   PointCloud
   DatasetManifest
   CloudFormatError
   ShapeKind
   load_cloud
   save_cloud
   load_manifest
   save_manifest
   load_dataset
   iter_dataset
   convert_text
   normalize_unit_sphere
   sample_points
   rotate_z
   rotation_matrix_z
   synth_shape
   generate_dataset
"""

__all__ = [
    'CloudFormatError',
    'DatasetManifest',
    'PointCloud',
    'ShapeKind',
    'convert_text',
    'generate_dataset',
    'iter_dataset',
    'load_cloud',
    'load_dataset',
    'load_manifest',
    'normalize_unit_sphere',
    'rotate_z',
    'rotation_matrix_z',
    'sample_points',
    'save_cloud',
    'save_manifest',
    'synth_shape',
]

from .cloud import PointCloud
from .exception import CloudFormatError
from .io import (
    DatasetManifest,
    convert_text,
    iter_dataset,
    load_cloud,
    load_dataset,
    load_manifest,
    save_cloud,
    save_manifest,
)
from .synth import (
    ShapeKind,
    generate_dataset,
    synth_shape,
)
from .transforms import (
    normalize_unit_sphere,
    rotate_z,
    rotation_matrix_z,
    sample_points,
)

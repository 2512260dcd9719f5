"""Pure transformations of point clouds"""

from __future__ import annotations

import logging
import math

import numpy as np

from geocnn.rng import Xoshiro256

from .cloud import PointCloud

__all__ = [
    'normalize_unit_sphere',
    'rotate_z',
    'rotation_matrix_z',
    'sample_points',
]

lgr = logging.getLogger('geocnn.pointcloud')


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center positions at the origin and scale them into the unit ball

    Positions are translated so that their centroid is the origin, and scaled
    so that the largest point norm is 1. If all points coincide, the scale
    factor is 1 and the result is the all-zero cloud. Normals are not
    touched. The computation runs in double precision.
    """
    data = cloud.data.astype(np.float64)
    pos = data[:, :3]
    pos -= pos.mean(axis=0)
    scale = float(np.sqrt((pos * pos).sum(axis=1)).max())
    if scale > 0.0:
        pos /= scale
    else:
        lgr.warning('Normalizing a cloud of %i coincident points', cloud.n)
    return cloud.replace(data)


def sample_points(cloud: PointCloud, n_out: int, seed: int) -> PointCloud:
    """Draw ``n_out`` rows uniformly at random

    Rows are drawn without replacement if the cloud has at least ``n_out``
    points, with replacement otherwise. The draw is fully determined by
    ``seed`` (see :class:`~geocnn.rng.Xoshiro256`).
    """
    if n_out < 1:
        msg = f'number of points to sample must be positive, got {n_out}'
        raise ValueError(msg)
    rng = Xoshiro256(seed)
    idx = rng.choice(cloud.n, n_out, replace=cloud.n < n_out)
    return cloud.replace(cloud.data[idx])


def rotation_matrix_z(angle: float) -> np.ndarray:
    """Standard right-handed rotation about the z axis (double precision)"""
    c, s = math.cos(angle), math.sin(angle)
    return np.array(
        [
            [c, -s, 0.0],
            [s, c, 0.0],
            [0.0, 0.0, 1.0],
        ],
        dtype=np.float64,
    )


def rotate_z(cloud: PointCloud, angle: float) -> PointCloud:
    """Rotate positions, and normals if present, by ``angle`` radians about z"""
    rot = rotation_matrix_z(angle)
    data = cloud.data.astype(np.float64)
    data[:, :3] = data[:, :3] @ rot.T
    if cloud.has_normals:
        data[:, 3:6] = data[:, 3:6] @ rot.T
    return cloud.replace(data)

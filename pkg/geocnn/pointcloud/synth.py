"""Synthetic shape clouds with analytic normals"""

from __future__ import annotations

import logging
import math
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from geocnn.rng import (
    Xoshiro256,
    derive_seed,
)

from .cloud import PointCloud
from .io import (
    MANIFEST_FILENAME,
    PROVENANCE_FILENAME,
    DatasetManifest,
    save_cloud,
    save_manifest,
)
from .transforms import normalize_unit_sphere

if TYPE_CHECKING:
    import os
    from collections.abc import Sequence

__all__ = ['MIN_SYNTH_POINTS', 'ShapeKind', 'generate_dataset', 'synth_shape']

lgr = logging.getLogger('geocnn.pointcloud')

MIN_SYNTH_POINTS = 16


class ShapeKind(Enum):
    """Shape families of the desk-scale classification set

    The enum value is the class id.
    """

    sphere = 0
    cube = 1
    cylinder = 2
    cone = 3

    @classmethod
    def parse(cls, kind: str | int | ShapeKind) -> ShapeKind:
        if isinstance(kind, ShapeKind):
            return kind
        if isinstance(kind, int):
            return cls(kind)
        try:
            return cls[kind.strip().lower()]
        except KeyError:
            msg = (
                f'unknown shape kind {kind!r}, '
                f'choose from {", ".join(k.name for k in cls)}'
            )
            raise ValueError(msg) from None


def synth_shape(
    kind: str | ShapeKind,
    n: int,
    jitter: float,
    seed: int,
) -> PointCloud:
    """Sample ``n`` surface points of a shape, with normals and label

    Surfaces are sampled uniformly by area. Gaussian positional noise with
    standard deviation ``jitter`` is added (normals stay analytic), then the
    cloud is normalized into the unit sphere. Centrally symmetric shapes
    (sphere, cube, cylinder) are sampled in antipodal pairs, which keeps
    their centroid at the origin. The result is fully determined by
    ``seed``.
    """
    kind = ShapeKind.parse(kind)
    if n < MIN_SYNTH_POINTS:
        msg = f'synthetic shapes need at least {MIN_SYNTH_POINTS} points, got {n}'
        raise ValueError(msg)
    if jitter < 0:
        msg = f'jitter must be non-negative, got {jitter}'
        raise ValueError(msg)
    rng = Xoshiro256(seed)
    if kind is ShapeKind.cone:
        pos, nrm = _cone(rng, n)
    else:
        half = (n + 1) // 2
        pos, nrm = _SYMMETRIC_SAMPLERS[kind](rng, half)
        pos = np.concatenate([pos, -pos])[:n]
        nrm = np.concatenate([nrm, -nrm])[:n]
    if jitter > 0:
        pos = pos + jitter * rng.normal(3 * n).reshape(n, 3)
    cloud = PointCloud(np.hstack([pos, nrm]), label=kind.value)
    return normalize_unit_sphere(cloud)


def _unit_vectors(rng: Xoshiro256, m: int) -> np.ndarray:
    v = rng.normal(3 * m).reshape(m, 3)
    norms = np.linalg.norm(v, axis=1)
    # a zero draw has probability zero, but must not divide by zero
    v[norms == 0] = (1.0, 0.0, 0.0)
    norms[norms == 0] = 1.0
    return v / norms[:, None]


def _sphere(rng: Xoshiro256, m: int) -> tuple[np.ndarray, np.ndarray]:
    pos = _unit_vectors(rng, m)
    return pos, pos.copy()


def _cube(rng: Xoshiro256, m: int) -> tuple[np.ndarray, np.ndarray]:
    # all six faces have the same area
    faces = rng.integers(6, m)
    uv = rng.random(2 * m).reshape(m, 2) * 2.0 - 1.0
    pos = np.empty((m, 3))
    nrm = np.zeros((m, 3))
    for i, face in enumerate(faces):
        axis, sign = divmod(int(face), 2)
        others = [a for a in range(3) if a != axis]
        value = -1.0 if sign else 1.0
        pos[i, axis] = value
        pos[i, others] = uv[i]
        nrm[i, axis] = value
    return pos, nrm


def _cylinder(rng: Xoshiro256, m: int) -> tuple[np.ndarray, np.ndarray]:
    # radius 1, z in [-1, 1]: side area 4 pi, caps 2 pi together
    pos = np.empty((m, 3))
    nrm = np.zeros((m, 3))
    for i in range(m):
        u = rng.uniform()
        phi = 2.0 * math.pi * rng.uniform()
        if u < 2.0 / 3.0:
            pos[i] = (math.cos(phi), math.sin(phi), 2.0 * rng.uniform() - 1.0)
            nrm[i] = (math.cos(phi), math.sin(phi), 0.0)
        else:
            rho = math.sqrt(rng.uniform())
            z = 1.0 if rng.uniform() < 0.5 else -1.0  # noqa: PLR2004
            pos[i] = (rho * math.cos(phi), rho * math.sin(phi), z)
            nrm[i] = (0.0, 0.0, z)
    return pos, nrm


def _cone(rng: Xoshiro256, m: int) -> tuple[np.ndarray, np.ndarray]:
    # apex at z=1, base disk of radius 1 at z=-1
    side_area = math.pi * math.sqrt(5.0)
    p_side = side_area / (side_area + math.pi)
    slope = 1.0 / math.sqrt(1.25)
    pos = np.empty((m, 3))
    nrm = np.zeros((m, 3))
    for i in range(m):
        u = rng.uniform()
        phi = 2.0 * math.pi * rng.uniform()
        # 1 - uniform() is in (0, 1], keeps samples off the apex
        t = math.sqrt(1.0 - rng.uniform())
        c, s = math.cos(phi), math.sin(phi)
        if u < p_side:
            pos[i] = (t * c, t * s, 1.0 - 2.0 * t)
            nrm[i] = (c * slope, s * slope, 0.5 * slope)
        else:
            pos[i] = (t * c, t * s, -1.0)
            nrm[i] = (0.0, 0.0, -1.0)
    return pos, nrm


_SYMMETRIC_SAMPLERS = {
    ShapeKind.sphere: _sphere,
    ShapeKind.cube: _cube,
    ShapeKind.cylinder: _cylinder,
}


def generate_dataset(
    out_dir: str | os.PathLike,
    classes: Sequence[str | ShapeKind],
    per_class: int,
    n_points: int,
    jitter: float,
    seed: int,
) -> DatasetManifest:
    """Write a labeled synthetic dataset into ``out_dir``

    Every class gets ``per_class`` clouds, stored as
    ``<class>/<class>_<i>.gpc``. Class ids are positions in ``classes``.
    Next to the clouds go ``manifest.csv``, ``classes.txt``, and a
    ``dataset.cfg`` recording the generation parameters. Cloud ``i`` of a
    class is drawn with a seed derived from ``seed``, the class, and ``i``,
    so a dataset is byte-identical across runs.
    """
    kinds = [ShapeKind.parse(k) for k in classes]
    if not kinds:
        msg = 'need at least one class'
        raise ValueError(msg)
    if len(set(kinds)) != len(kinds):
        msg = f'duplicate classes in {[k.name for k in kinds]}'
        raise ValueError(msg)
    if per_class < 1:
        msg = f'clouds per class must be positive, got {per_class}'
        raise ValueError(msg)
    out = Path(out_dir)
    entries = []
    for label, kind in enumerate(kinds):
        (out / kind.name).mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rel = Path(kind.name, f'{kind.name}_{i:04d}.gpc')
            cloud = synth_shape(
                kind, n_points, jitter, derive_seed(seed, 'data', kind.name, i)
            )
            save_cloud(cloud.relabel(label), out / rel)
            entries.append((rel, label))
    manifest = DatasetManifest(
        entries=tuple(entries),
        class_names=tuple(k.name for k in kinds),
        seed=seed,
        root=out,
    )
    save_manifest(manifest, out / MANIFEST_FILENAME)
    (out / PROVENANCE_FILENAME).write_text(
        f'seed={seed}\nper_class={per_class}\npoints={n_points}\n'
        f'jitter={jitter!r}\n',
        encoding='utf-8',
    )
    lgr.info(
        'Generated %i clouds of %i classes in %s (seed %i)',
        len(entries),
        len(kinds),
        out,
        seed,
    )
    return manifest

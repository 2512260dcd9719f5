from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ['NORMAL_TOLERANCE', 'PointCloud']

NORMAL_TOLERANCE = 1e-3
"""Maximum deviation of a stored normal's length from 1"""

_SUPPORTED_CHANNELS = (3, 6)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ``n x c`` matrix of 32-bit reals with an optional class label

    Columns 0-2 are xyz positions in model units, columns 3-5 (if present)
    are unit surface normals. Instances are immutable: ``data`` is copied on
    construction and flagged read-only, so clouds can be shared across
    workers without copying.

    >>> cloud = PointCloud([[0, 0, 0], [1, 0, 0]], label=2)
    >>> cloud.n, cloud.channels, cloud.label
    (2, 3, 2)
    """

    data: np.ndarray
    label: int | None = None

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 2:  # noqa: PLR2004
            msg = f'point cloud data must be a matrix, got {data.ndim} dimensions'
            raise ValueError(msg)
        if data.shape[0] < 1:
            msg = 'point cloud must contain at least one point'
            raise ValueError(msg)
        if data.shape[1] not in _SUPPORTED_CHANNELS:
            msg = f'unsupported channel count {data.shape[1]}'
            raise ValueError(msg)
        if not np.all(np.isfinite(data)):
            bad = int(np.flatnonzero(~np.isfinite(data.ravel()))[0])
            msg = f'non-finite value at row {bad // data.shape[1]}'
            raise ValueError(msg)
        if data.shape[1] == 6:  # noqa: PLR2004
            norms = np.linalg.norm(data[:, 3:6].astype(np.float64), axis=1)
            off = np.abs(norms - 1.0) > NORMAL_TOLERANCE
            if np.any(off):
                row = int(np.flatnonzero(off)[0])
                msg = f'normal of row {row} has length {norms[row]:.6g}, not 1'
                raise ValueError(msg)
        if self.label is not None and self.label < 0:
            msg = f'class label must be non-negative, got {self.label}'
            raise ValueError(msg)
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def n(self) -> int:
        """Number of points"""
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[1])

    @property
    def positions(self) -> np.ndarray:
        """Read-only ``n x 3`` view of the xyz columns"""
        return self.data[:, :3]

    @property
    def normals(self) -> np.ndarray | None:
        """Read-only ``n x 3`` view of the normals, or ``None``"""
        return self.data[:, 3:6] if self.channels == 6 else None  # noqa: PLR2004

    @property
    def has_normals(self) -> bool:
        return self.channels == 6  # noqa: PLR2004

    def replace(self, data: np.ndarray) -> PointCloud:
        """Return a new cloud with the same label and new ``data``"""
        return PointCloud(data, label=self.label)

    def relabel(self, label: int | None) -> PointCloud:
        return PointCloud(self.data, label=label)

    def with_channels(self, channels: int) -> PointCloud:
        """Return the cloud reduced to ``channels`` columns (drops normals)"""
        if channels == self.channels:
            return self
        if channels == 3 and self.channels == 6:  # noqa: PLR2004
            return PointCloud(self.data[:, :3], label=self.label)
        msg = f'cannot convert a {self.channels}-channel cloud to {channels} channels'
        raise ValueError(msg)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return False
        return self.label == other.label and np.array_equal(self.data, other.data)

    def __hash__(self) -> int:
        return hash((self.label, self.data.tobytes()))

    def __repr__(self) -> str:
        return f'PointCloud(n={self.n}, channels={self.channels}, label={self.label})'

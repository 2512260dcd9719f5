"""Uniform grid over point positions"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product
from types import MappingProxyType
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import ArrayLike

__all__ = ['SpatialIndex', 'build_index']

lgr = logging.getLogger('geocnn.spatial')

Cell = tuple[int, int, int]


@dataclass(frozen=True)
class SpatialIndex:
    """Point indices bucketed into cubic cells of edge length ``cell_size``

    Cell coordinates of a position ``p`` are ``floor((p - origin) /
    cell_size)``. Each cell lists its point indices in ascending order. The
    index and the positions it refers to are read-only, so a built index can
    be queried from many threads at once.
    """

    positions: np.ndarray
    cell_size: float
    origin: np.ndarray
    grid: Mapping[Cell, np.ndarray]
    occupied: np.ndarray
    members: tuple[np.ndarray, ...]
    lo_cell: np.ndarray
    hi_cell: np.ndarray

    @property
    def n(self) -> int:
        return int(self.positions.shape[0])

    def cell_coords(self, points: np.ndarray) -> np.ndarray:
        """Integer cell coordinates of ``points`` (``m x 3``)"""
        return np.floor((points - self.origin) / self.cell_size).astype(np.int64)

    def cells_between(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Sorted point indices of all occupied cells in the box ``[lo, hi]``"""
        lo = np.maximum(lo, self.lo_cell)
        hi = np.minimum(hi, self.hi_cell)
        if np.any(lo > hi):
            return np.empty(0, dtype=np.int64)
        if np.prod(hi - lo + 1) > len(self.occupied):
            # large boxes: filter the occupied cells instead
            inside = np.all((self.occupied >= lo) & (self.occupied <= hi), axis=1)
            found = [self.members[i] for i in np.flatnonzero(inside)]
        else:
            found = [
                self.grid[cell]
                for cell in product(
                    range(lo[0], hi[0] + 1),
                    range(lo[1], hi[1] + 1),
                    range(lo[2], hi[2] + 1),
                )
                if cell in self.grid
            ]
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(found))

    def covers(self, lo: np.ndarray, hi: np.ndarray) -> bool:
        """Whether the box ``[lo, hi]`` contains every occupied cell"""
        return bool(np.all(lo <= self.lo_cell) and np.all(hi >= self.hi_cell))


def build_index(positions: ArrayLike, cell_size: float) -> SpatialIndex:
    """Bucket ``n x 3`` positions into a uniform grid

    Positions are copied to double precision. The grid origin is the
    component-wise minimum of the positions.

    Raises
    ------
    ValueError
      For an empty or malformed position array, non-finite coordinates, or
      a non-positive ``cell_size``.
    """
    pos = np.array(positions, dtype=np.float64, copy=True)
    if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:  # noqa: PLR2004
        msg = f'positions must be an n x 3 matrix with n >= 1, got {pos.shape}'
        raise ValueError(msg)
    if not np.all(np.isfinite(pos)):
        row = int(np.flatnonzero(~np.isfinite(pos).all(axis=1))[0])
        msg = f'non-finite position at row {row}'
        raise ValueError(msg)
    if not cell_size > 0:
        msg = f'cell size must be positive, got {cell_size}'
        raise ValueError(msg)
    pos.setflags(write=False)
    origin = pos.min(axis=0)
    origin.setflags(write=False)
    cells = np.floor((pos - origin) / cell_size).astype(np.int64)
    occupied, inverse, counts = np.unique(
        cells, axis=0, return_inverse=True, return_counts=True
    )
    # stable, hence ascending point indices within each cell
    order = np.argsort(inverse.reshape(-1), kind='stable')
    members = tuple(np.split(order, np.cumsum(counts)[:-1]))
    grid = {}
    for cell, idx in zip(occupied, members):
        idx.setflags(write=False)
        grid[(int(cell[0]), int(cell[1]), int(cell[2]))] = idx
    occupied.setflags(write=False)
    lgr.debug(
        'Indexed %i points in %i cells of size %g',
        len(pos),
        len(grid),
        cell_size,
    )
    return SpatialIndex(
        positions=pos,
        cell_size=float(cell_size),
        origin=origin,
        grid=MappingProxyType(grid),
        occupied=occupied,
        members=members,
        lo_cell=occupied.min(axis=0),
        hi_cell=occupied.max(axis=0),
    )

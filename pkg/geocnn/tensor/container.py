"""GCK1: a flat container of named float32 matrices plus a text block

Layout (little-endian): magic ``GCK1``, u32 version, u64 tensor count, then
per tensor a u16 name length, the UTF-8 name, u32 rows, u32 cols, and
``rows * cols`` float32 values in row-major order. A u32 length and a UTF-8
``key=value`` text block close the file.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .exception import CheckpointError

if TYPE_CHECKING:
    import os
    from collections.abc import Mapping

__all__ = ['GCK1_MAGIC', 'GCK1_VERSION', 'load_tensors', 'save_tensors']

lgr = logging.getLogger('geocnn.tensor')

GCK1_MAGIC = b'GCK1'
GCK1_VERSION = 1

_HEAD = struct.Struct('<4sIQ')
_NAME_LEN = struct.Struct('<H')
_SHAPE = struct.Struct('<II')
_META_LEN = struct.Struct('<I')
_DTYPE = np.dtype('<f4')


def _as_matrix(name: str, value: np.ndarray) -> np.ndarray:
    a = np.asarray(value)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(1, -1)
    if a.ndim == 2:  # noqa: PLR2004
        return a
    msg = f'tensor {name!r} has {a.ndim} dimensions, at most 2 are supported'
    raise ValueError(msg)


def save_tensors(
    path: str | os.PathLike,
    tensors: Mapping[str, np.ndarray],
    metadata: str = '',
) -> None:
    """Write ``tensors`` (in mapping order) and ``metadata`` to ``path``

    Vectors are stored as ``1 x n`` and scalars as ``1 x 1`` matrices. All
    values are converted to float32.
    """
    chunks = [_HEAD.pack(GCK1_MAGIC, GCK1_VERSION, len(tensors))]
    for name, value in tensors.items():
        encoded = name.encode('utf-8')
        if len(encoded) > 0xFFFF:  # noqa: PLR2004
            msg = f'tensor name too long: {name[:40]!r}...'
            raise ValueError(msg)
        mat = _as_matrix(name, value)
        chunks.append(_NAME_LEN.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_SHAPE.pack(*mat.shape))
        chunks.append(np.ascontiguousarray(mat, dtype=_DTYPE).tobytes())
    meta = metadata.encode('utf-8')
    chunks.append(_META_LEN.pack(len(meta)))
    chunks.append(meta)
    Path(path).write_bytes(b''.join(chunks))
    lgr.debug('Wrote %i tensors to %s', len(tensors), path)


def load_tensors(
    path: str | os.PathLike,
) -> tuple[dict[str, np.ndarray], str]:
    """Read a GCK1 file

    Returns the tensors, as writable float32 matrices in file order, and the
    metadata text.

    Raises
    ------
    CheckpointError
      On a bad magic or version, truncation, duplicate names, invalid
      UTF-8, or trailing bytes. The error names the byte offset.
    """
    raw = Path(path).read_bytes()
    pos = 0

    def take(size: int, what: str) -> bytes:
        nonlocal pos
        if pos + size > len(raw):
            msg = f'truncated file, expected {what}'
            raise CheckpointError(path, msg, offset=pos)
        chunk = raw[pos : pos + size]
        pos += size
        return chunk

    magic, version, count = _HEAD.unpack(take(_HEAD.size, 'header'))
    if magic != GCK1_MAGIC:
        raise CheckpointError(path, f'bad magic {magic!r}', offset=0)
    if version != GCK1_VERSION:
        raise CheckpointError(path, f'unsupported version {version}', offset=4)
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        start = pos
        (name_len,) = _NAME_LEN.unpack(take(_NAME_LEN.size, 'name length'))
        try:
            name = take(name_len, 'tensor name').decode('utf-8')
        except UnicodeDecodeError:
            raise CheckpointError(path, 'invalid tensor name', offset=start) from None
        if name in tensors:
            raise CheckpointError(path, f'duplicate tensor {name!r}', offset=start)
        rows, cols = _SHAPE.unpack(take(_SHAPE.size, f'shape of {name!r}'))
        payload = take(rows * cols * _DTYPE.itemsize, f'values of {name!r}')
        values = np.frombuffer(payload, dtype=_DTYPE)
        tensors[name] = values.reshape(rows, cols).copy()
    (meta_len,) = _META_LEN.unpack(take(_META_LEN.size, 'metadata length'))
    meta_start = pos
    try:
        metadata = take(meta_len, 'metadata').decode('utf-8')
    except UnicodeDecodeError:
        raise CheckpointError(path, 'invalid metadata', offset=meta_start) from None
    if pos != len(raw):
        raise CheckpointError(path, 'trailing bytes', offset=pos)
    return tensors, metadata

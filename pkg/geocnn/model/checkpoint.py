"""Model and optimizer state in a GCK1 container"""

from __future__ import annotations

import logging
from typing import (
    TYPE_CHECKING,
    NamedTuple,
)

import numpy as np

from geocnn.tensor import (
    AdamState,
    CheckpointError,
    load_tensors,
    save_tensors,
)

from .config import GeoCnnConfig
from .exception import ConfigError
from .network import (
    Model,
    parameter_shapes,
)

if TYPE_CHECKING:
    import os
    from collections.abc import Mapping

__all__ = ['Checkpoint', 'load_checkpoint', 'save_checkpoint']

lgr = logging.getLogger('geocnn.model')

_STEP_KEY = 'optimizer.t'


class Checkpoint(NamedTuple):
    """A loaded model, its optimizer state if saved, and extra metadata items"""

    model: Model
    optimizer: AdamState | None
    info: dict[str, str]


def save_checkpoint(
    path: str | os.PathLike,
    model: Model,
    optimizer: AdamState | None = None,
    info: Mapping[str, object] | None = None,
) -> None:
    """Write parameters, buffers, and (optionally) Adam moments

    Moments are stored as ``<name>.m`` and ``<name>.v`` after the parameters.
    The metadata holds the model configuration, the optimizer step, and the
    items of ``info``. Values are stored in single precision.
    """
    tensors = dict(model.params)
    meta = [model.config.to_text()]
    if optimizer is not None:
        for name in model.trainable():
            tensors[f'{name}.m'] = optimizer.m[name]
            tensors[f'{name}.v'] = optimizer.v[name]
        meta.append(f'{_STEP_KEY}={optimizer.t}\n')
    for key, value in (info or {}).items():
        if '=' in key or '\n' in f'{key}{value}':
            msg = f'cannot store metadata item {key!r}'
            raise ValueError(msg)
        meta.append(f'{key}={value}\n')
    save_tensors(path, tensors, ''.join(meta))
    lgr.info('Saved checkpoint %s', path)


def _as_shape(
    path: str | os.PathLike,
    name: str,
    value: np.ndarray,
    shape: tuple[int, ...],
) -> np.ndarray:
    stored = (1, shape[0]) if len(shape) == 1 else shape
    if value.shape != stored:
        msg = f'tensor {name!r} has shape {value.shape}, expected {stored}'
        raise CheckpointError(path, msg)
    return value.reshape(shape)


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`

    Raises
    ------
    CheckpointError
      On container errors, an unreadable configuration, or tensors that do
      not match the configuration.
    """
    tensors, meta = load_tensors(path)
    try:
        config = GeoCnnConfig.from_text(meta)
    except ConfigError as e:
        raise CheckpointError(path, str(e)) from e
    shapes = parameter_shapes(config)
    params = {}
    for name, shape in shapes.items():
        if name not in tensors:
            raise CheckpointError(path, f'missing tensor {name!r}')
        params[name] = _as_shape(path, name, tensors.pop(name), shape)
    model = Model(config, params)

    info = {}
    step = None
    for line in meta.splitlines():
        key, _, value = line.partition('=')
        if key == _STEP_KEY:
            step = int(value)
        elif key and not key.startswith('model.'):
            info[key] = value

    optimizer = None
    if step is not None:
        m, v = {}, {}
        for name in model.trainable():
            for moments, suffix in ((m, 'm'), (v, 'v')):
                key = f'{name}.{suffix}'
                if key not in tensors:
                    raise CheckpointError(path, f'missing tensor {key!r}')
                moments[name] = _as_shape(path, key, tensors.pop(key), shapes[name])
        optimizer = AdamState(m=m, v=v, t=step)
    if tensors:
        msg = f'unexpected tensors {sorted(tensors)}'
        raise CheckpointError(path, msg)
    lgr.debug('Loaded checkpoint %s (optimizer state: %s)', path, step is not None)
    return Checkpoint(model, optimizer, info)

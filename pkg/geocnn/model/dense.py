"""Fully connected blocks: FC, optionally followed by batch norm and ReLU"""

from __future__ import annotations

from typing import (
    TYPE_CHECKING,
    NamedTuple,
)

import numpy as np

from geocnn.tensor import (
    BatchNormCache,
    LinearCache,
    batchnorm_backward,
    batchnorm_forward,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
)

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import DTypeLike

    from geocnn.rng import Xoshiro256

__all__ = [
    'DenseCache',
    'dense_backward',
    'dense_forward',
    'dense_init',
]


class DenseCache(NamedTuple):
    linear: LinearCache
    bn: BatchNormCache | None
    relu_mask: np.ndarray | None
    running: tuple[np.ndarray, np.ndarray] | None


def dense_init(
    rng: Xoshiro256,
    c_in: int,
    c_out: int,
    *,
    norm: bool = True,
    dtype: DTypeLike = np.float32,
) -> dict[str, np.ndarray]:
    params = {
        'W': rng.glorot(c_in, c_out, (c_in, c_out)).astype(dtype),
        'b': np.zeros(c_out, dtype=dtype),
    }
    if norm:
        params.update(
            gamma=np.ones(c_out, dtype=dtype),
            beta=np.zeros(c_out, dtype=dtype),
            running_mean=np.zeros(c_out, dtype=dtype),
            running_var=np.ones(c_out, dtype=dtype),
        )
    return params


def dense_forward(
    x: np.ndarray,
    params: Mapping[str, np.ndarray],
    *,
    train: bool,
) -> tuple[np.ndarray, DenseCache]:
    """``ReLU(BN(x W + b))``, or just ``x W + b`` for a block without ``gamma``"""
    y, linear = linear_forward(x, params['W'], params['b'])
    if 'gamma' not in params:
        return y, DenseCache(linear, None, None, None)
    y, bn, running = batchnorm_forward(
        y,
        params['gamma'],
        params['beta'],
        params['running_mean'],
        params['running_var'],
        train=train,
    )
    y, mask = relu_forward(y)
    return y, DenseCache(linear, bn, mask, running)


def dense_backward(
    cache: DenseCache,
    grad_out: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    grads = {}
    if cache.bn is not None:
        grad_out = relu_backward(cache.relu_mask, grad_out)
        grad_out, grads['gamma'], grads['beta'] = batchnorm_backward(
            cache.bn, grad_out
        )
    grad_x, grads['W'], grads['b'] = linear_backward(cache.linear, grad_out)
    return grad_x, grads

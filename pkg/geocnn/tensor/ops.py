"""Dense neural-network primitives with explicit backward passes

Every ``*_forward`` returns its output together with a cache holding what
the matching ``*_backward`` needs. Computation happens in the dtype of the
inputs: float32 for training and inference, float64 for gradient checks.
"""

from __future__ import annotations

import logging
from dataclasses import (
    dataclass,
    field,
)
from typing import (
    TYPE_CHECKING,
    NamedTuple,
)

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Mapping

__all__ = [
    'AdamState',
    'BatchNormCache',
    'LinearCache',
    'PoolCache',
    'adam_step',
    'batchnorm_backward',
    'batchnorm_forward',
    'channelwise_maxpool_backward',
    'channelwise_maxpool_forward',
    'check_finite',
    'enable_finite_checks',
    'group_maxpool_backward',
    'group_maxpool_forward',
    'linear_backward',
    'linear_forward',
    'relu_backward',
    'relu_forward',
    'softmax_cross_entropy',
]

lgr = logging.getLogger('geocnn.tensor')

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_finite_checks = False


def enable_finite_checks(enabled: bool = True) -> None:  # noqa: FBT001, FBT002
    """Make :func:`check_finite` verify forward outputs"""
    global _finite_checks  # noqa: PLW0603
    _finite_checks = enabled


def check_finite(x: np.ndarray, what: str) -> np.ndarray:
    """Return ``x``, raising ``FloatingPointError`` on NaN/Inf if checks are on"""
    if _finite_checks and not np.all(np.isfinite(x)):
        msg = f'non-finite values in {what}'
        raise FloatingPointError(msg)
    return x


class LinearCache(NamedTuple):
    x: np.ndarray
    W: np.ndarray


def linear_forward(
    x: np.ndarray,
    W: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, LinearCache]:
    """Fully connected layer ``y = x W + b``"""
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[0]:  # noqa: PLR2004
        msg = f'cannot multiply {x.shape} by {W.shape}'
        raise ValueError(msg)
    if b.shape != (W.shape[1],):
        msg = f'bias of shape {b.shape} does not match {W.shape[1]} outputs'
        raise ValueError(msg)
    y = x @ W + b
    return check_finite(y, 'linear output'), LinearCache(x, W)


def linear_backward(
    cache: LinearCache,
    grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(grad_x, grad_W, grad_b)``"""
    return (
        grad_out @ cache.W.T,
        cache.x.T @ grad_out,
        grad_out.sum(axis=0),
    )


def relu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise ``max(0, x)``; the cache is the mask of positive inputs"""
    mask = x > 0
    return np.where(mask, x, 0).astype(x.dtype, copy=False), mask


def relu_backward(mask: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # the gradient at 0 is taken as 0
    return np.where(mask, grad_out, 0).astype(grad_out.dtype, copy=False)


class BatchNormCache(NamedTuple):
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    train: bool


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    *,
    train: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> tuple[np.ndarray, BatchNormCache, tuple[np.ndarray, np.ndarray]]:
    """Per-channel batch normalization over all rows of ``x``

    In train mode the batch statistics normalize ``x`` and the returned
    running statistics are updated with ``momentum`` (the running variance
    uses the unbiased estimate). In eval mode the running statistics
    normalize ``x`` and are returned unchanged.

    Returns
    -------
    tuple
      Output, cache for :func:`batchnorm_backward`, and the
      ``(running_mean, running_var)`` pair after this call.
    """
    n = x.shape[0]
    if train:
        if n < 2:  # noqa: PLR2004
            msg = f'train-mode batch normalization needs at least 2 rows, got {n}'
            raise ValueError(msg)
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        new_mean = (1.0 - momentum) * running_mean + momentum * mean
        new_var = (1.0 - momentum) * running_var + momentum * var * (n / (n - 1))
        running = (
            new_mean.astype(running_mean.dtype),
            new_var.astype(running_var.dtype),
        )
    else:
        mean, var = running_mean, running_var
        running = (running_mean, running_var)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    x_hat = (x - mean.astype(x.dtype)) * inv_std
    y = gamma * x_hat + beta
    return (
        check_finite(y, 'batch normalization output'),
        BatchNormCache(x_hat, inv_std, gamma, train),
        running,
    )


def batchnorm_backward(
    cache: BatchNormCache,
    grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(grad_x, grad_gamma, grad_beta)``"""
    x_hat, inv_std, gamma, train = cache
    grad_gamma = (grad_out * x_hat).sum(axis=0)
    grad_beta = grad_out.sum(axis=0)
    g = grad_out * gamma
    if not train:
        return g * inv_std, grad_gamma, grad_beta
    n = grad_out.shape[0]
    grad_x = (inv_std / n) * (
        n * g - g.sum(axis=0) - x_hat * (g * x_hat).sum(axis=0)
    )
    return grad_x, grad_gamma, grad_beta


class PoolCache(NamedTuple):
    argmax: np.ndarray
    group_size: int


def group_maxpool_forward(
    x: np.ndarray,
    group_size: int,
) -> tuple[np.ndarray, PoolCache]:
    """Channel-wise max over consecutive groups of ``group_size`` rows

    ``x`` has ``G * group_size`` rows; the result has ``G``. Ties resolve to
    the first row of a group, which also receives the gradient.
    """
    if group_size < 1 or x.shape[0] % group_size or x.shape[0] == 0:
        msg = f'cannot pool {x.shape[0]} rows in groups of {group_size}'
        raise ValueError(msg)
    grouped = x.reshape(-1, group_size, x.shape[1])
    argmax = grouped.argmax(axis=1)
    y = np.take_along_axis(grouped, argmax[:, None, :], axis=1)[:, 0, :]
    return y, PoolCache(argmax, group_size)


def group_maxpool_backward(cache: PoolCache, grad_out: np.ndarray) -> np.ndarray:
    n_groups, channels = grad_out.shape
    grad = np.zeros((n_groups, cache.group_size, channels), dtype=grad_out.dtype)
    np.put_along_axis(grad, cache.argmax[:, None, :], grad_out[:, None, :], axis=1)
    return grad.reshape(n_groups * cache.group_size, channels)


def channelwise_maxpool_forward(x: np.ndarray) -> tuple[np.ndarray, PoolCache]:
    """Per-channel max over all rows, a ``1 x C`` result"""
    return group_maxpool_forward(x, x.shape[0])


def channelwise_maxpool_backward(
    cache: PoolCache,
    grad_out: np.ndarray,
) -> np.ndarray:
    return group_maxpool_backward(cache, grad_out)


def softmax_cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray | list[int] | int,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of rows of ``logits`` against class ids

    Returns the loss and its gradient with respect to ``logits``
    (``(softmax - onehot) / rows``). The log-sum-exp is shifted by the row
    maximum, so large logits do not overflow.
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    m, k = logits.shape
    if k < 2:  # noqa: PLR2004
        msg = f'need at least 2 classes, got {k}'
        raise ValueError(msg)
    if labels.shape != (m,):
        msg = f'{labels.shape[0]} labels for {m} rows of logits'
        raise ValueError(msg)
    if np.any((labels < 0) | (labels >= k)):
        msg = f'class label outside [0, {k}): {labels.tolist()}'
        raise ValueError(msg)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    rows = np.arange(m)
    log_prob = shifted[rows, labels] - np.log(total[:, 0])
    loss = float(-log_prob.mean())
    grad = exp / total
    grad[rows, labels] -= 1.0
    return loss, (grad / m).astype(logits.dtype, copy=False)


@dataclass
class AdamState:
    """First and second moment estimates per parameter, and the step count"""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> AdamState:
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    *,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update

    Returns new parameter and moment arrays; the inputs are left untouched.
    Parameters without a gradient keep their value.
    """
    t = state.t + 1
    new_params = dict(params)
    new_state = AdamState(m=dict(state.m), v=dict(state.v), t=t)
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    for name in sorted(grads):
        p, g = params[name], grads[name]
        if g.shape != p.shape:
            msg = f'gradient of {name!r} has shape {g.shape}, expected {p.shape}'
            raise ValueError(msg)
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        step = lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
        new_params[name] = (p - step).astype(p.dtype, copy=False)
        new_state.m[name] = m.astype(p.dtype, copy=False)
        new_state.v[name] = v.astype(p.dtype, copy=False)
    return new_params, new_state

"""The GeoConv bottleneck: center path plus reduced, aggregated edge path

For every point ``p``::

    y_p = x_p W_c + b_c + [valid_p] * (ReLU(BN(agg_p)) W_exp + b_exp)

where ``agg`` applies an :class:`~geocnn.geoconv.EdgeOperator` to the
per-basis reductions ``x W_b`` of all points. The reductions are computed
once per point for all bases and shared by every neighbor and view.
Batch-norm statistics are taken over valid points only.
"""

from __future__ import annotations

from dataclasses import (
    dataclass,
    fields,
    replace,
)
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
    check_finite,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
)

from .operator import (
    N_BASES,
    EdgeOperator,
    MultiViewConfig,
    aggregation_operators,
    check_operators,
    multiview_operators,
)

if TYPE_CHECKING:
    from collections.abc import (
        Mapping,
        Sequence,
    )

    from numpy.typing import DTypeLike

    from geocnn.rng import Xoshiro256
    from geocnn.spatial import NeighborhoodSet

__all__ = [
    'BottleneckCache',
    'GeoConvParams',
    'baseline_edge_forward',
    'bottleneck_backward',
    'bottleneck_forward',
    'geoconv_backward',
    'geoconv_forward',
    'geoconv_forward_multiview',
    'with_running',
]


@dataclass(frozen=True)
class GeoConvParams:
    """Weights and batch-norm state of one GeoConv (or baseline) layer

    ``W_dir`` holds the direction-associated reduction matrices side by side,
    ``W_dir[:, b * c_reduc : (b + 1) * c_reduc]`` being ``W_b``. The
    averaging baseline has a single block. ``view_weights`` are the learned
    weights of multi-view aggregation, ``None`` without it.
    """

    W_c: np.ndarray
    b_c: np.ndarray
    W_dir: np.ndarray
    W_exp: np.ndarray
    b_exp: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    view_weights: np.ndarray | None = None

    BUFFERS = ('running_mean', 'running_var')

    def __post_init__(self) -> None:
        c_in, c_out = self.W_c.shape
        c_reduc = self.W_exp.shape[0]
        expected = {
            'b_c': (c_out,),
            'W_exp': (c_reduc, c_out),
            'b_exp': (c_out,),
            'gamma': (c_reduc,),
            'beta': (c_reduc,),
            'running_mean': (c_reduc,),
            'running_var': (c_reduc,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                msg = (
                    f'{name} has shape {getattr(self, name).shape}, '
                    f'expected {shape}'
                )
                raise ValueError(msg)
        if (
            self.W_dir.shape[0] != c_in
            or self.W_dir.shape[1] % c_reduc
            or self.W_dir.shape[1] // c_reduc not in (1, N_BASES)
        ):
            msg = (
                f'W_dir has shape {self.W_dir.shape}, expected '
                f'({c_in}, {c_reduc}) or ({c_in}, {N_BASES * c_reduc})'
            )
            raise ValueError(msg)
        if self.view_weights is not None and self.view_weights.ndim != 1:
            msg = 'view weights must be a vector'
            raise ValueError(msg)

    @property
    def c_in(self) -> int:
        return int(self.W_c.shape[0])

    @property
    def c_out(self) -> int:
        return int(self.W_c.shape[1])

    @property
    def c_reduc(self) -> int:
        return int(self.W_exp.shape[0])

    @property
    def n_bases(self) -> int:
        return int(self.W_dir.shape[1] // self.c_reduc)

    def W_b(self, b: int) -> np.ndarray:  # noqa: N802
        return self.W_dir[:, b * self.c_reduc : (b + 1) * self.c_reduc]

    @property
    def reduction_parameter_count(self) -> int:
        """``c_in * n_bases * c_reduc + c_reduc * c_out``"""
        return self.W_dir.size + self.W_exp.size

    @classmethod
    def initialize(
        cls,
        c_in: int,
        c_reduc: int,
        c_out: int,
        rng: Xoshiro256,
        *,
        n_bases: int = N_BASES,
        n_views: int = 0,
        dtype: DTypeLike = np.float32,
    ) -> GeoConvParams:
        """Glorot-uniform weights, zero biases, identity batch norm

        Each direction matrix is drawn as its own ``c_in x c_reduc`` block.
        Multi-view weights start at ``1 / n_views``.
        """
        blocks = [rng.glorot(c_in, c_reduc, (c_in, c_reduc)) for _ in range(n_bases)]
        return cls(
            W_c=rng.glorot(c_in, c_out, (c_in, c_out)).astype(dtype),
            b_c=np.zeros(c_out, dtype=dtype),
            W_dir=np.concatenate(blocks, axis=1).astype(dtype),
            W_exp=rng.glorot(c_reduc, c_out, (c_reduc, c_out)).astype(dtype),
            b_exp=np.zeros(c_out, dtype=dtype),
            gamma=np.ones(c_reduc, dtype=dtype),
            beta=np.zeros(c_reduc, dtype=dtype),
            running_mean=np.zeros(c_reduc, dtype=dtype),
            running_var=np.ones(c_reduc, dtype=dtype),
            view_weights=(
                np.full(n_views, 1.0 / n_views, dtype=dtype) if n_views else None
            ),
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        """All arrays by field name (``view_weights`` only if present)"""
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if getattr(self, f.name) is not None
        }

    @classmethod
    def from_dict(cls, arrays: Mapping[str, np.ndarray]) -> GeoConvParams:
        names = [f.name for f in fields(cls)]
        return cls(**{k: arrays[k] for k in names if k in arrays})

    def trainable(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.as_dict().items() if k not in self.BUFFERS}

    def astype(self, dtype: DTypeLike) -> GeoConvParams:
        return GeoConvParams.from_dict(
            {k: v.astype(dtype) for k, v in self.as_dict().items()}
        )


class BottleneckCache(NamedTuple):
    x: np.ndarray
    W_dir: np.ndarray
    n_bases: int
    matrices: tuple
    view_weights: np.ndarray | None
    view_products: np.ndarray | None
    valid: np.ndarray
    center: LinearCache
    bn: BatchNormCache | None
    relu_mask: np.ndarray
    expand: LinearCache
    running: tuple[np.ndarray, np.ndarray]


def bottleneck_forward(
    x: np.ndarray,
    operators: Sequence[EdgeOperator],
    params: GeoConvParams,
    *,
    train: bool,
    normalize: bool = True,
) -> tuple[np.ndarray, BottleneckCache]:
    """Forward pass given prebuilt aggregation operators

    With more than one operator, or with ``params.view_weights`` set, the
    aggregated features of all operators are combined with the view
    weights. ``normalize=False`` skips the reduction batch norm (ReLU is
    still applied). ``cache.running`` holds the running statistics after
    this pass.
    """
    n = x.shape[0]
    check_operators(operators, n)
    if x.shape[1] != params.c_in:
        msg = f'{x.shape[1]} input channels, layer expects {params.c_in}'
        raise ValueError(msg)
    nb = params.n_bases
    if any(op.n_bases != nb for op in operators):
        msg = f'operator does not match a layer with {nb} bases'
        raise ValueError(msg)
    weights = params.view_weights
    if weights is not None and len(weights) != len(operators):
        msg = f'{len(weights)} view weights for {len(operators)} views'
        raise ValueError(msg)
    if weights is None and len(operators) > 1:
        msg = 'multiple operators require view weights'
        raise ValueError(msg)
    valid = operators[0].valid
    cr = params.c_reduc

    y, center_cache = linear_forward(x, params.W_c, params.b_c)
    # per-basis reductions of every point, stacked basis-major
    stack = (x @ params.W_dir).reshape(n, nb, cr).transpose(1, 0, 2).reshape(-1, cr)
    matrices = tuple(op.matrix for op in operators)
    products = None
    if weights is None:
        agg = matrices[0] @ stack
    else:
        products = np.stack([m @ stack for m in matrices])
        agg = np.tensordot(weights, products, axes=1)
    z = agg[valid].astype(x.dtype, copy=False)

    running = (params.running_mean, params.running_var)
    bn_cache = None
    if normalize and len(z):
        z, bn_cache, running = batchnorm_forward(
            z,
            params.gamma,
            params.beta,
            params.running_mean,
            params.running_var,
            train=train,
        )
    h, relu_mask = relu_forward(z)
    e, expand_cache = linear_forward(h, params.W_exp, params.b_exp)
    y[valid] += e
    cache = BottleneckCache(
        x=x,
        W_dir=params.W_dir,
        n_bases=nb,
        matrices=matrices,
        view_weights=weights,
        view_products=products,
        valid=valid,
        center=center_cache,
        bn=bn_cache,
        relu_mask=relu_mask,
        expand=expand_cache,
        running=running,
    )
    return check_finite(y, 'GeoConv output'), cache


def bottleneck_backward(
    cache: BottleneckCache,
    grad_y: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Gradients with respect to the input features and trainable weights

    Geometry (coefficients, distance weights) is constant. Returns
    ``grad_x`` and a mapping of :class:`GeoConvParams` field names to
    gradients.
    """
    x, valid = cache.x, cache.valid
    n = x.shape[0]
    cr = cache.expand.W.shape[0]
    grad_x, grad_W_c, grad_b_c = linear_backward(cache.center, grad_y)
    grad_h, grad_W_exp, grad_b_exp = linear_backward(cache.expand, grad_y[valid])
    grad_z = relu_backward(cache.relu_mask, grad_h)
    if cache.bn is not None:
        grad_z, grad_gamma, grad_beta = batchnorm_backward(cache.bn, grad_z)
    else:
        grad_gamma = np.zeros(cr, dtype=grad_y.dtype)
        grad_beta = np.zeros(cr, dtype=grad_y.dtype)
    grad_agg = np.zeros((n, cr), dtype=grad_y.dtype)
    grad_agg[valid] = grad_z
    grads = {}
    if cache.view_weights is None:
        grad_stack = cache.matrices[0].T @ grad_agg
    else:
        grads['view_weights'] = np.einsum(
            'vnc,nc->v', cache.view_products, grad_agg
        ).astype(grad_y.dtype, copy=False)
        grad_stack = sum(
            w * (m.T @ grad_agg)
            for w, m in zip(cache.view_weights, cache.matrices)
        )
    grad_xw = (
        np.asarray(grad_stack)
        .reshape(cache.n_bases, n, cr)
        .transpose(1, 0, 2)
        .reshape(n, cache.n_bases * cr)
    )
    grad_x = grad_x + grad_xw @ cache.W_dir.T
    grads.update(
        W_c=grad_W_c,
        b_c=grad_b_c,
        W_dir=x.T @ grad_xw,
        W_exp=grad_W_exp,
        b_exp=grad_b_exp,
        gamma=grad_gamma,
        beta=grad_beta,
    )
    return grad_x, grads


def geoconv_forward(
    x: np.ndarray,
    nbrs: NeighborhoodSet,
    params: GeoConvParams,
    *,
    train: bool,
    normalize: bool = True,
) -> tuple[np.ndarray, BottleneckCache]:
    """GeoConv of point features ``x`` over radius neighborhoods ``nbrs``

    ``nbrs`` carries the edge vectors ``q - p`` of the cloud's positions and
    the layer radius.
    """
    _check_points(x, nbrs)
    op = aggregation_operators(nbrs, dtype=x.dtype)
    return bottleneck_forward(x, [op], params, train=train, normalize=normalize)


def geoconv_backward(
    cache: BottleneckCache,
    grad_y: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Backward pass of :func:`geoconv_forward` and its variants"""
    return bottleneck_backward(cache, grad_y)


def geoconv_forward_multiview(
    x: np.ndarray,
    nbrs: NeighborhoodSet,
    params: GeoConvParams,
    views: MultiViewConfig,
    *,
    train: bool,
    normalize: bool = True,
) -> tuple[np.ndarray, BottleneckCache]:
    """GeoConv with edge features fused over virtual z-rotations

    Each view rotates the edge vectors, recomputing quadrants and
    coefficients; the views are combined with ``params.view_weights``.
    """
    _check_points(x, nbrs)
    ops = multiview_operators(nbrs, views, dtype=x.dtype)
    return bottleneck_forward(x, ops, params, train=train, normalize=normalize)


def baseline_edge_forward(
    x: np.ndarray,
    nbrs: NeighborhoodSet,
    params: GeoConvParams,
    *,
    train: bool,
    normalize: bool = True,
) -> tuple[np.ndarray, BottleneckCache]:
    """The averaging baseline: one reduction matrix, unweighted neighbor mean"""
    _check_points(x, nbrs)
    if params.n_bases != 1:
        msg = f'baseline layer needs a single reduction matrix, got {params.n_bases}'
        raise ValueError(msg)
    op = aggregation_operators(nbrs, baseline=True, dtype=x.dtype)
    return bottleneck_forward(x, [op], params, train=train, normalize=normalize)


def _check_points(x: np.ndarray, nbrs: NeighborhoodSet) -> None:
    if x.ndim != 2 or x.shape[0] != nbrs.n_points:  # noqa: PLR2004
        msg = (
            f'features of shape {x.shape} do not match '
            f'{nbrs.n_points} neighborhoods'
        )
        raise ValueError(msg)


def with_running(params: GeoConvParams, cache: BottleneckCache) -> GeoConvParams:
    """``params`` with the running statistics left by a forward pass"""
    mean, var = cache.running
    return replace(params, running_mean=mean, running_var=var)

"""The two-branch Geo-CNN classifier with explicit forward and backward passes

A :class:`Model` is a configuration plus a flat, ordered mapping of named
arrays (``<layer>.<parameter>``). Minibatches are processed as one stacked
feature matrix: the rows of all clouds are concatenated, neighborhoods are
stacked with index offsets, and batch-norm statistics are pooled over the
whole batch.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import MappingProxyType
from typing import (
    TYPE_CHECKING,
    Any,
    NamedTuple,
)

import numpy as np

from geocnn.geoconv import (
    EdgeOperator,
    GeoConvParams,
    aggregation_operators,
    bottleneck_backward,
    bottleneck_forward,
    multiview_operators,
)
from geocnn.rng import (
    Xoshiro256,
    derive_seed,
)
from geocnn.spatial import (
    NeighborhoodSet,
    build_index,
    knn_table,
    radius_neighborhoods,
)
from geocnn.tensor import (
    PoolCache,
    group_maxpool_backward,
    group_maxpool_forward,
    softmax_cross_entropy,
)

from .dense import (
    dense_backward,
    dense_forward,
    dense_init,
)

if TYPE_CHECKING:
    from collections.abc import (
        Mapping,
        Sequence,
    )

    from numpy.typing import DTypeLike

    from geocnn.pointcloud import PointCloud

    from .config import GeoCnnConfig

__all__ = [
    'BatchGeometry',
    'BatchResult',
    'CloudGeometry',
    'ForwardCache',
    'Model',
    'backward_batch',
    'backward_features',
    'batch_geometry',
    'build_model',
    'cloud_geometries',
    'cloud_geometry',
    'forward_batch',
    'forward_cloud',
    'forward_features',
    'parameter_shapes',
    'stack_geometry',
]

lgr = logging.getLogger('geocnn.model')

BUFFERS = ('running_mean', 'running_var')


class _LayerSpec(NamedTuple):
    name: str
    kind: str  # 'dense' (FC+BN+ReLU), 'linear' (FC only), or 'geoconv'
    c_in: int
    c_out: int
    c_reduc: int = 0


def _layer_specs(config: GeoCnnConfig) -> list[_LayerSpec]:
    specs = []
    c = config.branch1_in_width
    for i, w in enumerate(config.branch1_widths):
        specs.append(_LayerSpec(f'branch1.{i}', 'dense', c, w))
        c = w
    g_in, (r1, r2, r3), (g1, g2, g3) = (
        config.geoconv_in_widths,
        config.reduc_widths,
        config.geoconv_widths,
    )
    specs.extend(
        [
            _LayerSpec('stem', 'dense', config.in_channels, config.stem_width),
            _LayerSpec('geoconv1', 'geoconv', g_in[0], g1, r1),
            _LayerSpec('mid', 'dense', g1, config.mid_width),
            _LayerSpec('geoconv2', 'geoconv', g_in[1], g2, r2),
            _LayerSpec('geoconv3', 'geoconv', g_in[2], g3, r3),
            _LayerSpec('final', 'dense', g3, config.final_width),
        ]
    )
    c = config.final_width
    for i, w in enumerate(config.head_widths):
        specs.append(_LayerSpec(f'head.{i}', 'dense', c, w))
        c = w
    specs.append(_LayerSpec('classifier', 'linear', c, config.num_classes))
    return specs


def parameter_shapes(config: GeoCnnConfig) -> dict[str, tuple[int, ...]]:
    """Name and shape of every array of a model, in storage order"""
    shapes: dict[str, tuple[int, ...]] = {}
    for spec in _layer_specs(config):
        p = spec.name
        if spec.kind == 'geoconv':
            cr = spec.c_reduc
            shapes.update(
                {
                    f'{p}.W_c': (spec.c_in, spec.c_out),
                    f'{p}.b_c': (spec.c_out,),
                    f'{p}.W_dir': (spec.c_in, config.n_bases * cr),
                    f'{p}.W_exp': (cr, spec.c_out),
                    f'{p}.b_exp': (spec.c_out,),
                    f'{p}.gamma': (cr,),
                    f'{p}.beta': (cr,),
                    f'{p}.running_mean': (cr,),
                    f'{p}.running_var': (cr,),
                }
            )
            if config.n_views:
                shapes[f'{p}.view_weights'] = (config.n_views,)
            continue
        shapes[f'{p}.W'] = (spec.c_in, spec.c_out)
        shapes[f'{p}.b'] = (spec.c_out,)
        if spec.kind == 'dense':
            for k in ('gamma', 'beta', *BUFFERS):
                shapes[f'{p}.{k}'] = (spec.c_out,)
    return shapes


@dataclass(frozen=True, eq=False)
class Model:
    """A Geo-CNN configuration with its parameters and batch-norm buffers"""

    config: GeoCnnConfig
    params: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        shapes = parameter_shapes(self.config)
        if list(self.params) != list(shapes):
            missing = sorted(set(shapes).difference(self.params))
            extra = sorted(set(self.params).difference(shapes))
            msg = f'parameters do not match the configuration: {missing=} {extra=}'
            raise ValueError(msg)
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                msg = f'{name} has shape {self.params[name].shape}, expected {shape}'
                raise ValueError(msg)
        object.__setattr__(self, 'params', MappingProxyType(dict(self.params)))

    @property
    def dtype(self) -> np.dtype:
        return self.params['stem.W'].dtype

    def layer(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays of one layer, keyed by parameter name without the prefix"""
        head = f'{prefix}.'
        return {
            k[len(head) :]: v for k, v in self.params.items() if k.startswith(head)
        }

    def geoconv(self, i: int) -> GeoConvParams:
        """Parameters of GeoConv layer ``i`` (1-based)"""
        return GeoConvParams.from_dict(self.layer(f'geoconv{i}'))

    def trainable(self) -> dict[str, np.ndarray]:
        return {
            k: v for k, v in self.params.items() if k.rsplit('.', 1)[1] not in BUFFERS
        }

    @property
    def parameter_count(self) -> int:
        return sum(v.size for v in self.trainable().values())

    def reduction_parameter_count(self) -> tuple[int, int, int]:
        return tuple(  # type: ignore[return-value]
            self.geoconv(i).reduction_parameter_count for i in (1, 2, 3)
        )

    def replace_params(self, updates: Mapping[str, np.ndarray]) -> Model:
        """A model with some arrays replaced; names must exist already"""
        unknown = set(updates).difference(self.params)
        if unknown:
            msg = f'unknown parameters {sorted(unknown)}'
            raise ValueError(msg)
        params = {k: updates.get(k, v) for k, v in self.params.items()}
        return Model(self.config, params)

    def astype(self, dtype: DTypeLike) -> Model:
        return Model(self.config, {k: v.astype(dtype) for k, v in self.params.items()})


def build_model(config: GeoCnnConfig, *, dtype: DTypeLike = np.float32) -> Model:
    """Initialize a model from the configuration's seed

    Layers are initialized in a fixed order from one generator, so equal
    configurations give bitwise-identical parameters.
    """
    rng = Xoshiro256(derive_seed(config.seed, 'init'))
    params: dict[str, np.ndarray] = {}
    for spec in _layer_specs(config):
        if spec.kind == 'geoconv':
            layer = GeoConvParams.initialize(
                spec.c_in,
                spec.c_reduc,
                spec.c_out,
                rng,
                n_bases=config.n_bases,
                n_views=config.n_views,
                dtype=dtype,
            ).as_dict()
        else:
            layer = dense_init(
                rng, spec.c_in, spec.c_out, norm=spec.kind == 'dense', dtype=dtype
            )
        params.update({f'{spec.name}.{k}': v for k, v in layer.items()})
    model = Model(config, params)
    lgr.info(
        'Built %s model: %i parameters, reduction layers %s',
        'baseline' if config.baseline else 'GeoConv',
        model.parameter_count,
        model.reduction_parameter_count(),
    )
    return model


class BatchGeometry(NamedTuple):
    """Everything a forward pass needs from the point positions

    ``operators`` holds the aggregation operators of each GeoConv layer (one
    per view), ``knn`` the branch-1 groups as row indices of the stacked
    batch, and ``offsets`` the group members' offsets ``q - p``.
    """

    operators: tuple[tuple[EdgeOperator, ...], ...]
    knn: np.ndarray
    offsets: np.ndarray
    n_clouds: int


class CloudGeometry(NamedTuple):
    """Neighborhoods of a single cloud, valid while its positions are fixed

    ``neighborhoods`` holds one radius neighborhood set per GeoConv layer,
    ``knn`` the branch-1 groups as row indices of the cloud.
    """

    positions: np.ndarray
    neighborhoods: tuple[NeighborhoodSet, ...]
    knn: np.ndarray


def cloud_geometry(config: GeoCnnConfig, cloud: PointCloud) -> CloudGeometry:
    positions = cloud.positions.astype(np.float64)
    indexes = [build_index(positions, r) for r in config.radii]
    nbrs = tuple(
        radius_neighborhoods(index, r, cap=config.neighbor_cap)
        for index, r in zip(indexes, config.radii)
    )
    return CloudGeometry(positions, nbrs, knn_table(indexes[0], config.knn_k))


def cloud_geometries(
    config: GeoCnnConfig,
    clouds: Sequence[PointCloud],
    *,
    workers: int | None = None,
) -> list[CloudGeometry]:
    """:func:`cloud_geometry` of every cloud, on up to ``workers`` threads

    ``None`` uses the executor default.
    """
    if workers == 1 or len(clouds) == 1:
        return [cloud_geometry(config, c) for c in clouds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: cloud_geometry(config, c), clouds))


def stack_geometry(
    config: GeoCnnConfig,
    per_cloud: Sequence[CloudGeometry],
    *,
    dtype: DTypeLike = np.float32,
) -> BatchGeometry:
    """Stack per-cloud neighborhoods in batch order and build the operators"""
    shifts = np.cumsum([0] + [len(g.positions) for g in per_cloud[:-1]])
    knn = np.concatenate([g.knn + s for g, s in zip(per_cloud, shifts)])
    stacked = np.concatenate([g.positions for g in per_cloud])
    offsets = stacked[knn] - stacked[:, None, :]
    operators = []
    for i in range(3):
        nbrs = NeighborhoodSet.concat([g.neighborhoods[i] for g in per_cloud])
        if config.baseline:
            ops = (aggregation_operators(nbrs, baseline=True, dtype=dtype),)
        elif config.n_views:
            ops = multiview_operators(nbrs, config.views, dtype=dtype)
        else:
            ops = (aggregation_operators(nbrs, dtype=dtype),)
        operators.append(ops)
    return BatchGeometry(tuple(operators), knn, offsets, len(per_cloud))


def batch_geometry(
    config: GeoCnnConfig,
    clouds: Sequence[PointCloud],
    *,
    dtype: DTypeLike = np.float32,
    workers: int | None = None,
) -> BatchGeometry:
    """Neighborhoods and aggregation operators of a stacked batch

    Per-cloud neighborhoods are computed on up to ``workers`` threads
    (``None``: the executor default), then stacked in batch order.
    """
    return stack_geometry(
        config, cloud_geometries(config, clouds, workers=workers), dtype=dtype
    )


class ForwardCache(NamedTuple):
    layers: dict[str, Any]
    branch1_pool: PoolCache
    global_pool: PoolCache
    knn: np.ndarray
    running: dict[str, np.ndarray]


def forward_features(
    model: Model,
    x: np.ndarray,
    geometry: BatchGeometry,
    *,
    train: bool,
) -> tuple[np.ndarray, ForwardCache]:
    """Logits of stacked point features ``x`` (one row per point)

    ``geometry`` is taken as given, so features can differ from the positions
    the neighborhoods were built from. ``cache.running`` holds the batch-norm
    running statistics after this pass.
    """
    cfg = model.config
    n_rows = geometry.n_clouds * cfg.n_points
    if x.shape != (n_rows, cfg.in_channels):
        msg = (
            f'features of shape {x.shape} do not match {geometry.n_clouds} '
            f'clouds of {cfg.n_points} points with {cfg.in_channels} channels'
        )
        raise ValueError(msg)
    caches: dict[str, Any] = {}
    running: dict[str, np.ndarray] = {}

    def dense(name: str, h: np.ndarray) -> np.ndarray:
        y, c = dense_forward(h, model.layer(name), train=train)
        caches[name] = c
        if c.running is not None:
            running[f'{name}.running_mean'], running[f'{name}.running_var'] = c.running
        return y

    def geoconv(i: int, h: np.ndarray) -> np.ndarray:
        name = f'geoconv{i + 1}'
        y, c = bottleneck_forward(
            h, geometry.operators[i], model.geoconv(i + 1), train=train
        )
        caches[name] = c
        running[f'{name}.running_mean'], running[f'{name}.running_var'] = c.running
        return y

    k = cfg.knn_k
    g = x[geometry.knn]
    if cfg.branch1_offsets:
        g = np.concatenate([g, geometry.offsets.astype(x.dtype)], axis=2)
    g = g.reshape(n_rows * k, -1)
    for i in range(len(cfg.branch1_widths)):
        g = dense(f'branch1.{i}', g)
    branch1, branch1_pool = group_maxpool_forward(g, k)

    h = dense('stem', x)
    h = geoconv(0, h)
    h = dense('mid', h)
    h = geoconv(1, h)
    h = geoconv(2, np.concatenate([h, branch1], axis=1))
    h = dense('final', h)
    g, global_pool = group_maxpool_forward(h, cfg.n_points)
    for i in range(len(cfg.head_widths)):
        g = dense(f'head.{i}', g)
    logits = dense('classifier', g)
    cache = ForwardCache(caches, branch1_pool, global_pool, geometry.knn, running)
    return logits, cache


def backward_features(
    model: Model,
    cache: ForwardCache,
    grad_logits: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Gradients of the input features and of all trainable parameters"""
    cfg = model.config
    grads: dict[str, np.ndarray] = {}

    def dense(name: str, g: np.ndarray) -> np.ndarray:
        gx, layer = dense_backward(cache.layers[name], g)
        grads.update({f'{name}.{k}': v for k, v in layer.items()})
        return gx

    def geoconv(i: int, g: np.ndarray) -> np.ndarray:
        name = f'geoconv{i + 1}'
        gx, layer = bottleneck_backward(cache.layers[name], g)
        grads.update({f'{name}.{k}': v for k, v in layer.items()})
        return gx

    g = dense('classifier', grad_logits)
    for i in reversed(range(len(cfg.head_widths))):
        g = dense(f'head.{i}', g)
    g = group_maxpool_backward(cache.global_pool, g)
    g = dense('final', g)
    g = geoconv(2, g)
    split = cfg.geoconv_widths[1]
    grad_branch1 = g[:, split:]
    g = geoconv(1, g[:, :split])
    g = dense('mid', g)
    g = geoconv(0, g)
    grad_x = dense('stem', g)

    gb = group_maxpool_backward(cache.branch1_pool, grad_branch1)
    for i in reversed(range(len(cfg.branch1_widths))):
        gb = dense(f'branch1.{i}', gb)
    n_rows = grad_x.shape[0]
    gb = gb.reshape(n_rows, cfg.knn_k, -1)[:, :, : cfg.in_channels]
    np.add.at(grad_x, cache.knn.ravel(), gb.reshape(-1, cfg.in_channels))
    return grad_x, {k: grads[k] for k in model.trainable()}


def _check_clouds(model: Model, clouds: Sequence[PointCloud]) -> None:
    cfg = model.config
    if not clouds:
        msg = 'empty batch'
        raise ValueError(msg)
    for i, c in enumerate(clouds):
        if c.n != cfg.n_points or c.channels != cfg.in_channels:
            msg = (
                f'cloud {i} has {c.n} points with {c.channels} channels, model '
                f'expects {cfg.n_points} with {cfg.in_channels}'
            )
            raise ValueError(msg)


def forward_batch(
    model: Model,
    clouds: Sequence[PointCloud],
    *,
    train: bool,
    geometry: BatchGeometry | None = None,
    workers: int | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """``B x K`` logits of a batch of preprocessed clouds"""
    _check_clouds(model, clouds)
    if geometry is None:
        geometry = batch_geometry(
            model.config, clouds, dtype=model.dtype, workers=workers
        )
    x = np.concatenate([c.data for c in clouds]).astype(model.dtype)
    return forward_features(model, x, geometry, train=train)


def forward_cloud(
    model: Model,
    cloud: PointCloud,
    *,
    train: bool = False,
) -> tuple[np.ndarray, ForwardCache]:
    """``1 x K`` logits of a single cloud (eval mode only)"""
    if train:
        msg = (
            'train-mode batch normalization needs at least 2 clouds, '
            'use forward_batch'
        )
        raise ValueError(msg)
    return forward_batch(model, [cloud], train=False)


class BatchResult(NamedTuple):
    loss: float
    grads: dict[str, np.ndarray]
    logits: np.ndarray
    running: dict[str, np.ndarray]
    correct: int


def backward_batch(
    model: Model,
    clouds: Sequence[PointCloud],
    labels: Sequence[int] | np.ndarray,
    *,
    geometry: BatchGeometry | None = None,
    workers: int | None = None,
) -> BatchResult:
    """Train-mode forward pass, mean cross-entropy, and its gradients"""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(clouds),):
        msg = f'{labels.size} labels for {len(clouds)} clouds'
        raise ValueError(msg)
    logits, cache = forward_batch(
        model, clouds, train=True, geometry=geometry, workers=workers
    )
    loss, grad_logits = softmax_cross_entropy(logits, labels)
    _, grads = backward_features(model, cache, grad_logits)
    correct = int((logits.argmax(axis=1) == labels).sum())
    lgr.debug('Batch of %i clouds: loss %.6g', len(clouds), loss)
    return BatchResult(loss, grads, logits, cache.running, correct)

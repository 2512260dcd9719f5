"""Gradient checks of the hand-derived backward passes

Every check compares the analytic gradient of ``sum(f(inputs) * R)``, for a
fixed random ``R``, with central finite differences in double precision.
A report holds one row per checked tensor.
"""

from __future__ import annotations

import logging
from dataclasses import (
    dataclass,
    replace,
)
from enum import Enum
from typing import (
    TYPE_CHECKING,
    Callable,
)

import numpy as np

from geocnn.geoconv import (
    GeoConvParams,
    baseline_edge_forward,
    geoconv_backward,
    geoconv_forward,
    geoconv_forward_multiview,
    uniform_views,
)
from geocnn.model import (
    backward_features,
    batch_geometry,
    build_model,
    forward_features,
    preset,
)
from geocnn.pointcloud import PointCloud
from geocnn.rng import (
    Xoshiro256,
    derive_seed,
)
from geocnn.spatial import (
    build_index,
    radius_neighborhoods,
)
from geocnn.tensor import (
    ABS_FLOOR,
    batchnorm_backward,
    batchnorm_forward,
    finite_difference_gradient,
    gradient_error,
    group_maxpool_backward,
    group_maxpool_forward,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
    softmax_cross_entropy,
)

from .exception import GradcheckFailure

if TYPE_CHECKING:
    from collections.abc import (
        Iterator,
        Mapping,
    )

__all__ = [
    'DEFAULT_TOLERANCES',
    'GradcheckReport',
    'GradcheckRow',
    'GradcheckScope',
    'gradcheck_suite',
]

lgr = logging.getLogger('geocnn.train')


class GradcheckScope(Enum):
    ops = 'ops'
    geoconv = 'geoconv'
    full_model = 'full_model'


DEFAULT_TOLERANCES = {
    GradcheckScope.ops: 1e-5,
    GradcheckScope.geoconv: 1e-5,
    GradcheckScope.full_model: 1e-4,
}
"""Largest accepted relative error per scope"""


@dataclass(frozen=True)
class GradcheckRow:
    case: str
    tensor: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance


@dataclass(frozen=True)
class GradcheckReport:
    """Maximum relative error per checked tensor"""

    scope: GradcheckScope
    rows: tuple[GradcheckRow, ...]
    tolerance: float

    @property
    def failures(self) -> list[GradcheckRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_error(self) -> float:
        return max((r.error for r in self.rows), default=0.0)

    def raise_for_failure(self) -> None:
        """Raise :class:`GradcheckFailure` if any tensor exceeds the tolerance"""
        if not self.passed:
            raise GradcheckFailure(self)

    def to_table(self) -> str:
        """Fixed-width text table, one line per tensor"""
        width = max([len(r.case) for r in self.rows] + [4])
        twidth = max([len(r.tensor) for r in self.rows] + [6])
        lines = [f'{"case":<{width}}  {"tensor":<{twidth}}  max rel. error  status']
        lines.extend(
            f'{r.case:<{width}}  {r.tensor:<{twidth}}  {r.error:14.3e}  '
            f'{"ok" if r.passed else "FAIL"}'
            for r in self.rows
        )
        return '\n'.join(lines)


def _randn(rng: Xoshiro256, *shape: int) -> np.ndarray:
    return rng.normal(int(np.prod(shape))).reshape(shape)


class _Checker:
    """Collects rows of one scope"""

    def __init__(self, tolerance: float) -> None:
        self.tolerance = tolerance
        self.rows: list[GradcheckRow] = []

    def check(
        self,
        case: str,
        objective: Callable[[], float],
        pairs: Mapping[str, tuple[np.ndarray, np.ndarray]],
    ) -> None:
        """``pairs`` maps tensor names to (analytic gradient, tensor)"""
        for name, (analytic, wrt) in pairs.items():
            numeric = finite_difference_gradient(objective, wrt)
            error = gradient_error(np.asarray(analytic), numeric, ABS_FLOOR)
            row = GradcheckRow(case, name, error, self.tolerance)
            lgr.debug('%s/%s: %.3e', case, name, error)
            self.rows.append(row)


def _check_ops(checker: _Checker, seed: int) -> None:
    rng = Xoshiro256(derive_seed(seed, 'gradcheck', 'ops'))

    x, W, b = _randn(rng, 5, 4), _randn(rng, 4, 3), _randn(rng, 3)
    R = _randn(rng, 5, 3)
    _, cache = linear_forward(x, W, b)
    gx, gW, gb = linear_backward(cache, R)
    checker.check(
        'linear',
        lambda: float((linear_forward(x, W, b)[0] * R).sum()),
        {'x': (gx, x), 'W': (gW, W), 'b': (gb, b)},
    )

    # keep inputs away from the kink
    x = _randn(rng, 6, 4)
    x[np.abs(x) < 0.1] = 0.5
    R = _randn(rng, 6, 4)
    _, mask = relu_forward(x)
    checker.check(
        'relu',
        lambda: float((relu_forward(x)[0] * R).sum()),
        {'x': (relu_backward(mask, R), x)},
    )

    for train in (True, False):
        x = _randn(rng, 7, 4)
        gamma, beta = 1.0 + 0.2 * _randn(rng, 4), _randn(rng, 4)
        rm, rv = _randn(rng, 4), 0.5 + rng.random(4)
        R = _randn(rng, 7, 4)

        def bn(x=x, gamma=gamma, beta=beta, rm=rm, rv=rv, R=R, train=train):
            y = batchnorm_forward(x, gamma, beta, rm, rv, train=train)[0]
            return float((y * R).sum())

        _, cache, _ = batchnorm_forward(x, gamma, beta, rm, rv, train=train)
        gx, gg, gb = batchnorm_backward(cache, R)
        checker.check(
            f'batchnorm-{"train" if train else "eval"}',
            bn,
            {'x': (gx, x), 'gamma': (gg, gamma), 'beta': (gb, beta)},
        )

    x = _randn(rng, 12, 3)
    R = _randn(rng, 3, 3)
    _, cache = group_maxpool_forward(x, 4)
    checker.check(
        'maxpool',
        lambda: float((group_maxpool_forward(x, 4)[0] * R).sum()),
        {'x': (group_maxpool_backward(cache, R), x)},
    )

    logits = _randn(rng, 3, 5)
    labels = [4, 0, 2]
    checker.check(
        'softmax-xent',
        lambda: softmax_cross_entropy(logits, labels)[0],
        {'logits': (softmax_cross_entropy(logits, labels)[1], logits)},
    )


def _layer_params(
    rng: Xoshiro256,
    *,
    n_bases: int = 6,
    n_views: int = 0,
) -> GeoConvParams:
    p = GeoConvParams.initialize(
        3, 2, 4, rng, n_bases=n_bases, n_views=n_views, dtype=np.float64
    )
    # nonzero biases and running statistics exercise every term
    return replace(
        p,
        b_c=0.1 * rng.normal(4),
        b_exp=0.1 * rng.normal(4),
        gamma=1.0 + 0.2 * rng.normal(2),
        beta=0.1 * rng.normal(2),
        running_mean=0.1 * rng.normal(2),
        running_var=0.5 + rng.random(2),
        view_weights=0.5 + rng.random(n_views) if n_views else None,
    )


def _layer_variants(
    rng: Xoshiro256,
) -> Iterator[tuple[str, Callable, GeoConvParams]]:
    for train in (True, False):
        mode = 'train' if train else 'eval'
        yield (
            f'geoconv-{mode}',
            lambda x, nbrs, p, train=train: geoconv_forward(x, nbrs, p, train=train),
            _layer_params(rng),
        )
        views = uniform_views(3)
        yield (
            f'multiview-{mode}',
            lambda x, nbrs, p, train=train, views=views: geoconv_forward_multiview(
                x, nbrs, p, views, train=train
            ),
            _layer_params(rng, n_views=3),
        )
        yield (
            f'baseline-{mode}',
            lambda x, nbrs, p, train=train: baseline_edge_forward(
                x, nbrs, p, train=train
            ),
            _layer_params(rng, n_bases=1),
        )


def _check_geoconv(checker: _Checker, seed: int) -> None:
    rng = Xoshiro256(derive_seed(seed, 'gradcheck', 'geoconv'))
    n, r = 8, 0.7
    for case, forward, params in _layer_variants(rng):
        pos = rng.random(3 * n).reshape(n, 3)
        x = _randn(rng, n, 3)
        R = _randn(rng, n, 4)
        nbrs = radius_neighborhoods(build_index(pos, r), r)

        def objective(forward=forward, x=x, nbrs=nbrs, params=params, R=R):
            return float((forward(x, nbrs, params)[0] * R).sum())

        _, cache = forward(x, nbrs, params)
        grad_x, grads = geoconv_backward(cache, R)
        pairs = {'x': (grad_x, x)}
        pairs.update({k: (g, getattr(params, k)) for k, g in grads.items()})
        checker.check(case, objective, pairs)


def _check_full_model(checker: _Checker, seed: int) -> None:
    rng = Xoshiro256(derive_seed(seed, 'gradcheck', 'full_model'))
    model = build_model(preset('micro', seed=seed)).astype(np.float64)
    n = model.config.n_points
    clouds = []
    for _ in range(3):
        v = _randn(rng, n, 3)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        v *= rng.random(n)[:, None] ** (1 / 3)
        clouds.append(PointCloud(v))
    labels = np.array([0, 1, 2]) % model.config.num_classes
    geometry = batch_geometry(model.config, clouds, dtype=np.float64)
    x = np.concatenate([c.data for c in clouds]).astype(np.float64)

    def objective():
        logits, _ = forward_features(model, x, geometry, train=True)
        return softmax_cross_entropy(logits, labels)[0]

    logits, cache = forward_features(model, x, geometry, train=True)
    grad_x, grads = backward_features(
        model, cache, softmax_cross_entropy(logits, labels)[1]
    )
    pairs = {'x': (grad_x, x)}
    pairs.update({k: (g, model.params[k]) for k, g in grads.items()})
    checker.check('micro-model', objective, pairs)


_SUITES = {
    GradcheckScope.ops: _check_ops,
    GradcheckScope.geoconv: _check_geoconv,
    GradcheckScope.full_model: _check_full_model,
}


def gradcheck_suite(
    scope: str | GradcheckScope,
    seed: int = 0,
    tolerance: float | None = None,
) -> GradcheckReport:
    """Check the analytic gradients of one scope against finite differences

    ``ops`` covers the tensor primitives, ``geoconv`` the GeoConv layer in
    its plain, multi-view, and averaging-baseline forms (train and eval
    mode), and ``full_model`` the whole network in its ``micro`` preset.
    ``tolerance`` defaults to :data:`DEFAULT_TOLERANCES` of the scope.
    Failing checks do not raise; see
    :meth:`GradcheckReport.raise_for_failure`.
    """
    try:
        scope = GradcheckScope(scope)
    except ValueError:
        msg = (
            f'unknown gradient-check scope {scope!r}, '
            f'choose from {", ".join(s.value for s in GradcheckScope)}'
        )
        raise ValueError(msg) from None
    if tolerance is None:
        tolerance = DEFAULT_TOLERANCES[scope]
    if tolerance <= 0:
        msg = f'tolerance must be positive, got {tolerance}'
        raise ValueError(msg)
    checker = _Checker(tolerance)
    _SUITES[scope](checker, seed)
    report = GradcheckReport(scope, tuple(checker.rows), tolerance)
    lgr.info(
        'Gradient check %s: %i tensors, max relative error %.3e, %s',
        scope.value,
        len(report.rows),
        report.max_error,
        'passed' if report.passed else f'{len(report.failures)} failed',
    )
    return report

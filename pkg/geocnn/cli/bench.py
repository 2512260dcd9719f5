"""Wall-clock timing of the neighborhood and GeoConv kernels"""

from __future__ import annotations

import csv
import logging
import time
from enum import Enum
from typing import (
    TYPE_CHECKING,
    Callable,
    NamedTuple,
    TextIO,
)

import numpy as np

from geocnn.geoconv import (
    GeoConvParams,
    geoconv_backward,
    geoconv_forward,
)
from geocnn.rng import (
    Xoshiro256,
    derive_seed,
)
from geocnn.spatial import (
    build_index,
    radius_neighborhoods,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

__all__ = [
    'BENCH_COLUMNS',
    'BenchOp',
    'BenchResult',
    'run_bench',
    'write_bench_csv',
]

lgr = logging.getLogger('geocnn.cli')

BENCH_COLUMNS = ('op', 'n', 'radius', 'repeat', 'median_s', 'p90_s', 'checksum')


class BenchOp(Enum):
    ball_query = 'ball-query'
    geoconv_fwd = 'geoconv-fwd'
    geoconv_bwd = 'geoconv-bwd'


class BenchResult(NamedTuple):
    op: BenchOp
    n: int
    radius: float
    seconds: tuple[float, ...]
    checksum: float

    @property
    def median(self) -> float:
        return float(np.median(self.seconds))

    @property
    def p90(self) -> float:
        return float(np.percentile(self.seconds, 90))


def _kernel(
    op: BenchOp,
    pos: np.ndarray,
    radius: float,
    channels: int,
    rng: Xoshiro256,
) -> Callable[[], float]:
    """A callable that runs ``op`` once and returns its checksum"""
    if op is BenchOp.ball_query:

        def ball_query() -> float:
            nbrs = radius_neighborhoods(build_index(pos, radius), radius)
            return float(nbrs.indices.sum()) + float(nbrs.distances.sum())

        return ball_query

    n = len(pos)
    nbrs = radius_neighborhoods(build_index(pos, radius), radius)
    x = rng.normal(n * channels).reshape(n, channels)
    params = GeoConvParams.initialize(
        channels, max(channels // 2, 1), 2 * channels, rng, dtype=np.float64
    )
    if op is BenchOp.geoconv_fwd:
        return lambda: float(geoconv_forward(x, nbrs, params, train=False)[0].sum())

    grad_y = rng.normal(n * 2 * channels).reshape(n, 2 * channels)
    _, cache = geoconv_forward(x, nbrs, params, train=False)

    def backward() -> float:
        grad_x, grads = geoconv_backward(cache, grad_y)
        return float(grad_x.sum()) + sum(float(g.sum()) for g in grads.values())

    return backward


def run_bench(
    op: str | BenchOp,
    n: int,
    radius: float,
    repeat: int,
    *,
    channels: int = 16,
    seed: int = 0,
) -> BenchResult:
    """Time ``repeat`` runs of a kernel on ``n`` uniform points in the unit cube

    Input construction is not timed. The checksum of the outputs guards
    against skipped work; it must agree across repeats.
    """
    op = BenchOp(op)
    if n < 1 or repeat < 1 or channels < 1:
        msg = f'sizes must be positive, got n={n} {repeat=} {channels=}'
        raise ValueError(msg)
    rng = Xoshiro256(derive_seed(seed, 'bench', op.value))
    pos = rng.random(3 * n).reshape(n, 3)
    kernel = _kernel(op, pos, radius, channels, rng)
    seconds = []
    checksums = set()
    for _ in range(repeat):
        start = time.perf_counter()
        checksums.add(kernel())
        seconds.append(time.perf_counter() - start)
    if len(checksums) != 1:
        msg = f'{op.value} gave {len(checksums)} different checksums'
        raise RuntimeError(msg)
    result = BenchResult(op, n, radius, tuple(seconds), checksums.pop())
    lgr.info(
        'Benchmark %s (n=%i, r=%g): median %.3gs, p90 %.3gs',
        op.value,
        n,
        radius,
        result.median,
        result.p90,
    )
    return result


def write_bench_csv(results: Sequence[BenchResult], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(BENCH_COLUMNS)
    for r in results:
        writer.writerow(
            [
                r.op.value,
                r.n,
                repr(r.radius),
                len(r.seconds),
                f'{r.median:.6g}',
                f'{r.p90:.6g}',
                repr(r.checksum),
            ]
        )

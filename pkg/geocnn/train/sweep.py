"""Grid sweep over per-layer GeoConv radii on a held-out split"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    NamedTuple,
)

from geocnn.model import build_model
from geocnn.rng import (
    Xoshiro256,
    derive_seed,
)

from .loop import (
    evaluate,
    train,
)

if TYPE_CHECKING:
    import os
    from collections.abc import Sequence

    from geocnn.model import GeoCnnConfig
    from geocnn.pointcloud import PointCloud

    from .loop import TrainConfig
    from .metrics import EpochMetrics

__all__ = [
    'SWEEP_COLUMNS',
    'SweepResult',
    'radius_sweep',
    'split_dataset',
    'write_sweep_csv',
]

lgr = logging.getLogger('geocnn.train')

SWEEP_COLUMNS = (
    'r1',
    'r2',
    'r3',
    'train_loss',
    'val_loss',
    'val_acc_overall',
    'val_acc_class',
)


class SweepResult(NamedTuple):
    radii: tuple[float, float, float]
    train: EpochMetrics
    validation: EpochMetrics


def split_dataset(
    clouds: Sequence[PointCloud],
    val_fraction: float,
    seed: int,
) -> tuple[list[PointCloud], list[PointCloud]]:
    """Seed-pinned random split into training and validation clouds

    The validation part holds ``ceil(val_fraction * n)`` clouds.
    """
    if not 0 < val_fraction < 1:
        msg = f'validation fraction must be in (0, 1), got {val_fraction}'
        raise ValueError(msg)
    n_val = math.ceil(val_fraction * len(clouds))
    if len(clouds) - n_val < 2:  # noqa: PLR2004
        msg = f'cannot split {len(clouds)} clouds into training and validation sets'
        raise ValueError(msg)
    order = Xoshiro256(derive_seed(seed, 'split')).permutation(len(clouds))
    return (
        [clouds[i] for i in order[n_val:]],
        [clouds[i] for i in order[:n_val]],
    )


def radius_sweep(
    clouds: Sequence[PointCloud],
    model_config: GeoCnnConfig,
    train_config: TrainConfig,
    grid: Sequence[Sequence[float]],
    *,
    val_fraction: float = 0.2,
) -> list[SweepResult]:
    """Train one model per radius triple and evaluate it on a validation split

    All candidates share the split, the initialization seed, and the
    training schedule; only ``model_config.radii`` changes.
    """
    if not grid:
        msg = 'empty radius grid'
        raise ValueError(msg)
    configs = [replace(model_config, radii=tuple(radii)) for radii in grid]
    train_set, val_set = split_dataset(clouds, val_fraction, train_config.seed)
    lgr.info(
        'Radius sweep over %i candidates (%i training, %i validation clouds)',
        len(configs),
        len(train_set),
        len(val_set),
    )
    results = []
    for config in configs:
        model, history = train(build_model(config), train_set, train_config)
        validation = evaluate(
            model,
            val_set,
            batch_size=train_config.batch_size,
            workers=train_config.workers,
        ).final
        lgr.info(
            'Radii %s: validation accuracy %.3f (class %.3f)',
            config.radii,
            validation.acc_overall,
            validation.acc_class,
        )
        results.append(SweepResult(config.radii, history.final, validation))
    return results


def write_sweep_csv(results: Sequence[SweepResult], path: str | os.PathLike) -> None:
    with Path(path).open('w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        for res in results:
            writer.writerow(
                [
                    *(repr(r) for r in res.radii),
                    repr(res.train.loss),
                    repr(res.validation.loss),
                    repr(res.validation.acc_overall),
                    repr(res.validation.acc_class),
                ]
            )

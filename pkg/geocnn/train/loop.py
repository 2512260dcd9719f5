"""Seed-pinned training and evaluation of Geo-CNN models"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Callable,
)

import numpy as np
from more_itertools import chunked

from geocnn.model import (
    backward_batch,
    cloud_geometries,
    forward_batch,
    save_checkpoint,
    stack_geometry,
)
from geocnn.pointcloud import (
    normalize_unit_sphere,
    rotate_z,
    sample_points,
)
from geocnn.rng import (
    Xoshiro256,
    derive_seed,
)
from geocnn.tensor import (
    AdamState,
    adam_step,
    softmax_cross_entropy,
)

from .metrics import (
    EpochMetrics,
    MetricsReport,
    confusion_matrix,
)

if TYPE_CHECKING:
    import os
    from collections.abc import Sequence

    from geocnn.model import Model
    from geocnn.pointcloud import PointCloud

__all__ = [
    'TrainConfig',
    'augment_rotation',
    'evaluate',
    'preprocess',
    'train',
]

lgr = logging.getLogger('geocnn.train')


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule, and bookkeeping of a training run

    The learning rate is multiplied by ``lr_decay`` every ``lr_interval``
    epochs. With ``checkpoint_every > 0``, a checkpoint is written into
    ``checkpoint_dir`` after every that many epochs. ``workers`` caps the
    threads used to build neighborhoods (``None``: executor default).
    """

    epochs: int = 40
    batch_size: int = 8
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 0.7
    lr_interval: int = 20
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_dir: Path | None = None
    augment_rotation: bool = False
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            msg = f'need at least one epoch, got {self.epochs}'
            raise ValueError(msg)
        if self.batch_size < 2:  # noqa: PLR2004
            msg = f'batch size must be at least 2 for batch norm, got {self.batch_size}'
            raise ValueError(msg)
        if self.lr < 0:
            msg = f'learning rate must not be negative, got {self.lr}'
            raise ValueError(msg)
        if not 0 < self.lr_decay <= 1:
            msg = f'learning-rate decay must be in (0, 1], got {self.lr_decay}'
            raise ValueError(msg)
        if self.lr_interval < 1:
            msg = f'decay interval must be positive, got {self.lr_interval}'
            raise ValueError(msg)
        if self.checkpoint_every < 0:
            msg = (
                'checkpoint interval must not be negative, '
                f'got {self.checkpoint_every}'
            )
            raise ValueError(msg)
        if self.checkpoint_every and self.checkpoint_dir is None:
            msg = 'periodic checkpoints need a checkpoint directory'
            raise ValueError(msg)
        if self.workers is not None and self.workers < 1:
            msg = f'worker count must be positive, got {self.workers}'
            raise ValueError(msg)

    def lr_at(self, epoch: int) -> float:
        """Learning rate of a 1-based epoch"""
        return self.lr * self.lr_decay ** ((epoch - 1) // self.lr_interval)


def preprocess(
    clouds: Sequence[PointCloud],
    n_points: int,
    channels: int,
    seed: int,
) -> list[PointCloud]:
    """Normalize into the unit sphere and sample ``n_points`` rows

    Cloud ``i`` is sampled with a seed derived from ``seed`` and ``i``, after
    dropping normals if ``channels`` is 3.
    """
    return [
        sample_points(
            normalize_unit_sphere(c).with_channels(channels),
            n_points,
            derive_seed(seed, 'sample', i),
        )
        for i, c in enumerate(clouds)
    ]


def augment_rotation(
    clouds: Sequence[PointCloud],
    seed: int,
    epoch: int,
) -> list[PointCloud]:
    """Rotate every cloud about z by its own uniform angle in [0, 2 pi)"""
    rng = Xoshiro256(derive_seed(seed, 'augment', epoch))
    angles = rng.random(len(clouds)) * (2.0 * math.pi)
    return [rotate_z(c, float(a)) for c, a in zip(clouds, angles)]


def _labels(clouds: Sequence[PointCloud]) -> np.ndarray:
    missing = [i for i, c in enumerate(clouds) if c.label is None]
    if missing:
        msg = f'{len(missing)} clouds without a class label, first: #{missing[0]}'
        raise ValueError(msg)
    return np.array([c.label for c in clouds], dtype=np.int64)


def train(
    model: Model,
    train_set: Sequence[PointCloud],
    config: TrainConfig,
    *,
    on_epoch: Callable[[Model, EpochMetrics], None] | None = None,
) -> tuple[Model, MetricsReport]:
    """Train with Adam on shuffled minibatches

    Clouds must be preprocessed to the model's point count. Shuffling and
    augmentation are drawn from generators derived from ``config.seed`` and
    the epoch, so a run is fully reproducible. A trailing minibatch of a
    single cloud is skipped, as train-mode batch norm needs two. Metrics
    are those of the training batches (train mode).

    Neighborhoods of every cloud are built once per run, or once per epoch
    with rotation augmentation, and stacked per minibatch.
    """
    if not train_set:
        msg = 'empty training set'
        raise ValueError(msg)
    labels = _labels(train_set)
    num_classes = model.config.num_classes
    state = AdamState.zeros_like(model.trainable())
    report = MetricsReport()
    clouds = train_set
    geometries = (
        []
        if config.augment_rotation
        else cloud_geometries(model.config, train_set, workers=config.workers)
    )
    lgr.info(
        'Training on %i clouds for %i epochs (batch size %i, seed %i)',
        len(train_set),
        config.epochs,
        config.batch_size,
        config.seed,
    )
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        lr = config.lr_at(epoch)
        if config.augment_rotation:
            clouds = augment_rotation(train_set, config.seed, epoch)
            geometries = cloud_geometries(
                model.config, clouds, workers=config.workers
            )
        order = Xoshiro256(derive_seed(config.seed, 'shuffle', epoch)).permutation(
            len(clouds)
        )
        loss_sum = 0.0
        seen: list[np.ndarray] = []
        predicted: list[np.ndarray] = []
        for batch in chunked(order.tolist(), config.batch_size):
            if len(batch) < 2:  # noqa: PLR2004
                lgr.debug('Skipping a trailing batch of one cloud')
                continue
            result = backward_batch(
                model,
                [clouds[i] for i in batch],
                labels[batch],
                geometry=stack_geometry(
                    model.config,
                    [geometries[i] for i in batch],
                    dtype=model.dtype,
                ),
            )
            params, state = adam_step(
                model.trainable(),
                result.grads,
                state,
                lr=lr,
                beta1=config.beta1,
                beta2=config.beta2,
                eps=config.eps,
            )
            model = model.replace_params({**params, **result.running})
            loss_sum += result.loss * len(batch)
            seen.append(labels[batch])
            predicted.append(result.logits.argmax(axis=1))
        if not seen:
            msg = 'training set yields no batch of at least 2 clouds'
            raise ValueError(msg)
        cm = confusion_matrix(
            np.concatenate(seen), np.concatenate(predicted), num_classes
        )
        metrics = EpochMetrics.from_confusion(
            cm,
            epoch=epoch,
            loss=loss_sum / cm.sum(),
            seconds=time.perf_counter() - start,
        )
        report.history.append(metrics)
        report.confusion = cm
        lgr.info(
            'Epoch %i: loss %.4f, accuracy %.3f (class %.3f), lr %.3g, %.1fs',
            epoch,
            metrics.loss,
            metrics.acc_overall,
            metrics.acc_class,
            lr,
            metrics.seconds,
        )
        if config.checkpoint_every and epoch % config.checkpoint_every == 0:
            _save_periodic(config.checkpoint_dir, model, state, epoch)
        if on_epoch is not None:
            on_epoch(model, metrics)
    return model, report


def _save_periodic(
    directory: str | os.PathLike | None,
    model: Model,
    state: AdamState,
    epoch: int,
) -> None:
    directory = Path(directory or '.')
    directory.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        directory / f'epoch-{epoch:04d}.gck',
        model,
        state,
        info={'train.epoch': epoch},
    )


def evaluate(
    model: Model,
    test_set: Sequence[PointCloud],
    *,
    batch_size: int = 16,
    workers: int | None = None,
) -> MetricsReport:
    """Eval-mode loss, accuracies, and confusion matrix of a labeled set

    Eval-mode batch norm treats clouds independently, so the result does not
    depend on the order of ``test_set`` or on ``batch_size``.
    """
    if not test_set:
        msg = 'empty evaluation set'
        raise ValueError(msg)
    labels = _labels(test_set)
    start = time.perf_counter()
    logits = np.concatenate(
        [
            forward_batch(model, batch, train=False, workers=workers)[0]
            for batch in chunked(test_set, batch_size)
        ]
    )
    loss, _ = softmax_cross_entropy(logits.astype(np.float64), labels)
    cm = confusion_matrix(labels, logits.argmax(axis=1), model.config.num_classes)
    metrics = EpochMetrics.from_confusion(
        cm, epoch=0, loss=loss, seconds=time.perf_counter() - start
    )
    lgr.info(
        'Evaluated %i clouds: loss %.4f, accuracy %.3f (class %.3f)',
        len(test_set),
        metrics.loss,
        metrics.acc_overall,
        metrics.acc_class,
    )
    return MetricsReport(history=[metrics], confusion=cm)

"""Classification metrics and their CSV/JSON reports"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import (
    asdict,
    dataclass,
    field,
)
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    import os
    from collections.abc import Sequence

__all__ = [
    'CSV_COLUMNS',
    'EpochMetrics',
    'MetricsReport',
    'class_accuracies',
    'confusion_matrix',
    'write_confusion_csv',
]

lgr = logging.getLogger('geocnn.train')

CSV_COLUMNS = ('epoch', 'loss', 'acc_overall', 'acc_class', 'seconds')


def confusion_matrix(
    labels: Sequence[int] | np.ndarray,
    predictions: Sequence[int] | np.ndarray,
    num_classes: int,
) -> np.ndarray:
    """``K x K`` counts, rows are true classes, columns predicted ones"""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        msg = f'{labels.size} labels for {predictions.size} predictions'
        raise ValueError(msg)
    for what, ids in (('label', labels), ('prediction', predictions)):
        if ids.size and (ids.min() < 0 or ids.max() >= num_classes):
            msg = f'{what} outside [0, {num_classes})'
            raise ValueError(msg)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def class_accuracies(cm: np.ndarray) -> np.ndarray:
    """Per-class recall; NaN for classes without samples"""
    support = cm.sum(axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.diag(cm) / support


@dataclass(frozen=True)
class EpochMetrics:
    """Loss and accuracies of one pass over a dataset

    ``acc_class`` is the unweighted mean of the per-class recalls, taken over
    the classes present in the data.
    """

    epoch: int
    loss: float
    acc_overall: float
    acc_class: float
    per_class: tuple[float, ...]
    seconds: float

    @classmethod
    def from_confusion(
        cls,
        cm: np.ndarray,
        *,
        epoch: int,
        loss: float,
        seconds: float,
    ) -> EpochMetrics:
        total = int(cm.sum())
        if not total:
            msg = 'cannot compute metrics of an empty dataset'
            raise ValueError(msg)
        recalls = class_accuracies(cm)
        present = ~np.isnan(recalls)
        if not present.all():
            lgr.debug('%i classes without samples', int((~present).sum()))
        return cls(
            epoch=epoch,
            loss=float(loss),
            acc_overall=float(np.trace(cm)) / total,
            acc_class=float(recalls[present].mean()),
            per_class=tuple(float(r) for r in recalls),
            seconds=float(seconds),
        )


@dataclass
class MetricsReport:
    """Metrics history of a run, and the confusion matrix of the last pass"""

    history: list[EpochMetrics] = field(default_factory=list)
    confusion: np.ndarray | None = None

    @property
    def final(self) -> EpochMetrics:
        if not self.history:
            msg = 'no metrics recorded'
            raise ValueError(msg)
        return self.history[-1]

    def write_csv(self, path: str | os.PathLike) -> None:
        """One row per epoch, columns :data:`CSV_COLUMNS`"""
        with Path(path).open('w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for m in self.history:
                writer.writerow(
                    [
                        m.epoch,
                        repr(m.loss),
                        repr(m.acc_overall),
                        repr(m.acc_class),
                        f'{m.seconds:.3f}',
                    ]
                )

    def write_json(self, path: str | os.PathLike) -> None:
        """Summary with the final metrics, the history, and the confusion"""
        summary = {
            'final': _as_json(self.final),
            'history': [_as_json(m) for m in self.history],
            'confusion': None if self.confusion is None else self.confusion.tolist(),
        }
        Path(path).write_text(
            json.dumps(summary, indent=2, allow_nan=False) + '\n', encoding='utf-8'
        )


def _as_json(m: EpochMetrics) -> dict:
    d = asdict(m)
    # classes without samples have no recall
    d['per_class'] = [None if np.isnan(v) else v for v in m.per_class]
    return d


def write_confusion_csv(
    cm: np.ndarray,
    path: str | os.PathLike,
    class_names: Sequence[str] | None = None,
) -> None:
    """Confusion matrix with a header row and a leading label column"""
    names = list(class_names) if class_names else [str(i) for i in range(len(cm))]
    if len(names) != len(cm):
        msg = f'{len(names)} class names for {len(cm)} classes'
        raise ValueError(msg)
    with Path(path).open('w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['true\\predicted', *names])
        for name, row in zip(names, cm):
            writer.writerow([name, *(int(v) for v in row)])

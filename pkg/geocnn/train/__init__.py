"""Seed-pinned training, evaluation, and gradient checks

Training uses Adam on shuffled minibatches with a step learning-rate
schedule. Shuffling, augmentation, and the train/validation split of the
radius sweep each draw from their own generator derived from one seed, so
equal seeds give bitwise-identical runs.

.. currentmodule:: geocnn.train
.. autosummary::
   :toctree: generated

   TrainConfig
   train
   evaluate
   preprocess
   augment_rotation
   MetricsReport
   EpochMetrics
   confusion_matrix
   class_accuracies
   write_confusion_csv
   gradcheck_suite
   GradcheckReport
   GradcheckFailure
   radius_sweep
   split_dataset
"""

__all__ = [
    'CSV_COLUMNS',
    'DEFAULT_TOLERANCES',
    'SWEEP_COLUMNS',
    'EpochMetrics',
    'GradcheckFailure',
    'GradcheckReport',
    'GradcheckRow',
    'GradcheckScope',
    'MetricsReport',
    'SweepResult',
    'TrainConfig',
    'augment_rotation',
    'class_accuracies',
    'confusion_matrix',
    'evaluate',
    'gradcheck_suite',
    'preprocess',
    'radius_sweep',
    'split_dataset',
    'train',
    'write_confusion_csv',
    'write_sweep_csv',
]

from .exception import GradcheckFailure
from .gradcheck import (
    DEFAULT_TOLERANCES,
    GradcheckReport,
    GradcheckRow,
    GradcheckScope,
    gradcheck_suite,
)
from .loop import (
    TrainConfig,
    augment_rotation,
    evaluate,
    preprocess,
    train,
)
from .metrics import (
    CSV_COLUMNS,
    EpochMetrics,
    MetricsReport,
    class_accuracies,
    confusion_matrix,
    write_confusion_csv,
)
from .sweep import (
    SWEEP_COLUMNS,
    SweepResult,
    radius_sweep,
    split_dataset,
    write_sweep_csv,
)

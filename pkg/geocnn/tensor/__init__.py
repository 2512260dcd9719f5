"""Neural-network primitives with hand-derived gradients

Forward functions return an output and a cache; backward functions map the
cache and an upstream gradient to input and parameter gradients. Helpers for
central finite differences check these gradients, and the GCK1 container
stores named parameter matrices.

.. currentmodule:: geocnn.tensor
.. autosummary::
   :toctree: generated

   linear_forward
   linear_backward
   relu_forward
   relu_backward
   batchnorm_forward
   batchnorm_backward
   group_maxpool_forward
   group_maxpool_backward
   channelwise_maxpool_forward
   channelwise_maxpool_backward
   softmax_cross_entropy
   adam_step
   AdamState
   finite_difference_gradient
   gradient_error
   relative_error
   save_tensors
   load_tensors
   CheckpointError
"""

__all__ = [
    'ABS_FLOOR',
    'GCK1_MAGIC',
    'AdamState',
    'BatchNormCache',
    'CheckpointError',
    'LinearCache',
    'PoolCache',
    'adam_step',
    'batchnorm_backward',
    'batchnorm_forward',
    'channelwise_maxpool_backward',
    'channelwise_maxpool_forward',
    'check_finite',
    'enable_finite_checks',
    'finite_difference_gradient',
    'gradient_error',
    'group_maxpool_backward',
    'group_maxpool_forward',
    'linear_backward',
    'linear_forward',
    'load_tensors',
    'relative_error',
    'relu_backward',
    'relu_forward',
    'save_tensors',
    'softmax_cross_entropy',
]

from .container import (
    GCK1_MAGIC,
    load_tensors,
    save_tensors,
)
from .exception import CheckpointError
from .gradcheck import (
    ABS_FLOOR,
    finite_difference_gradient,
    gradient_error,
    relative_error,
)
from .ops import (
    AdamState,
    BatchNormCache,
    LinearCache,
    PoolCache,
    adam_step,
    batchnorm_backward,
    batchnorm_forward,
    channelwise_maxpool_backward,
    channelwise_maxpool_forward,
    check_finite,
    enable_finite_checks,
    group_maxpool_backward,
    group_maxpool_forward,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
    softmax_cross_entropy,
)

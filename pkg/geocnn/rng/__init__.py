"""Pinned, platform-independent random number generation

All stochastic steps (synthetic data, point sampling, weight initialization,
shuffling, augmentation) draw from :class:`Xoshiro256`, so that a seed
reproduces bit-identical datasets and training runs everywhere.

.. currentmodule:: geocnn.rng
.. autosummary::
   :toctree: generated

   Xoshiro256
   derive_seed
   splitmix64
"""

__all__ = ['Xoshiro256', 'derive_seed', 'splitmix64']

from .xoshiro import (
    Xoshiro256,
    derive_seed,
    splitmix64,
)

"""The ``geocnn`` command line

Subcommands generate and convert datasets, train and evaluate models, run
the gradient checks and kernel benchmarks, inspect checkpoints and clouds,
and sweep the GeoConv radii. Settings are resolved with this precedence,
highest first: command-line flags, a ``--config`` key=value file,
``GEOCONV_*`` environment variables, and the implementation defaults. Every
run prints the resolved seed and configuration to stderr.

.. currentmodule:: geocnn.cli
.. autosummary::
   :toctree: generated

   main
   build_parser
   build_settings
   resolve
   RunConfig
   run_bench
"""

__all__ = [
    'EXIT_CHECK_FAILED',
    'EXIT_ERROR',
    'BenchOp',
    'BenchResult',
    'RunConfig',
    'build_parser',
    'build_settings',
    'main',
    'resolve',
    'run_bench',
]

from .bench import (
    BenchOp,
    BenchResult,
    run_bench,
)
from .config import (
    RunConfig,
    build_settings,
    resolve,
)
from .main import (
    EXIT_CHECK_FAILED,
    EXIT_ERROR,
    build_parser,
    main,
)

"""Layered configuration with explicit precedence

Configuration items can come from any number of sources. These sources are
ordered to implement a simple precedence rule. ``geocnn`` uses, highest
first: command-line flags, a ``key=value`` file given with ``--config``, the
``GEOCONV_*`` process environment, and the implementation defaults.

>>> from geocnn.settings import Defaults, Environment, InMemory, Setting, Settings
>>> defaults = Defaults()
>>> defaults['batch_size'] = Setting(8, coercer=int)
>>> settings = Settings(
...     {
...         'cli': InMemory(),
...         'env': Environment(var_prefix='GEOCONV_'),
...         'defaults': defaults,
...     }
... )
>>> settings['batch_size'].value
8
>>> settings.sources['cli']['batch_size'] = Setting('16')
>>> settings['batch_size'].value
16

The coercer declared with the default is inherited, even when the value with
the highest precedence comes from a source that delivers plain strings.

.. currentmodule:: geocnn.settings
.. autosummary::
   :toctree: generated

   Settings
   Setting
   Source
   InMemory
   Defaults
   Environment
   KeyValueFile
   UnsetValue
"""

from __future__ import annotations

from .setting import (
    Setting,
    UnsetValue,
)
from .settings import Settings
from .source import (
    Defaults,
    Environment,
    InMemory,
    KeyValueFile,
    Source,
    normalize_key,
)

__all__ = [
    'Defaults',
    'Environment',
    'InMemory',
    'KeyValueFile',
    'Setting',
    'Settings',
    'Source',
    'UnsetValue',
    'normalize_key',
]

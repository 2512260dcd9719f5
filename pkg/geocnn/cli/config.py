"""Resolution of run settings from flags, a config file, and the environment"""

from __future__ import annotations

import logging
import sys
from dataclasses import (
    fields,
    replace,
)
from typing import (
    TYPE_CHECKING,
    Any,
    Callable,
    NamedTuple,
)

from geocnn.model import (
    GeoCnnConfig,
    preset,
)
from geocnn.settings import (
    Defaults,
    Environment,
    InMemory,
    KeyValueFile,
    Setting,
    Settings,
    normalize_key,
)
from geocnn.train import TrainConfig

if TYPE_CHECKING:
    import argparse
    from pathlib import Path

__all__ = [
    'DEFAULTS',
    'ENV_PREFIX',
    'MODEL_KEYS',
    'RunConfig',
    'build_settings',
    'cli_overrides',
    'resolve',
]

lgr = logging.getLogger('geocnn.cli')

ENV_PREFIX = 'GEOCONV_'


def to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    msg = f'not a boolean: {value!r}'
    raise ValueError(msg)


def to_workers(value: Any) -> int | None:
    if value is None or str(value).strip().lower() in ('', 'none', 'auto'):
        return None
    workers = int(value)
    if workers < 1:
        msg = f'worker count must be positive, got {workers}'
        raise ValueError(msg)
    return workers


def to_level(value: Any) -> str:
    level = str(value).strip().upper()
    if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        msg = f'unknown log level {value!r}'
        raise ValueError(msg)
    return level


_TRAIN_DEFAULTS = TrainConfig()

DEFAULTS: dict[str, tuple[Any, Callable]] = {
    'seed': (0, int),
    'workers': (None, to_workers),
    'log_level': ('INFO', to_level),
    'preset': ('desk', str),
    'epochs': (_TRAIN_DEFAULTS.epochs, int),
    'batch_size': (_TRAIN_DEFAULTS.batch_size, int),
    'lr': (_TRAIN_DEFAULTS.lr, float),
    'beta1': (_TRAIN_DEFAULTS.beta1, float),
    'beta2': (_TRAIN_DEFAULTS.beta2, float),
    'eps': (_TRAIN_DEFAULTS.eps, float),
    'lr_decay': (_TRAIN_DEFAULTS.lr_decay, float),
    'lr_interval': (_TRAIN_DEFAULTS.lr_interval, int),
    'checkpoint_every': (_TRAIN_DEFAULTS.checkpoint_every, int),
    'augment_rotation': (_TRAIN_DEFAULTS.augment_rotation, to_bool),
}
"""Implementation defaults and coercers of all general and training settings"""

MODEL_KEYS = frozenset(f.name for f in fields(GeoCnnConfig)) - {'seed'}
"""Settings that override fields of the model preset"""

_TRAIN_KEYS = (
    'epochs',
    'batch_size',
    'lr',
    'beta1',
    'beta2',
    'eps',
    'lr_decay',
    'lr_interval',
    'checkpoint_every',
    'augment_rotation',
)


def build_settings(
    overrides: dict[str, Any],
    config_file: str | Path | None = None,
) -> Settings:
    """Layer flags over a config file over ``GEOCONV_*`` over the defaults

    Raises
    ------
    ValueError
      For keys of the command line or the config file that are neither a
      general, training, nor model setting.
    """
    defaults = Defaults()
    for key, (value, coercer) in DEFAULTS.items():
        defaults[key] = Setting(value, coercer=coercer)
    cli = InMemory()
    for key, value in overrides.items():
        cli[normalize_key(key)] = Setting(value)
    sources = {'cli': cli}
    if config_file is not None:
        sources['file'] = KeyValueFile(config_file)
    sources['env'] = Environment(var_prefix=ENV_PREFIX)
    sources['defaults'] = defaults

    known = MODEL_KEYS.union(DEFAULTS)
    for name, source in sources.items():
        for key in sorted(set(source.keys()).difference(known)):
            if name == 'env':
                lgr.warning(
                    'Ignoring unknown environment setting %s%s',
                    ENV_PREFIX,
                    key.upper(),
                )
                continue
            where = source if name == 'file' else 'command line'
            msg = f'unknown setting {key!r} (from {where})'
            raise ValueError(msg)
    return Settings(sources)


class RunConfig(NamedTuple):
    """Resolved settings of one command invocation"""

    seed: int
    workers: int | None
    log_level: str
    model: GeoCnnConfig
    train: TrainConfig
    values: dict[str, Any]

    def report(self, *, model: bool = False, training: bool = False) -> None:
        """Print and log the seed and the parts of the configuration in use"""
        lines = [f'seed={self.seed}', f'workers={self.workers or "auto"}']
        if training:
            lines.extend(f'train.{k}={self.values[k]!r}' for k in _TRAIN_KEYS)
        if model:
            lines.extend(self.model.to_text().splitlines())
        for line in lines:
            print(line, file=sys.stderr)  # noqa: T201
        lgr.info('Resolved seed %i', self.seed)
        for line in lines[1:]:
            lgr.debug('Resolved %s', line)


def resolve(
    settings: Settings,
    *,
    checkpoint_dir: Path | None = None,
) -> RunConfig:
    """Coerce all settings into a model and a training configuration

    The model configuration starts from the ``preset`` and takes every model
    setting that any source provides. Its seed is the resolved ``seed``.
    """
    values = settings.resolve(sorted(DEFAULTS))
    overrides = {
        key: settings[key].pristine_value
        for key in sorted(MODEL_KEYS)
        if key in settings
    }
    model = GeoCnnConfig.from_mapping(overrides, base=preset(values['preset']))
    model = replace(model, seed=values['seed'])
    train = TrainConfig(
        seed=values['seed'],
        workers=values['workers'],
        checkpoint_dir=checkpoint_dir if values['checkpoint_every'] else None,
        **{k: values[k] for k in _TRAIN_KEYS},
    )
    return RunConfig(
        seed=values['seed'],
        workers=values['workers'],
        log_level=values['log_level'],
        model=model,
        train=train,
        values=values,
    )


def cli_overrides(
    args: argparse.Namespace,
    keys: tuple[str, ...],
) -> dict[str, Any]:
    """Settings given as explicit flags, plus ``--set key=value`` pairs"""
    overrides: dict[str, Any] = {}
    for item in getattr(args, 'set', None) or []:
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            msg = f'expected key=value, got {item!r}'
            raise ValueError(msg)
        overrides[normalize_key(key)] = value.strip()
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return overrides

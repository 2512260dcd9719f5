"""Architecture description of the Geo-CNN classifier and its presets"""

from __future__ import annotations

from dataclasses import (
    dataclass,
    fields,
    replace,
)
from typing import (
    TYPE_CHECKING,
    Any,
)

from geocnn.geoconv import (
    MultiViewConfig,
    uniform_views,
)

from .exception import ConfigError

if TYPE_CHECKING:
    from collections.abc import Mapping

__all__ = [
    'CONFIG_VERSION',
    'PRESETS',
    'GeoCnnConfig',
    'preset',
    'reduction_parameter_count',
]

CONFIG_VERSION = 1
"""Version of the ``model.*`` key-value block written by ``to_text()``"""

_PREFIX = 'model.'
_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


@dataclass(frozen=True)
class GeoCnnConfig:
    """Widths, radii, and switches of a two-branch Geo-CNN

    Branch 1 groups the ``knn_k`` nearest neighbors of every point, runs a
    shared per-neighbor MLP of ``branch1_widths`` over them, and max-pools
    each group. Branch 2 is a stem FC of ``stem_width`` followed by
    GeoConv(``geoconv_widths[0]``), FC(``mid_width``),
    GeoConv(``geoconv_widths[1]``), concatenation with branch 1,
    GeoConv(``geoconv_widths[2]``), and FC(``final_width``). A max over all
    points feeds the head FCs (``head_widths``) and the classifier.

    GeoConv layer ``i`` uses radius ``radii[i]`` and reduces to
    ``reduc_widths[i]`` channels. ``baseline`` replaces GeoConv by the
    averaging baseline; ``n_views > 0`` enables the feature-level multi-view
    approximation with that many uniform views. ``branch1_offsets`` appends
    the neighbor offset ``q - p`` to each neighbor's input features.

    The defaults are the architecture constants of the ModelNet40
    classification setup.
    """

    n_points: int = 1000
    in_channels: int = 3
    num_classes: int = 40
    knn_k: int = 16
    branch1_widths: tuple[int, ...] = (64, 128, 384)
    branch1_offsets: bool = True
    stem_width: int = 64
    reduc_widths: tuple[int, ...] = (64, 64, 64)
    geoconv_widths: tuple[int, ...] = (128, 512, 768)
    radii: tuple[float, ...] = (0.15, 0.3, 0.6)
    mid_width: int = 256
    final_width: int = 2048
    head_widths: tuple[int, ...] = (512,)
    baseline: bool = False
    n_views: int = 0
    neighbor_cap: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                object.__setattr__(self, f.name, tuple(value))
        positive = (
            'n_points',
            'num_classes',
            'knn_k',
            'stem_width',
            'mid_width',
            'final_width',
            'neighbor_cap',
        )
        for name in positive:
            if getattr(self, name) < 1:
                msg = f'must be positive, got {getattr(self, name)}'
                raise ConfigError(msg, field=name)
        if self.in_channels not in (3, 6):
            msg = f'input must have 3 or 6 channels, got {self.in_channels}'
            raise ConfigError(msg, field='in_channels')
        if self.num_classes < 2:  # noqa: PLR2004
            msg = f'need at least 2 classes, got {self.num_classes}'
            raise ConfigError(msg, field='num_classes')
        if not self.branch1_widths:
            msg = 'branch 1 needs at least one layer'
            raise ConfigError(msg, field='branch1_widths')
        for name in ('branch1_widths', 'reduc_widths', 'geoconv_widths', 'head_widths'):
            if any(w < 1 for w in getattr(self, name)):
                msg = f'widths must be positive, got {getattr(self, name)}'
                raise ConfigError(msg, field=name)
        for name in ('reduc_widths', 'geoconv_widths', 'radii'):
            if len(getattr(self, name)) != 3:  # noqa: PLR2004
                msg = f'need one entry per GeoConv layer (3), got {getattr(self, name)}'
                raise ConfigError(msg, field=name)
        if self.radii[0] <= 0 or any(
            b <= a for a, b in zip(self.radii, self.radii[1:])
        ):
            msg = f'radii must be positive and strictly increasing, got {self.radii}'
            raise ConfigError(msg, field='radii')
        if self.n_views < 0:
            msg = f'number of views must not be negative, got {self.n_views}'
            raise ConfigError(msg, field='n_views')
        if self.baseline and self.n_views:
            msg = 'multi-view aggregation needs GeoConv layers, not the baseline'
            raise ConfigError(msg, field='n_views')
        if self.seed < 0:
            msg = f'seed must not be negative, got {self.seed}'
            raise ConfigError(msg, field='seed')

    @property
    def n_bases(self) -> int:
        return 1 if self.baseline else 6

    @property
    def branch1_in_width(self) -> int:
        return self.in_channels + (3 if self.branch1_offsets else 0)

    @property
    def concat_width(self) -> int:
        """Width after joining the second GeoConv output with branch 1"""
        return self.geoconv_widths[1] + self.branch1_widths[-1]

    @property
    def geoconv_in_widths(self) -> tuple[int, int, int]:
        return (self.stem_width, self.mid_width, self.concat_width)

    @property
    def views(self) -> MultiViewConfig | None:
        return uniform_views(self.n_views) if self.n_views else None

    def to_text(self) -> str:
        """Versioned ``model.<field>=<value>`` lines, one per field"""
        lines = [f'{_PREFIX}version={CONFIG_VERSION}']
        lines.extend(
            f'{_PREFIX}{f.name}={_format(getattr(self, f.name))}'
            for f in fields(self)
        )
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str) -> GeoCnnConfig:
        """Parse the block written by :meth:`to_text`

        Lines without the ``model.`` prefix are ignored, so the block can be
        embedded in a larger key-value text. Missing fields take their
        defaults.
        """
        values: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()  # noqa: PLW2901
            if not line or line.startswith('#') or not line.startswith(_PREFIX):
                continue
            key, sep, value = line[len(_PREFIX) :].partition('=')
            if not sep:
                msg = f'malformed line {line!r}'
                raise ConfigError(msg)
            values[key.strip()] = value.strip()
        version = values.pop('version', None)
        if version is None:
            msg = 'no model configuration block found'
            raise ConfigError(msg, field='version')
        if version != str(CONFIG_VERSION):
            msg = f'unsupported configuration version {version}'
            raise ConfigError(msg, field='version')
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(
        cls,
        values: Mapping[str, Any],
        *,
        base: GeoCnnConfig | None = None,
    ) -> GeoCnnConfig:
        """``base`` (default: the defaults) with fields taken from ``values``

        String values are coerced to the type of the field, so settings from
        files, the environment, or the command line can be passed directly.
        """
        base = cls() if base is None else base
        known = {f.name for f in fields(cls)}
        updates = {}
        for key, raw in values.items():
            if key not in known:
                msg = 'unknown configuration key'
                raise ConfigError(msg, field=key)
            updates[key] = _coerce(key, getattr(base, key), raw)
        return replace(base, **updates)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ','.join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name: str, default: Any, raw: Any) -> Any:
    try:
        if isinstance(default, tuple):
            elem = float if name == 'radii' else int
            if isinstance(raw, str):
                return tuple(elem(v) for v in raw.split(',') if v.strip())
            return tuple(elem(v) for v in raw)
        if not isinstance(raw, str):
            return type(default)(raw)
        if isinstance(default, bool):
            if raw.lower() in _TRUE:
                return True
            if raw.lower() in _FALSE:
                return False
            msg = f'not a boolean: {raw!r}'
            raise ValueError(msg)
        return type(default)(raw)
    except (TypeError, ValueError) as e:
        msg = f'cannot parse {raw!r}: {e}'
        raise ConfigError(msg, field=name) from e


_MODELNET40 = GeoCnnConfig()

PRESETS: Mapping[str, GeoCnnConfig] = {
    'modelnet40': _MODELNET40,
    'baseline': replace(_MODELNET40, baseline=True),
    # reduction widths raised until the baseline matches GeoConv's size
    'baseline-large': replace(_MODELNET40, baseline=True, reduc_widths=(192, 192, 256)),
    'desk': GeoCnnConfig(
        n_points=256,
        num_classes=4,
        knn_k=16,
        branch1_widths=(16, 32, 48),
        stem_width=16,
        reduc_widths=(8, 8, 8),
        geoconv_widths=(32, 64, 96),
        radii=(0.2, 0.4, 0.8),
        mid_width=48,
        final_width=128,
        head_widths=(64,),
    ),
    'micro': GeoCnnConfig(
        n_points=12,
        num_classes=3,
        knn_k=4,
        branch1_widths=(8, 8),
        stem_width=8,
        reduc_widths=(4, 4, 4),
        geoconv_widths=(8, 8, 8),
        radii=(0.6, 0.9, 1.3),
        mid_width=8,
        final_width=8,
        head_widths=(8,),
    ),
}
"""Named configurations; ``micro`` is small enough for finite differences"""


def preset(name: str, **overrides: Any) -> GeoCnnConfig:
    """A named configuration, optionally with some fields replaced"""
    try:
        base = PRESETS[name]
    except KeyError:
        msg = f'unknown preset {name!r}, choose from {sorted(PRESETS)}'
        raise ConfigError(msg, field='preset') from None
    return GeoCnnConfig.from_mapping(overrides, base=base)


def reduction_parameter_count(config: GeoCnnConfig) -> tuple[int, int, int]:
    """Weights of the three reduction stages

    Per stage ``c_in * n_bases * c_reduc + c_reduc * c_out``, with six bases
    for GeoConv and one for the baseline.
    """
    return tuple(  # type: ignore[return-value]
        c_in * config.n_bases * c_reduc + c_reduc * c_out
        for c_in, c_reduc, c_out in zip(
            config.geoconv_in_widths, config.reduc_widths, config.geoconv_widths
        )
    )

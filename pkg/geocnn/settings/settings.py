from __future__ import annotations

from copy import copy
from itertools import chain
from types import MappingProxyType
from typing import (
    TYPE_CHECKING,
    Any,
)

if TYPE_CHECKING:
    from .setting import Setting
    from .source import Source


class Settings:
    """Query across different sources of settings

    An instance is initialized with an ordered mapping of source identifiers
    to :class:`~geocnn.settings.Source` instances. Sources declared earlier
    take precedence over sources declared later.

    When a setting is requested via ``__getitem__()``, a "flattened" item is
    returned: the ``value`` comes from the highest-precedence source that has
    one, and the ``coercer`` from the highest-precedence source that declares
    one. In practice the coercer is declared by the defaults, and the value
    may come from the command line, a config file, or the environment.
    """

    def __init__(self, sources: dict[str, Source]):
        self._sources = sources

    @property
    def sources(self) -> MappingProxyType:
        """Read-only mapping of source identifiers to source instance"""
        return MappingProxyType(self._sources)

    def __len__(self) -> int:
        return len(self.keys())

    def __getitem__(self, key: str) -> Setting:
        item: Setting | None = None
        # start from the lowest precedence source, such that the
        # defaults define the coercer, and update with every
        # source of higher precedence
        for s in reversed(self._sources.values()):
            try:
                update_item = s[key]
            except KeyError:
                continue
            if item is None:
                item = copy(update_item)
                continue
            item.update(update_item)
        if item is None:
            raise KeyError(key)
        return item

    def __contains__(self, key: str) -> bool:
        return any(key in s for s in self._sources.values())

    def keys(self) -> set[str]:
        """Returns all setting keys known across all sources"""
        return set(chain.from_iterable(s.keys() for s in self._sources.values()))

    def provenance(self, key: str) -> str | None:
        """Identifier of the source that provides the value of a setting"""
        for name, s in self._sources.items():
            if key in s:
                return name
        return None

    def resolve(self, keys: list[str] | None = None) -> dict[str, Any]:
        """Return coerced values for the given (or all) keys

        Coercion errors are reported as ``ValueError`` naming the key and
        the source of the offending value.
        """
        resolved = {}
        for key in sorted(self.keys()) if keys is None else keys:
            item = self[key]
            try:
                resolved[key] = item.value
            except (TypeError, ValueError) as e:
                msg = (
                    f'invalid value {item.pristine_value!r} for {key!r} '
                    f'(from {self.provenance(key)}): {e}'
                )
                raise ValueError(msg) from e
        return resolved

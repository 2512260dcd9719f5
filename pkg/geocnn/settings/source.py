from __future__ import annotations

import logging
from abc import (
    ABC,
    abstractmethod,
)
from os import environ
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Any,
    Iterator,
)

from .setting import Setting

if TYPE_CHECKING:
    from collections.abc import Collection

lgr = logging.getLogger('geocnn.settings')


class Source(ABC):
    """Abstract base class of a settings source

    This class offers a read-only, ``dict``-like interface. Concrete sources
    implement :meth:`_get_item` (raising ``KeyError`` for unknown keys) and
    :meth:`_get_keys`.
    """

    def __getitem__(self, key: str) -> Setting:
        return self._get_item(key)

    def keys(self) -> Collection[str]:
        """Returns all setting keys known to a source"""
        return self._get_keys()

    def get(self, key: str, default: Any = None) -> Setting:
        """Return a particular setting identified by its key, or a default

        A ``default`` that is not a :class:`Setting` is wrapped into one.
        """
        try:
            return self[key]
        except KeyError:
            return default if isinstance(default, Setting) else Setting(default)

    def __len__(self) -> int:
        return len(self.keys())

    def __contains__(self, key: str) -> bool:
        return key in self.keys()

    def __iter__(self) -> Iterator[str]:
        yield from self.keys()

    @abstractmethod
    def _get_keys(self) -> Collection[str]:
        """Implement to return the collection of keys for a source"""

    @abstractmethod
    def _get_item(self, key: str) -> Setting:
        """Implement to return a single item

        Or raise ``KeyError`` if there is none.
        """


class InMemory(Source):
    """Source that keeps all items in a ``dict``

    This is the source for command-line overrides, and the base of
    :class:`Defaults` and :class:`KeyValueFile`.
    """

    def __init__(self) -> None:
        self._items: dict[str, Setting] = {}

    def __setitem__(self, key: str, value: Setting) -> None:
        self._items[key] = value

    def __delitem__(self, key: str) -> None:
        del self._items[key]

    def _get_item(self, key: str) -> Setting:
        return self._items[key]

    def _get_keys(self) -> Collection[str]:
        return self._items.keys()

    def __str__(self) -> str:
        return f'{self.__class__.__name__}'

    def __repr__(self) -> str:
        return f'{self.__class__.__name__}({self._items!r})'


class Defaults(InMemory):
    """Source for collecting implementation defaults of settings

    The difference to :class:`InMemory` is limited to a debug-level log
    message when a default that is already known gets replaced.
    """

    def __setitem__(self, key: str, value: Setting) -> None:
        if key in self:
            lgr.debug('Resetting %r default', key)
        super().__setitem__(key, value)


class KeyValueFile(InMemory):
    """Settings read from a UTF-8 ``key=value`` text file

    Blank lines and lines starting with ``#`` are ignored. Whitespace around
    keys and values is stripped. Keys may be given with dashes or
    underscores (``batch-size`` and ``batch_size`` are the same key).
    """

    def __init__(self, path: Path | str):
        super().__init__()
        self.path = Path(path)
        text = self.path.read_text(encoding='utf-8')
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith('#'):
                continue
            if '=' not in stripped:
                msg = f'{self.path}:{lineno}: expected key=value, got {stripped!r}'
                raise ValueError(msg)
            key, value = stripped.split('=', 1)
            key = normalize_key(key)
            if not key:
                msg = f'{self.path}:{lineno}: empty key'
                raise ValueError(msg)
            self[key] = Setting(value.strip())

    def __str__(self) -> str:
        return f'KeyValueFile[{self.path}]'


class Environment(Source):
    """Process environment source

    Only variables starting with ``var_prefix`` are considered. The setting
    key is the remainder of the variable name in lower case, i.e.
    ``GEOCONV_BATCH_SIZE`` maps to ``batch_size``.
    """

    def __init__(self, *, var_prefix: str = 'GEOCONV_'):
        self._var_prefix = var_prefix.upper()

    def get_varname_from_key(self, key: str) -> str:
        varname = f'{self._var_prefix}{normalize_key(key).upper()}'
        if '=' in varname or '\0' in varname:
            msg = "illegal environment variable name (contains '=' or NUL)"
            raise ValueError(msg)
        return varname

    def _get_item(self, key: str) -> Setting:
        return Setting(environ[self.get_varname_from_key(key)])

    def _get_keys(self) -> Collection[str]:
        return {
            k[len(self._var_prefix) :].lower()
            for k in environ
            if k.upper().startswith(self._var_prefix)
        }

    def __contains__(self, key: str) -> bool:
        return self.get_varname_from_key(key) in environ

    def __str__(self) -> str:
        return f'Environment[{self._var_prefix}]'


def normalize_key(key: str) -> str:
    """Normalize a setting key to lower case with underscores"""
    return key.strip().replace('-', '_').lower()

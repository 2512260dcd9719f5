from __future__ import annotations

from copy import copy
from typing import (
    Any,
    Callable,
)


class UnsetValue:
    """Placeholder type to indicate a value that has not been set"""


class Setting:
    """Representation of an individual configuration item

    ``value`` can be of any type; command-line and file sources deliver
    strings, defaults typically deliver the native type. The ``coercer`` is a
    callable that converts and validates the value on access via
    :attr:`value`, so that a string from an environment variable and a native
    default yield the same type.
    """

    def __init__(
        self,
        value: Any | UnsetValue = UnsetValue,
        *,
        coercer: Callable | None = None,
    ):
        self._value = value
        self._coercer = coercer

    @property
    def pristine_value(self) -> Any:
        """Original, uncoerced value"""
        return self._value

    @property
    def value(self) -> Any:
        """Value of a setting after coercion"""
        if self._coercer and self._value is not UnsetValue:
            return self._coercer(self._value)
        return self._value

    @property
    def coercer(self) -> Callable | None:
        """``coercer`` of a setting, or ``None`` if there is none"""
        return self._coercer

    def update(self, other: Setting) -> None:
        """Update the item from another

        The other's ``value`` replaces this one's, unless it is
        :class:`UnsetValue`. The other's ``coercer`` replaces this one's,
        unless it is ``None``.
        """
        if other._value is not UnsetValue:  # noqa: SLF001
            self._value = other._value  # noqa: SLF001
        if other._coercer:  # noqa: SLF001
            self._coercer = other._coercer  # noqa: SLF001

    def __repr__(self) -> str:
        return (
            f'{self.__class__.__name__}('
            f'{self._value!r}'
            f', coercer={self._coercer!r}'
            ')'
        )

    def __eq__(self, item: object) -> bool:
        if not isinstance(item, type(self)):
            return False
        return self._value == item._value and self._coercer == item._coercer

    def copy(self) -> Setting:
        """Return a shallow copy of the instance"""
        return copy(self)

"""Exceptions raised on malformed point-cloud artifacts"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    import os


class CloudFormatError(ValueError):
    """Raised when a GPC1 file, a text cloud, or a manifest cannot be read

    At minimum, the path of the offending file must be given. ``offset``
    locates the problem: a byte offset for binary files, a 1-based line
    number for text files (``unit`` says which). As with any exception of
    this kind, a ``msg`` can be amended by a wrapping ``try/except`` to add
    context before re-raising.
    """

    def __init__(
        self,
        path: str | os.PathLike,
        msg: str = '',
        offset: int | None = None,
        unit: str = 'byte',
    ) -> None:
        ValueError.__init__(self, msg)
        self.path = path
        self.msg = msg
        self.offset = offset
        self.unit = unit

    def __str__(self) -> str:
        to_str = f'Cannot load {str(self.path)!r}'
        if self.offset is not None:
            to_str += f' at {self.unit} {self.offset}'
        if self.msg:
            to_str += f': {self.msg}'
        return to_str

    def __repr__(self) -> str:
        descr = f'{self.__class__.__name__}({str(self.path)!r}'
        if self.msg:
            descr += f', msg={self.msg!r}'
        if self.offset is not None:
            descr += f', offset={self.offset}'
        if self.unit != 'byte':
            descr += f', unit={self.unit!r}'
        return descr + ')'

"""Exceptions of the tensor container format"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    import os


class CheckpointError(ValueError):
    """Raised when a GCK1 checkpoint cannot be read or does not fit a model

    ``offset`` is the byte offset of the offending field, if known. ``msg``
    may be amended by callers before re-raising.
    """

    def __init__(
        self,
        path: str | os.PathLike,
        msg: str = '',
        offset: int | None = None,
    ) -> None:
        ValueError.__init__(self, msg)
        self.path = path
        self.msg = msg
        self.offset = offset

    def __str__(self) -> str:
        to_str = f'Invalid checkpoint {str(self.path)!r}'
        if self.offset is not None:
            to_str += f' at byte {self.offset}'
        if self.msg:
            to_str += f': {self.msg}'
        return to_str

    def __repr__(self) -> str:
        descr = f'{self.__class__.__name__}({str(self.path)!r}'
        if self.msg:
            descr += f', msg={self.msg!r}'
        if self.offset is not None:
            descr += f', offset={self.offset}'
        return descr + ')'

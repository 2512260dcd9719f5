"""Exception raised on an inconsistent model architecture"""

from __future__ import annotations


class ConfigError(ValueError):
    """Raised when a :class:`~geocnn.model.GeoCnnConfig` cannot be built

    ``field`` names the offending configuration item, if a single one can
    be blamed. Like other exceptions of this kind, ``msg`` may be amended by
    a wrapping ``try/except`` to add context, for example the file the
    configuration was read from, before re-raising.
    """

    def __init__(self, msg: str = '', field: str | None = None) -> None:
        ValueError.__init__(self, msg)
        self.msg = msg
        self.field = field

    def __str__(self) -> str:
        to_str = 'Invalid model configuration'
        if self.field:
            to_str += f' ({self.field})'
        if self.msg:
            to_str += f': {self.msg}'
        return to_str

    def __repr__(self) -> str:
        descr = f'{self.__class__.__name__}({self.msg!r}'
        if self.field:
            descr += f', field={self.field!r}'
        return descr + ')'

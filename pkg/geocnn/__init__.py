from __future__ import annotations

from geocnn._version import __version__

__all__ = [
    '__version__',
]

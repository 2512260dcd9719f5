"""Exception raised when analytic and numerical gradients disagree"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .gradcheck import GradcheckReport


class GradcheckFailure(RuntimeError):
    """Raised when a gradient check exceeds its tolerance

    The full :class:`~geocnn.train.GradcheckReport` is attached as
    ``report``; ``msg`` can be amended with context before re-raising.
    """

    def __init__(self, report: GradcheckReport, msg: str = '') -> None:
        RuntimeError.__init__(self, msg)
        self.report = report
        self.msg = msg

    def __str__(self) -> str:
        failed = self.report.failures
        to_str = (
            f'Gradient check failed for {len(failed)} of '
            f'{len(self.report.rows)} tensors '
            f'(tolerance {self.report.tolerance:g}): '
            + ', '.join(f'{r.case}/{r.tensor}' for r in failed)
        )
        if self.msg:
            to_str += f' [{self.msg}]'
        return to_str

    def __repr__(self) -> str:
        descr = f'{self.__class__.__name__}(<{len(self.report.failures)} failures>'
        if self.msg:
            descr += f', msg={self.msg!r}'
        return descr + ')'

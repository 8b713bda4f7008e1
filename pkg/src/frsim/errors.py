"""Exception hierarchy.

Everything raised for a domain reason derives from ``FrsimError`` so the CLI
can map it to exit code 1; ``ParseError`` is the one usage-level failure.
"""

from __future__ import annotations


class FrsimError(Exception):
    pass


class DimensionError(FrsimError, ValueError):
    pass


class SystemMismatchError(FrsimError, ValueError):
    pass


class NotOrthonormalError(FrsimError, ValueError):
    pass


class ImpossibleEventError(FrsimError):
    """Conditioning on an event of zero probability."""


class StructureError(FrsimError):
    """A scenario that cannot be executed as written."""


class NonCommutingError(FrsimError, ValueError):
    pass


class SearchGuardError(FrsimError):
    pass


class ParseError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(str(first) if first else "parse failed")

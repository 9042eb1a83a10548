"""Exception hierarchy shared by all pdfa modules."""


class PdfaError(Exception):
    """Base class for every error raised by pdfa."""


class ParseError(PdfaError):
    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)


class LabelError(PdfaError):
    """Duplicate or otherwise malformed block labels."""


class SizeError(PdfaError):
    """A dense object would exceed the configured entry cap."""


class DimensionError(PdfaError):
    pass


class PartitionError(PdfaError):
    pass


class ExecutionFault(PdfaError):
    """Run-time fault while evaluating an expression (e.g. ``x mod 0``)."""


class PseudoInverseError(PdfaError):
    pass


class NonMonotoneError(PdfaError):
    pass


class SolverError(PdfaError):
    """A linear system could not be solved (singular or divergent)."""

    def __init__(self, message, residual=None, diagnostics=None):
        self.residual = residual
        self.diagnostics = diagnostics or {}
        super().__init__(message)

"""Exception hierarchy shared by all perfseer modules."""

from __future__ import annotations


class PerfseerError(Exception):
    """Base class for every error raised by this package."""


class SourceSyntaxError(PerfseerError, SyntaxError):
    """Python source could not be parsed."""

    def __init__(self, line: int | None, message: str, filename: str | None = None):
        self.line = line
        self.message = message
        self.filename = filename
        super().__init__(f"{filename or '<source>'}:{line}: {message}")

    def __str__(self) -> str:
        return self.args[0]


class UnknownRule(PerfseerError, KeyError):
    def __str__(self) -> str:
        return f"unknown rule id: {self.args[0]!r}"


class RepoNotFound(PerfseerError):
    pass


class BranchNotFound(PerfseerError):
    pass


class FileNotInCommit(PerfseerError):
    pass


class SchemaError(PerfseerError, ValueError):
    """A dataset file or feature selection does not match the record schema."""


class DegenerateSplit(PerfseerError):
    pass


class SingleClass(PerfseerError):
    pass


class EmptyDataset(PerfseerError):
    pass


class InsufficientData(PerfseerError):
    pass


class ArityMismatch(PerfseerError, ValueError):
    pass


class Unsupported(PerfseerError):
    pass


class LengthMismatch(PerfseerError, ValueError):
    pass


class EmptyMatrix(PerfseerError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    """IRLS stopped at ``max_iter`` before reaching the tolerance."""

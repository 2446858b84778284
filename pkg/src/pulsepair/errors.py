"""Exception types shared across the package.

The CLI maps these onto process exit codes, so stage code should raise
the most specific type that applies rather than bare ValueError.
"""


class ValidationError(ValueError):
    """Bad configuration, bad data file, or a violated precondition."""


class ArchiveFormatError(ValidationError):
    """Malformed first-level archive or stats CSV.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class StageError(RuntimeError):
    """A pipeline stage failed after validation passed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


class UsageError(Exception):
    """Bad command line (unknown subcommand, missing required flag)."""

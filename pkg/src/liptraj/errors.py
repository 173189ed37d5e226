"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the CLI can map failures to distinct
process exit statuses without inspecting types at each call site.
"""


class LiptrajError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(LiptrajError):
    """Bad command line usage or invalid configuration override."""

    exit_code = 2


class FormatError(LiptrajError):
    """Malformed input or container file (bad header, magic, column set)."""

    exit_code = 3


class ParseError(FormatError):
    """A cell or token could not be parsed; carries row/column context."""

    def __init__(self, message, row=None, column=None):
        if row is not None:
            message = f"{message} (row {row}, column {column!r})"
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyInputError(FormatError):
    """Structurally valid input with no usable data rows."""


class InsufficientDataError(LiptrajError):
    """Too few frames/clips to perform the requested operation."""

    exit_code = 4


class VocabularyError(LiptrajError):
    """A character outside the model charset."""

    exit_code = 4

    def __init__(self, char, offset):
        super().__init__(f"character {char!r} at offset {offset} is not in the charset")
        self.char = char
        self.offset = offset


class ConsistencyError(LiptrajError):
    """Cross-record mismatch, e.g. reference frame from a different speaker."""

    exit_code = 4


class NumericDomainError(LiptrajError):
    """Non-finite value where a finite one is required."""

    exit_code = 4


class ShapeError(LiptrajError):
    """Array shape incompatible with the operation."""

    exit_code = 5


class ContractError(LiptrajError):
    """An API precondition was violated by the caller."""

    exit_code = 5


class CompatibilityError(LiptrajError):
    """Checkpoint/model mismatch (config or parameter name set)."""

    exit_code = 6


class TrainingDiverged(LiptrajError):
    """Non-finite loss during training; message carries diagnostics."""

    exit_code = 7

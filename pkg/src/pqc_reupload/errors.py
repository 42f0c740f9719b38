"""Exception hierarchy for pqc-reupload.

Every error raised on purpose by the library derives from ``PQCError`` and carries the
process exit code the CLI reports for it:

- 2: configuration or argument error
- 3: data error (missing files, count mismatches, malformed cells, bad checkpoints)
- 4: numeric failure during training

Example:
    >>> try:
    ...     new_state(0)
    ... except InvalidArgumentError as e:
    ...     print(e.exit_code)
    2
"""


class PQCError(Exception):
    """Base class for all pqc-reupload errors."""

    exit_code = 1


class ConfigurationError(PQCError):
    """Invalid configuration value or incompatible combination of settings."""

    exit_code = 2


class InvalidArgumentError(ConfigurationError, ValueError):
    """A library operation was called outside its precondition."""


class DataError(PQCError):
    """Input data could not be found, parsed or validated."""

    exit_code = 3


class DatasetNotFoundError(DataError, FileNotFoundError):
    """A dataset file does not exist."""


class CountMismatchError(DataError):
    """Parsed dataset shape differs from the expected counts."""

    def __init__(self, name: str, what: str, expected: int, actual: int) -> None:
        super().__init__(f"{name}: expected {expected} {what}, found {actual}")
        self.expected = expected
        self.actual = actual


class MalformedCellError(DataError):
    """A CSV cell could not be parsed as a number."""

    def __init__(self, path: str, row: int, column: str, value: str) -> None:
        super().__init__(f"{path}: row {row}, column '{column}': cannot parse {value!r}")
        self.row = row
        self.column = column


class CheckpointError(DataError):
    """Checkpoint header is corrupted or incompatible with the requested template."""


class NumericError(PQCError):
    """Training produced a non-finite cost or gradient."""

    exit_code = 4


class EnsembleMemberError(PQCError):
    """Training of one one-vs-others member failed; carries the class id and the cause's exit code."""

    def __init__(self, class_id: int, cause: PQCError) -> None:
        super().__init__(f"class {class_id}: {cause}")
        self.class_id = class_id
        self.exit_code = cause.exit_code

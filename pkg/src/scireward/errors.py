"""Exception types shared across the package."""


class SciRewardError(Exception):
    """Base class for all scireward errors."""


class ParseError(SciRewardError):
    """Strict-mode completion parsing failed; the message names the first violated rule."""


class SchemaError(SciRewardError):
    """A dataset line is malformed. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class UnknownTypeError(SchemaError):
    """An entity or relation type string is outside the closed vocabulary."""


class GroupTooSmall(SciRewardError):
    """A completion group is smaller than the operation requires."""


class SizeTooLarge(SciRewardError):
    """A requested subset size exceeds the corpus size."""


class MissingRecord(SciRewardError):
    """A prediction references a record id absent from the dataset."""


class ConfigError(SciRewardError):
    """A configuration value is invalid. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field

"""Exception types shared across the package."""


class CharqaError(Exception):
    """Base class for all charqa errors."""


class ConfigError(CharqaError):
    """Invalid configuration value; message names the offending field."""


class CorpusParseError(CharqaError):
    """Malformed corpus line."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaVersionError(CharqaError):
    """Corpus line carries an unsupported schema_version."""


class EmptyCastError(CharqaError):
    """No speaker survived the principal-character filters."""


class ShapeError(CharqaError):
    """Array shapes do not match the declared contract."""


class EmptyInputError(CharqaError):
    """An operation that needs a non-empty sequence received an empty one."""


class NonFiniteLossError(CharqaError):
    """A loss evaluated to inf/nan (e.g. KL against an unsmoothed target)."""


class VocabError(CharqaError):
    """A token cannot be embedded at all (no table entry, no known characters)."""


class ClampWarning(UserWarning):
    """A probability hit the numeric floor before the log."""


class EmptyContextWarning(UserWarning):
    """Co-attention received an empty context and passed its input through."""

"""Exception types shared across the package.

Each class carries the process exit code the CLI maps it to.
"""


class AtdlError(Exception):
    exit_code = 1


class DimensionError(AtdlError, ValueError):
    """Shapes of the operands do not agree."""

    exit_code = 5


class UndefinedSimilarityError(AtdlError, ValueError):
    """Cosine or projection requested against an all-zero matrix."""

    exit_code = 6


class CorpusError(AtdlError, ValueError):
    """Empty input, no qualifying documents, or ids outside the vocabulary."""

    exit_code = 7


class FormatError(AtdlError):
    """A binary cache/checkpoint has a bad magic, version, or payload length."""

    exit_code = 4


class NonFiniteError(AtdlError, FloatingPointError):
    exit_code = 8


class InvariantError(AtdlError):
    """A hard invariant check failed at runtime."""

    exit_code = 6


class UnknownTokenError(AtdlError, KeyError):
    """A query token is not in the vocabulary."""

    exit_code = 9

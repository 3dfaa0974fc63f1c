"""Exception taxonomy shared by all fadec modules.

The CLI maps these onto exit codes: validation-class errors exit 1,
I/O errors exit 2, anything else exits 3.
"""


class FadecError(Exception):
    """Base class for all errors raised by fadec."""


class ShapeError(FadecError):
    """Tensor extents do not satisfy an operation's contract."""


class ConfigError(FadecError):
    """An exponent plan, pipeline configuration, or schedule profile is invalid."""


class AnalysisError(FadecError):
    """An operator graph cannot be analyzed (unlabeled node, unknown kind, ...)."""


class ParseError(FadecError):
    """An input file is syntactically or structurally malformed."""


class QueryError(FadecError):
    """A query referenced an entity that does not exist (e.g. unknown stage)."""

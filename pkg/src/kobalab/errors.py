"""Exception hierarchy; the CLI maps these onto exit codes."""


class KobalabError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(KobalabError, ValueError):
    """Malformed domain spec, unsupported family tag or invalid run option."""


class NumericalError(KobalabError, RuntimeError):
    """An iteration failed to converge.

    ``last_iterate`` holds whatever the solver had when it gave up, so the
    caller can inspect or reuse it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class OutOfChartError(KobalabError, ValueError):
    """A point pair falls outside the chart where the pseudodistance is defined."""


class TypeBoundError(KobalabError, ValueError):
    """All Taylor coefficients along some frame axis vanish up to the declared type."""

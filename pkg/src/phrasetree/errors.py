"""Exception hierarchy shared across the toolkit.

Each class maps to one documented CLI exit code (see cli.EXIT_CODES).
"""


class PhrasetreeError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PhrasetreeError):
    """Malformed input file; carries source path and byte offset when known."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        loc = ""
        if path is not None:
            loc += f" in {path}"
        if offset is not None:
            loc += f" at offset {offset}"
        super().__init__(message + loc)


class ValidationError(PhrasetreeError):
    """Structurally valid input violating a domain invariant."""


class ConfigError(PhrasetreeError):
    """Bad configuration: unknown filter/metric/profile, invalid parameter."""


class DataError(PhrasetreeError):
    """Inconsistent data encountered mid-pipeline (e.g. bad categorical value)."""


class MetricError(PhrasetreeError):
    """A metric failed to evaluate; names the offending candidate."""


class TransportError(PhrasetreeError):
    """Remote scorer unreachable or timing out (retryable)."""


class ProtocolError(PhrasetreeError):
    """Remote scorer answered with an out-of-contract payload."""


class EmptyTreeError(PhrasetreeError):
    """Pruning removed every candidate."""


class ExhaustionError(PhrasetreeError):
    """Fewer candidates available than requested; reports how many ranked."""

    def __init__(self, requested, ranked):
        self.requested = requested
        self.ranked = ranked
        super().__init__(
            f"ranked only {len(ranked)} of {requested} requested candidates"
        )


class CoverageError(PhrasetreeError):
    """Prediction file misses (dialogue, turn, variant) rows; lists gaps."""

    def __init__(self, gaps):
        self.gaps = list(gaps)
        shown = ", ".join(map(str, self.gaps[:5]))
        more = "" if len(self.gaps) <= 5 else f" (+{len(self.gaps) - 5} more)"
        super().__init__(f"missing predictions for: {shown}{more}")

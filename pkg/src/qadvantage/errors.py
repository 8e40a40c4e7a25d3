"""Exception hierarchy shared across the toolkit.

The CLI maps these classes onto distinct exit codes so scripted callers
can tell configuration mistakes from data problems and from requests
that are mathematically infeasible (e.g. no threshold reaches the
variance target within tolerance).
"""


class ToolkitError(Exception):
    """Base class for toolkit-specific failures."""

    exit_code = 1
    category = "internal"


class ConfigError(ToolkitError):
    """Invalid, incomplete, or contradictory run configuration."""

    exit_code = 2
    category = "config"


class DataError(ToolkitError):
    """Unusable input data: missing file, bad schema, infeasible split."""

    exit_code = 3
    category = "data"


class InfeasibleError(ToolkitError):
    """A well-formed request with no mathematically valid answer."""

    exit_code = 4
    category = "infeasible"

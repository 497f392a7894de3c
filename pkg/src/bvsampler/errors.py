"""Exception hierarchy shared across the package.

Errors are grouped so the command line interface can map them onto
distinct exit codes: configuration problems, data problems, and
numerical failures inside the linear algebra or the weighting steps.
"""


class BvsError(Exception):
    """Base class for all package errors."""


class ConfigError(BvsError):
    """Invalid configuration value or inconsistent option combination."""


class InitOutOfRangeError(ConfigError):
    """Initial proposal probabilities fall outside the clamping interval
    for the given (epsilon, nu, h, p) combination."""


class TooManyVariablesError(ConfigError):
    """Exhaustive enumeration requested for more variables than the
    configured limit allows."""


class DataError(BvsError):
    """Unusable input data: missing file, malformed CSV, bad shapes."""


class NumericalError(BvsError):
    """Numerical failure: Cholesky breakdown after jitter, nonpositive
    residual sum of squares."""


class RankDeficientError(NumericalError):
    """Selected design submatrix is rank deficient where the prior
    requires it to be invertible."""


class DegenerateWeightsError(NumericalError):
    """Importance weights collapsed: no finite weight or zero total mass."""

"""Exception types shared across the package."""


class EpioptError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EpioptError):
    """Invalid or inconsistent configuration (unknown keys, bad grids, ...)."""


class InfeasiblePolicyError(EpioptError):
    """A control violates a hard constraint (u_w >= u_w_max makes c_w diverge)."""


class InsufficientDataError(EpioptError):
    """Not enough samples to build the requested statistic."""


class IllPosedFitError(EpioptError):
    """Rank-deficient design matrix in a surrogate fit."""


class BudgetExhaustedError(EpioptError):
    """The Monte Carlo sample cap was hit before the accuracy target.

    Carries the best estimate obtained so far so callers can keep going
    with degraded accuracy or report it.
    """

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved

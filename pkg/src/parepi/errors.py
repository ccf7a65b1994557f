"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI prints
on failure.
"""


class ParepiError(Exception):
    code = "error"


class ParseError(ParepiError):
    code = "parse"


class ValidationError(ParepiError, ValueError):
    code = "validation"


class NoConvergence(ParepiError):
    """Iterative method stopped before reaching its tolerance.

    ``estimate`` holds the best value found and ``residual`` the last residual.
    """

    code = "no_convergence"

    def __init__(self, message, estimate=None, residual=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations


class DegenerateEigenvalue(ParepiError):
    code = "degenerate_eigenvalue"


class StepSizeError(ParepiError, ValueError):
    code = "step_size"


class NotMonatomic(ParepiError):
    code = "not_monatomic"


class InfeasibleCost(ParepiError, ValueError):
    code = "infeasible_cost"


class InfeasibleLoss(ParepiError, ValueError):
    code = "infeasible_loss"


class TooLarge(ParepiError, ValueError):
    code = "too_large"

"""Exception types shared across the package."""


class MlasceError(Exception):
    """Base class for package-specific failures."""


class FactorizationError(MlasceError):
    """Cholesky factorization failed even after jitter escalation.

    ``jitter`` records the largest diagonal addition that was tried.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class BudgetError(MlasceError):
    """Total budget too small to initialize every fidelity level."""


class InfeasibleError(MlasceError):
    """Allocation problem has no feasible point under the budget."""


class CandidatesExhausted(MlasceError):
    """A sequential design ran out of candidate points."""


class SimulatorError(MlasceError):
    """A simulator evaluation failed.

    Carries the offending input ``x`` and, when known, the fidelity
    ``level`` plus any captured ``detail`` (e.g. subprocess output).
    """

    def __init__(self, message, x=None, level=None, detail=None):
        super().__init__(message)
        self.x = x
        self.level = level
        self.detail = detail


class ConfigError(MlasceError):
    """Malformed or inconsistent run configuration."""

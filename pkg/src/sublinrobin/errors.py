"""Exception hierarchy shared by the solvers."""


class ConfigError(ValueError):
    """Invalid geometry, weight, problem or run configuration."""


class SolverError(RuntimeError):
    """A numerical procedure failed; ``info`` carries diagnostics."""

    def __init__(self, message: str, **info):
        super().__init__(message)
        self.info = info


class SingularOperatorError(SolverError):
    pass


class PositivityGuardError(SolverError):
    """A field dropped below the positivity threshold before u^(q-1) was formed."""


class LeftConeError(SolverError):
    """Newton iterates left the cone of strictly positive fields."""


class FoldProximityError(SolverError):
    pass


class NoConvergenceError(SolverError):
    pass


class NoPrincipalEigenvalueError(SolverError):
    pass


class BracketError(SolverError):
    pass


class DegenerateNormalizationError(SolverError):
    pass

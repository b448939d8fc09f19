"""Exception hierarchy shared by the solver, simulator and CLI."""


class DebtGameError(Exception):
    """Base class for all package errors."""


class NonFinite(DebtGameError, ValueError):
    pass


class AssumptionViolation(DebtGameError, ValueError):
    """One or more standing parameter assumptions fail.

    ``violations`` is a list of ``(name, lhs, rhs)`` triples, one per failed
    inequality ``lhs > rhs``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{n}: {lhs!r} !> {rhs!r}" for n, lhs, rhs in self.violations)
        super().__init__(msg)

    @property
    def names(self):
        return [v[0] for v in self.violations]


class DomainError(DebtGameError, ValueError):
    pass


class QuadratureFailure(DebtGameError, ArithmeticError):
    pass


class SolverError(DebtGameError):
    """Base for root-finding / equilibrium failures (CLI exit code 3)."""


class BracketFailure(SolverError):
    pass


class PeakNotFound(SolverError):
    pass


class BoundaryRegime(SolverError):
    pass


class MultipleRoots(SolverError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class ConfigError(DebtGameError, ValueError):
    pass


class SimulationBudgetExceeded(DebtGameError):
    pass


class MismatchedStreams(DebtGameError, ValueError):
    pass

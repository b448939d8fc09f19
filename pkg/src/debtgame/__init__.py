"""Threshold equilibria of the government / legislator debt-ceiling game."""

from .equilibrium import NashOutcome, solve_nash
from .errors import (AssumptionViolation, BoundaryRegime, BracketFailure, ConfigError,
                     DebtGameError, DomainError, MismatchedStreams, MultipleRoots, NonFinite,
                     PeakNotFound, QuadratureFailure, SimulationBudgetExceeded, SolverError)
from .model import ModelParams, RegimeTag, char_roots, classify_regime, table_params, validate_params

__version__ = "0.1.0"

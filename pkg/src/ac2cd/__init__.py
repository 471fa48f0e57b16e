"""Almost cyclic 2-coordinate descent for problems with one linear equality and box bounds."""

from .exceptions import ContractError, LineSearchError, OracleError, UndefinedQuantityError
from .linesearch import ArmijoParams, Strategy
from .problem import (
    BoxSimplexProblem,
    FactoredQuadraticObjective,
    QuadraticObjective,
    SolutionCertificate,
    kkt_certificate,
)
from .solver import Permutation, SolverConfig, TraceLevel, identification_detector, solve

__all__ = [
    "ArmijoParams",
    "BoxSimplexProblem",
    "ContractError",
    "FactoredQuadraticObjective",
    "LineSearchError",
    "OracleError",
    "Permutation",
    "QuadraticObjective",
    "SolutionCertificate",
    "SolverConfig",
    "Strategy",
    "TraceLevel",
    "UndefinedQuantityError",
    "identification_detector",
    "kkt_certificate",
    "solve",
]

__version__ = "0.1.0"

"""Exception hierarchy for the workbench.

Every error carries the process exit code the command line uses for it:
1 for usage problems, 2 for refutation events and 3 for exhausted resources.
"""

from typing import Any, Dict, Optional

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_REFUTED = 2
EXIT_RESOURCE = 3


class WorkbenchError(Exception):
    """Base class for all workbench errors."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the error for JSON reports.

        Returns:
            Dict[str, Any]: Error kind, message and details.
        """
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class DimensionMismatch(WorkbenchError):
    """Operands live in different ambient dimensions."""


class InvalidDescriptor(WorkbenchError):
    """A descriptor (finite quotient, matrix or element) is malformed or violates its invariants."""


class NotInvertibleMod(WorkbenchError):
    """A matrix is not invertible modulo the requested modulus."""


class PreconditionFailed(WorkbenchError):
    """An operation was called outside its documented domain."""


class HypothesisViolated(PreconditionFailed):
    """A lemma hypothesis does not hold for the supplied data."""


class InconsistentData(WorkbenchError):
    """Input fixtures contradict each other."""


class NoCover(WorkbenchError):
    """A point lies in no member of a cover."""


class NotInverse(WorkbenchError):
    """Two morphisms claimed to be inverse are not."""


class Undecided(WorkbenchError):
    """A numerical decision falls inside the tolerance band."""


class NoFactorization(WorkbenchError):
    """A support pair admits no bounded word factorization."""


class ContractionFailed(WorkbenchError):
    """A contracting map exceeds its target on some pair."""


class DescentFailed(WorkbenchError):
    """A coset map is not constant on cosets."""


class EquivarianceFailed(WorkbenchError):
    """A map violates its equivariance bound."""


class ClassificationFailed(WorkbenchError):
    """A subgroup preimage matched no case of the pipeline."""

    exit_code = EXIT_REFUTED


class LemmaFalsified(WorkbenchError):
    """A lemma that should always hold was refuted by a concrete instance."""

    exit_code = EXIT_REFUTED


class OrbitNotSimplex(WorkbenchError):
    """A vertex orbit fails to span a simplex."""

    exit_code = EXIT_REFUTED


class NotAContraction(WorkbenchError):
    """No chain contraction of a mapping cone could be produced."""


class NotInvertible(WorkbenchError):
    """A matrix expected to be invertible is not."""


class EigenvalueRootOfUnity(WorkbenchError):
    """The twisting matrix has an eigenvalue that is a root of unity."""


class CapExceeded(WorkbenchError):
    """An enumeration outgrew its configured cap."""

    exit_code = EXIT_RESOURCE


class SearchBudgetExceeded(WorkbenchError):
    """A search ran out of candidates before succeeding."""

    exit_code = EXIT_RESOURCE


class PrimeSearchExhausted(SearchBudgetExceeded):
    """Not enough primes were found below the candidate cap."""

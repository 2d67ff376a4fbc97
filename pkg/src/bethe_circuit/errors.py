"""Exception hierarchy for circuit construction."""


class BetheCircuitError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BetheCircuitError, ValueError):
    """Argument outside the domain of a combinatorial or algebraic map."""


class DegenerateMomentaError(BetheCircuitError, ValueError):
    """Two selected momentum variables coincide, so the wavefunction vanishes."""


class NotPositiveDefiniteError(BetheCircuitError, ArithmeticError):
    """An overlap matrix has a non-positive (or numerically vanishing) leading minor."""

    def __init__(self, message: str, *, sector: int | None = None, k: int | None = None):
        super().__init__(message)
        self.sector = sector
        self.k = k


class RankError(NotPositiveDefiniteError):
    """The leading block of a semidefinite overlap matrix is singular."""


class ConstructionError(BetheCircuitError, RuntimeError):
    """A gate failed a structural check (isometry, U(1) block structure)."""

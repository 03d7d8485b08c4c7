"""
Exception hierarchy for stochastic_pf.

Library code raises these; only the orchestration layer (experiment, verify,
cli) catches them and turns them into report rows or exit codes.
"""

from typing import Optional

import numpy as np


class StochasticPFError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(StochasticPFError, ValueError):
    """Vector or matrix shape disagrees with the cone dimension."""


class DegenerateCone(StochasticPFError, ValueError):
    """Cone data does not describe a solid proper cone."""


class NotInCone(StochasticPFError, ValueError):
    """A point required to lie in a cone does not."""

    def __init__(self, message: str, vector: Optional[np.ndarray] = None):
        super().__init__(message)
        self.vector = None if vector is None else np.array(vector, dtype=float)


class BoundaryPoint(StochasticPFError, ValueError):
    """A reference vector lies on the cone boundary, so a ratio is infinite."""


class MapAnnihilates(StochasticPFError, ArithmeticError):
    """D(x) = 0 for some nonzero x: the map is not completely monotone there."""

    def __init__(self, message: str, witness: Optional[np.ndarray] = None):
        super().__init__(message)
        self.witness = None if witness is None else np.array(witness, dtype=float)


class IndexBudgetExceeded(StochasticPFError, IndexError):
    """An environment index is outside the counter-based generator budget."""


class NoAdmissibleSample(StochasticPFError, ValueError):
    """A Monte-Carlo estimate found no sample it could use."""


class NotConverged(StochasticPFError, RuntimeError):
    """A pullback solve did not converge; the trace is attached."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(StochasticPFError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field

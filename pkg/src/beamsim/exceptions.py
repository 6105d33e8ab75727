"""Exception types raised by beamsim."""

import numpy as np


class ContractError(ValueError):
    """An input violates a documented precondition."""


class DecompositionError(np.linalg.LinAlgError):
    """A matrix factorization failed to converge."""


class SingularCombinerError(np.linalg.LinAlgError):
    """The combiner noise covariance is singular."""


class InfeasibleCodebookError(ValueError):
    """A lobe's feasible codeword set cannot supply the requested beams."""


class ConfigError(ValueError):
    """Invalid simulation or sweep configuration."""

"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical or configuration parameter is out of its valid range."""


class DegenerateSpectrumError(ValueError):
    """All sampled mode frequencies coincide; no timescales can be derived."""


class ConfigurationRejectedError(ValueError):
    """A run configuration violates a required regime or window condition."""


class StiffnessError(RuntimeError):
    """The adaptive integrator was forced below its minimum step size."""


class DivergenceError(RuntimeError):
    """The integrated state became non-finite."""


class InsufficientDataError(ValueError):
    """A statistical operation was given too short a record."""

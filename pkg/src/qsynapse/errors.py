"""Exception and warning types shared across the package."""


class NumericalDivergenceError(RuntimeError):
    """Membrane potential became non-finite during integration."""

    def __init__(self, neuron: int, time_ms: float):
        self.neuron = neuron
        self.time_ms = time_ms
        super().__init__(
            f"non-finite membrane potential for neuron {neuron} at t = {time_ms} ms"
        )


class DegenerateStateError(ValueError):
    """An operation produced (or would renormalize) a zero-norm state."""


class DegenerateEncodingError(DegenerateStateError):
    """All encoding probabilities are zero; no state can be built."""


class UnknownTagError(ValueError):
    """A color tag is not an element of the composition table."""


class ConfigError(ValueError):
    """Scenario or input-file validation failure."""


class ConstraintViolationWarning(UserWarning):
    """A user-supplied probability-sum bound was exceeded (never fatal)."""

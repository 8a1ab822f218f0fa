class HopsimError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigurationError(HopsimError, ValueError):
    """A run was configured with parameters that cannot be simulated."""


class SimulationError(HopsimError, RuntimeError):
    """A simulation invariant was violated while the run was in progress."""

    def __init__(self, message, trace_tail=None):
        super().__init__(message)
        self.trace_tail = list(trace_tail or [])

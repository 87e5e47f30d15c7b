class PriorSimError(Exception):
    """Base class for all errors raised by the simulator."""


class DatasetError(PriorSimError):
    """Raised when a demonstration dataset or demo file is malformed."""


class DimensionError(PriorSimError):
    """Raised when a parameter vector does not match its environment."""


class UnsupportedError(PriorSimError):
    """Raised when an operation is asked for a variant it does not handle."""


class ConfigError(PriorSimError):
    """Raised for invalid or incomplete experiment configuration."""


class OptimizationError(PriorSimError):
    """Raised when the dual optimization produces a non-finite objective."""

    def __init__(self, message: str, iteration: int):
        """Initialize the error.

        Args:
            message (str): Human readable description.
            iteration (int): Iteration at which the failure was detected.
        """
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class SamplerError(PriorSimError):
    """Raised when an SGLD chain hits a non-finite gradient."""

    def __init__(self, message: str, step: int):
        """Initialize the error.

        Args:
            message (str): Human readable description.
            step (int): Chain step at which the failure was detected.
        """
        super().__init__(f"{message} (step {step})")
        self.step = step

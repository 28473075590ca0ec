"""Exception types shared across the package."""


class NumericalError(ArithmeticError):
    """Base class for failures of the numerics (exit code 1 in the CLI)."""


class FieldDivergence(NumericalError):
    pass


class SolverDivergence(NumericalError):
    def __init__(self, step_index, message="non-finite state"):
        super().__init__(f"{message} at timestep index {step_index}")
        self.step_index = step_index


class TrainingDivergence(NumericalError):
    pass


class TensorFormatError(ValueError):
    """Raised when a file does not hold a valid RFTENSOR payload."""

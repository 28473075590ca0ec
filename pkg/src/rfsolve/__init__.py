"""Taylor-expansion samplers, inversion and value-sharing edits for rectified flows."""

from rfsolve.errors import (
    FieldDivergence,
    NumericalError,
    SolverDivergence,
    TensorFormatError,
    TrainingDivergence,
)
from rfsolve.field import (
    Constant,
    GaussianPairOT,
    LinearState,
    LinearTime,
    QuadraticTime,
    Rotation,
    VelocityField,
    evaluate,
    exact_solution,
)
from rfsolve.solver import (
    SolverConfig,
    StepReport,
    TimeGrid,
    TrajectoryRecord,
    estimate_derivative,
    euler_step,
    rf_solver2_step,
    rf_solver3_step,
    run_trajectory,
)

__version__ = "0.1.0"

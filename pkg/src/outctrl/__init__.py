"""Output controllability of linear time-invariant systems.

Kalman, Hautus-type and Gramian output tests, parallel connections of
systems, and minimum-energy open-loop steering of the output.
"""

from .controllability import (
    CrossCheckReport,
    Criterion,
    Gramian,
    ParallelReport,
    Verdict,
    cross_check,
    gramian_output_test,
    hautus_output_test,
    hautus_state_test,
    kalman_output_matrix,
    kalman_output_test,
    output_gramian,
    parallel_sufficiency_check,
)
from .errors import (
    DimensionError,
    DomainError,
    FormatError,
    GenerationError,
    NotOutputControllable,
    NumericFailure,
    OutctrlError,
    TargetUnreachable,
)
from .lti_model import LtiSystem, parallel_connect, random_system, validate
from .numerics import ToleranceConfig, expm, image_equal, rank_of, solve_hermitian, spectrum_of, state_gramian
from .synthesis import ControlSignal, SteeringProblem, SteeringResult, min_norm_control, simulate, verify_steering

__version__ = "0.1.0"

"""MDP-based cell selection and handover for mmWave cellular networks."""

__version__ = "0.1.0"

from .channel import (
    LOS,
    NLOS,
    OUTAGE,
    CalibrationResult,
    CalibrationTargets,
    ChannelMatrix,
    calibrate_matrix,
    holding_time_mean,
    preset,
    sample_paths,
    sample_transition,
    steady_state,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegeneracyError,
    MmwaveMdpError,
    SizeLimitError,
    UnsupportedError,
    ValidationError,
)
from .mdp import (
    Kernel,
    SolverParams,
    ValueIterationResult,
    expected_reward,
    policy_evaluation_exact,
    transition_reward,
    value_iteration,
)
from .multiuser import (
    ConvergeResult,
    MultiUserEnv,
    PolicyProfile,
    best_response,
    build_kernel,
    converge,
    random_profile,
    selection_probabilities,
    verify_fixed_point,
)
from .rates import RateTable
from .sim import Metrics, RunResult, SimConfig, run, run_single, sweep, throughput
from .states import (
    Connection,
    StateSpace,
    SystemState,
    canonicalize,
    closed_form_load_combinations,
    closed_form_occupancy_count,
    closed_form_state_count,
    enumerate_states,
)

__all__ = [name for name in dir() if not name.startswith("_")]

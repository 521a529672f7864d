"""Minimum-power allocation for two-hop amplify-and-forward MIMO relays."""

from .bounds import BoundsReport, solve_dfe, solve_linear
from .channel import (ChannelEigen, ChannelRealization, InfeasibleDimensionError,
                      decompose, generate_channel, read_channel_file, write_channel_file)
from .convex import ConvergenceError, OracleResult, SolverConfig
from .dfe import (ThetaAllocation, allocation_from_theta, inflection_phi,
                  lower_bound_nonlinear, q_function, solve_exponential, tangent_psi)
from .linear import (Allocation, FeasibilityError, QosVector, StreamProfile,
                     ab_from_lambda, allocation_from_lambda, check_convexity_condition,
                     hyperbola_coeffs, inflection_alpha, lower_bound_linear,
                     per_stream_power, solve_hyperbola, stream_profile, tangent_beta)
from .oracles import CapabilityError, alternating_ab, convex_solve, grid_search
from .sweep import SweepConfig, SweepRow, emit_csv, run_sweep
from .transceiver import (TransceiverMatrices, build_dfe, build_linear, mse_matrix,
                          rotation_equal_qos, total_power_matrices)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport",
    "solve_dfe",
    "solve_linear",
    "ChannelEigen",
    "ChannelRealization",
    "InfeasibleDimensionError",
    "decompose",
    "generate_channel",
    "read_channel_file",
    "write_channel_file",
    "ConvergenceError",
    "OracleResult",
    "SolverConfig",
    "ThetaAllocation",
    "allocation_from_theta",
    "inflection_phi",
    "lower_bound_nonlinear",
    "q_function",
    "solve_exponential",
    "tangent_psi",
    "Allocation",
    "FeasibilityError",
    "QosVector",
    "StreamProfile",
    "ab_from_lambda",
    "allocation_from_lambda",
    "check_convexity_condition",
    "hyperbola_coeffs",
    "inflection_alpha",
    "lower_bound_linear",
    "per_stream_power",
    "solve_hyperbola",
    "stream_profile",
    "tangent_beta",
    "CapabilityError",
    "alternating_ab",
    "convex_solve",
    "grid_search",
    "SweepConfig",
    "SweepRow",
    "emit_csv",
    "run_sweep",
    "TransceiverMatrices",
    "build_dfe",
    "build_linear",
    "mse_matrix",
    "rotation_equal_qos",
    "total_power_matrices",
]

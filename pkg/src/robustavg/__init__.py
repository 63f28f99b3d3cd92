"""Robust average-reward MDP solvers for (s,a)-rectangular uncertainty sets."""
from .direct import (
    RviParams,
    bellman_residual_eval,
    check_stationary_equivalence,
    optimality_residual,
    robust_rvi_control,
    robust_rvi_eval,
)
from .discounted import DiscountedSolveParams, robust_dvi_control, robust_dvi_eval
from .garnet import GarnetConfig, fingerprint, generate
from .limit import (
    LimitSolveParams,
    blackwell_probe,
    gamma_schedule,
    robust_avg_control_limit,
    robust_avg_eval_limit,
)
from .mdp import GainBias, MdpModel, ModelError, Policy, greedy_policy, induced_chain, span, validate_model
from .report import SolveReport
from .uncertainty import Kind, SupportResult, UncertaintySpec, support, worst_kernel

__version__ = "0.1.0"

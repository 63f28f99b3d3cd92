"""Robust discounted dynamic programming (evaluation and control)."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .mdp import MdpModel, Policy, greedy_policy
from .report import SolveReport
from .uncertainty import SupportOperator, UncertaintySpec


@dataclass(frozen=True)
class DiscountedSolveParams:
    gamma: float
    tol: float = 1e-8
    max_iter: int = 1_000_000

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")


def _operator(model, spec):
    return spec if isinstance(spec, SupportOperator) else SupportOperator(model, spec)


def bellman_eval_op(model: MdpModel, spec, policy: Policy, gamma: float, v) -> np.ndarray:
    """``(T_pi v)(s) = sum_a pi(a|s) (r(s,a) + gamma * sigma_sa(v))``."""
    pi = policy.probs
    sig = _operator(model, spec)(v, pi > 0)
    q = model.rewards + gamma * np.nan_to_num(sig)
    return np.einsum("sa,sa->s", pi, q)


def bellman_q(model: MdpModel, spec, gamma: float, v) -> np.ndarray:
    return model.rewards + gamma * _operator(model, spec)(v)


def bellman_ctrl_op(model: MdpModel, spec, gamma: float, v) -> np.ndarray:
    return bellman_q(model, spec, gamma, v).max(axis=1)


def _iterate(step, v0, params: DiscountedSolveParams, report: SolveReport, trace_every: int):
    v = v0
    t0 = time.perf_counter()
    diff = np.inf
    for t in range(params.max_iter):
        v_new = step(v)
        diff = float(np.max(np.abs(v_new - v)))
        v = v_new
        if t % trace_every == 0:
            report.trace.append(diff)
        if diff < params.tol:
            report.converged = True
            break
    report.iterations = t + 1
    report.final_residual = diff
    report.elapsed_s = time.perf_counter() - t0
    # distance to the fixed point is at most gamma/(1-gamma) times the last step
    report.extras["error_bound"] = params.gamma * diff / (1.0 - params.gamma)
    report.extras["fixed_point_residual"] = float(np.max(np.abs(step(v) - v)))
    report.extras["residual_guard"] = params.tol / (1.0 - params.gamma)
    if not report.converged:
        report.warnings.append(f"no convergence within {params.max_iter} iterations")
    return v


def robust_dvi_eval(
    model: MdpModel,
    spec: UncertaintySpec,
    policy: Policy,
    params: DiscountedSolveParams,
    v0=None,
    trace_every: int = 1,
):
    """Iterate the robust policy Bellman operator from ``v0`` (zeros by default)."""
    op = _operator(model, spec)
    v = np.zeros(model.n_states) if v0 is None else np.array(v0, dtype=float)
    report = SolveReport("robust-dvi-eval", extras={"gamma": params.gamma})
    v = _iterate(
        lambda x: bellman_eval_op(model, op, policy, params.gamma, x), v, params, report, trace_every
    )
    return v, report


def robust_dvi_control(
    model: MdpModel,
    spec: UncertaintySpec,
    params: DiscountedSolveParams,
    v0=None,
    trace_every: int = 1,
):
    """Robust value iteration; returns the value, its greedy policy and a report."""
    op = _operator(model, spec)
    v = np.zeros(model.n_states) if v0 is None else np.array(v0, dtype=float)
    report = SolveReport("robust-dvi", extras={"gamma": params.gamma})
    v = _iterate(lambda x: bellman_ctrl_op(model, op, params.gamma, x), v, params, report, trace_every)
    policy = greedy_policy(bellman_q(model, op, params.gamma, v))
    report.extras["policy"] = policy.actions.tolist()
    return v, policy, report

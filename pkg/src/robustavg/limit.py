"""Average-reward robust VI through a sequence of discounted operators.

Each sweep applies the robust discounted Bellman operator scaled by
``1 - gamma_t`` with ``gamma_t = 1 - c/(t+2)`` (``c = 1`` by default), so the
iterate tracks ``(1 - gamma) V_gamma`` as the discount factor approaches one
and converges to the robust average reward.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .discounted import DiscountedSolveParams, robust_dvi_control
from .mdp import MdpModel, Policy, greedy_policy
from .report import SolveReport
from .uncertainty import SupportOperator, UncertaintySpec

DEFAULT_T = 10_000


@dataclass(frozen=True)
class LimitSolveParams:
    T: int = DEFAULT_T
    report_every: int = 100
    schedule_c: float = 1.0

    def __post_init__(self):
        if self.T < 1 or self.report_every < 1:
            raise ValueError("T and report_every must be positive")
        if not 0.0 < self.schedule_c <= 2.0:
            raise ValueError("schedule_c must lie in (0, 2] to keep gamma_0 in [0, 1)")


def gamma_schedule(t: int, c: float = 1.0) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return 1.0 - c / (t + 2)


def _operator(model, spec):
    return spec if isinstance(spec, SupportOperator) else SupportOperator(model, spec)


def robust_avg_eval_limit(
    model: MdpModel, spec: UncertaintySpec, policy: Policy, params: LimitSolveParams = LimitSolveParams()
):
    """Robust VI policy evaluation; returns ``V_T`` (approximately the robust gain in every state)."""
    op = _operator(model, spec)
    pi = policy.probs
    mask = pi > 0
    r = model.rewards
    v = np.zeros(model.n_states)
    report = SolveReport("robust-vi-limit-eval")
    t0 = time.perf_counter()
    for t in range(params.T):
        g = gamma_schedule(t, params.schedule_c)
        sig = np.nan_to_num(op(v, mask))
        v_new = np.einsum("sa,sa->s", pi, (1 - g) * r + g * sig)
        diff = float(np.max(np.abs(v_new - v)))
        v = v_new
        if t % params.report_every == 0 or t == params.T - 1:
            report.trace.append(diff)
    report.iterations = params.T
    report.converged = True
    report.final_residual = diff
    report.elapsed_s = time.perf_counter() - t0
    return v, report


def robust_avg_control_limit(
    model: MdpModel, spec: UncertaintySpec, params: LimitSolveParams = LimitSolveParams(), callback=None
):
    """Robust VI optimal control with the increasing discount schedule.

    ``callback(t, policy)``, when given, receives the greedy policy of every
    sweep (the argmax of the q-values that produced ``V_{t+1}``).
    """
    op = _operator(model, spec)
    r = model.rewards
    v = np.zeros(model.n_states)
    report = SolveReport("robust-vi-limit")
    t0 = time.perf_counter()
    g = gamma_schedule(0, params.schedule_c)
    for t in range(params.T):
        g = gamma_schedule(t, params.schedule_c)
        q = (1 - g) * r + g * op(v)
        v_new = q.max(axis=1)
        if callback is not None:
            callback(t, greedy_policy(q))
        diff = float(np.max(np.abs(v_new - v)))
        v = v_new
        if t % params.report_every == 0 or t == params.T - 1:
            report.trace.append(diff)
    # greedy extraction at the last schedule value gamma_{T-1}
    policy = greedy_policy((1 - g) * r + g * op(v))
    report.iterations = params.T
    report.converged = True
    report.final_residual = diff
    report.elapsed_s = time.perf_counter() - t0
    report.extras["policy"] = policy.actions.tolist()
    report.extras["extraction_gamma"] = g
    return v, policy, report


def blackwell_probe(
    model: MdpModel,
    spec: UncertaintySpec,
    gamma_grid,
    tail: int | None = None,
    tol: float = 1e-6,
    max_iter: int = 2_000_000,
):
    """Greedy robust-discounted policy for each discount factor in ``gamma_grid``.

    Returns ``(rows, stable)`` where ``rows`` is a list of ``(gamma, policy)``
    sorted by gamma and ``stable`` tells whether the policy is constant over
    the last ``tail`` grid points (the whole grid by default).  Successive
    solves are warm-started from the previous value shifted by the change in
    ``g / (1 - gamma)``, with the gain ``g`` estimated as
    ``(1 - gamma_prev) * mean(V_prev)``.
    """
    op = _operator(model, spec)
    rows = []
    v0 = None
    prev = None
    for gamma in sorted(gamma_grid):
        if not 0.0 <= gamma < 1.0:
            raise ValueError("every gamma must lie in [0, 1)")
        if v0 is not None:
            g_est = (1 - prev) * float(np.mean(v0))
            v0 = v0 + g_est * (1 / (1 - gamma) - 1 / (1 - prev))
        v, policy, rep = robust_dvi_control(
            model, op, DiscountedSolveParams(gamma, tol, max_iter), v0=v0, trace_every=10_000
        )
        if not rep.converged:
            raise RuntimeError(f"robust discounted VI did not converge at gamma={gamma}")
        rows.append((gamma, policy))
        v0, prev = v, gamma
    last = rows[-(tail or len(rows)):]
    stable = all(p == last[0][1] for _, p in last)
    return rows, stable

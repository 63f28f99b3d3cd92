"""Direct average-reward approach: robust relative value iteration.

The undiscounted robust operator ``L w(s) = max_a r(s,a) + sigma_sa(w)`` is
iterated with the value at a reference state subtracted each sweep.  At a
fixed point the subtracted offset is the optimal robust gain and ``w`` a
matching bias, which the residual functions below certify.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import oracle
from .mdp import GainBias, MdpModel, Policy, greedy_policy, span
from .report import SolveReport
from .uncertainty import Kind, SupportOperator, UncertaintySpec


@dataclass(frozen=True)
class RviParams:
    epsilon: float = 1e-8
    ref_state: int = 0
    max_iter: int = 1_000_000

    def __post_init__(self):
        if self.epsilon <= 0 or self.ref_state < 0 or self.max_iter < 1:
            raise ValueError("need epsilon > 0, ref_state >= 0, max_iter >= 1")


def _operator(model, spec):
    return spec if isinstance(spec, SupportOperator) else SupportOperator(model, spec)


def rvi_op_control(model: MdpModel, spec, w) -> np.ndarray:
    return (model.rewards + _operator(model, spec)(w)).max(axis=1)


def rvi_op_eval(model: MdpModel, spec, policy: Policy, w) -> np.ndarray:
    pi = policy.probs
    sig = np.nan_to_num(_operator(model, spec)(w, pi > 0))
    return np.einsum("sa,sa->s", pi, model.rewards + sig)


def positivity_violations(model: MdpModel, spec: UncertaintySpec) -> list[str]:
    """Ways in which some kernel of the set may have a zero entry.

    Strict positivity of every candidate kernel underpins the span-contraction
    convergence argument; the solvers run regardless and report these.
    """
    if spec.smoothing > 0:
        return []
    out = []
    K = model.kernel
    if np.any(K <= 0):
        out.append("nominal kernel has zero entries")
    R = spec.radius_matrix(model.n_states, model.n_actions)[..., None]
    if spec.kind is Kind.CONTAMINATION:
        hit = np.any(R > 0)
    elif spec.kind is Kind.TV:
        hit = np.any((R > 0) & (R >= K))
    else:
        with np.errstate(divide="ignore"):
            hit = np.any((R > 0) & (R >= -np.log1p(-np.minimum(K, 1.0))))
    if hit:
        out.append(f"{spec.kind.value} set of radius {np.max(R):g} contains kernels with zero entries")
    return out


def _rvi(model, spec, params: RviParams, apply, method: str, w0=None):
    if params.ref_state >= model.n_states:
        raise ValueError("ref_state out of range")
    s_ref = params.ref_state
    if isinstance(spec, SupportOperator):
        spec = spec.spec
    report = SolveReport(method, warnings=positivity_violations(model, spec))
    w = np.zeros(model.n_states) if w0 is None else np.array(w0, dtype=float)
    w = w - w[s_ref]
    t0 = time.perf_counter()
    gain = 0.0
    diff = np.inf
    for t in range(params.max_iter):
        V = apply(w)
        gain = float(V[s_ref])
        w_new = V - gain
        diff = span(w_new - w)
        w = w_new
        if t < 1000 or t % 1000 == 0:
            report.trace.append(diff)
        if diff < params.epsilon:
            report.converged = True
            break
    report.iterations = t + 1
    report.final_residual = diff
    report.elapsed_s = time.perf_counter() - t0
    if not report.converged:
        report.warnings.append(f"span of successive differences still {diff:.3g} after {params.max_iter} iterations")
    return GainBias(np.full(model.n_states, gain), w), report


def robust_rvi_control(model: MdpModel, spec: UncertaintySpec, params: RviParams = RviParams(), w0=None):
    """Robust RVI for optimal control.

    Returns ``(GainBias, policy, report)``.  The report carries the
    optimality-equation residual of the returned pair as its certificate.
    """
    op = _operator(model, spec)
    gb, report = _rvi(model, spec, params, lambda w: rvi_op_control(model, op, w), "robust-rvi", w0)
    q = model.rewards + op(gb.bias)
    policy = greedy_policy(q)
    report.extras["optimality_residual"] = optimality_residual(model, op, gb.g, gb.bias)
    report.extras["policy"] = policy.actions.tolist()
    report.extras["gain"] = gb.g
    return gb, policy, report


def robust_rvi_eval(
    model: MdpModel, spec: UncertaintySpec, policy: Policy, params: RviParams = RviParams(), w0=None
):
    """Robust RVI with the max replaced by the policy expectation; returns ``(GainBias, report)``."""
    op = _operator(model, spec)
    gb, report = _rvi(
        model, spec, params, lambda w: rvi_op_eval(model, op, policy, w), "robust-rvi-eval", w0
    )
    report.extras["bellman_residual"] = bellman_residual_eval(model, op, policy, gb.g, gb.bias)
    report.extras["gain"] = gb.g
    return gb, report


def optimality_residual(model: MdpModel, spec, g: float, v) -> float:
    """``max_s |max_a {r(s,a) - g + sigma_sa(v) - v(s)}|``."""
    v = np.asarray(v, dtype=float)
    q = model.rewards + _operator(model, spec)(v)
    return float(np.max(np.abs(q.max(axis=1) - g - v)))


def bellman_residual_eval(model: MdpModel, spec, policy: Policy, g: float, v) -> float:
    """``max_s |sum_a pi(a|s)(r(s,a) + sigma_sa(v)) - v(s) - g|``."""
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(rvi_op_eval(model, spec, policy, v) - v - g)))


@dataclass(frozen=True)
class StationaryEquivalence:
    robust_gain: float
    oracle_gain: float
    difference: float
    worst_kernel: np.ndarray
    passed: bool


def check_stationary_equivalence(
    model: MdpModel, spec: UncertaintySpec, policy: Policy, params: RviParams = RviParams(), tol: float = 1e-5
) -> StationaryEquivalence:
    """Compare the robust gain with the plain gain of the single worst stationary kernel.

    The worst kernel is read off the support minimizers at the robust bias;
    its gain comes from the exact chain oracle.
    """
    op = _operator(model, spec)
    gb, _ = robust_rvi_eval(model, op, policy, params)
    K = op.minimizers(gb.bias)
    g_oracle = oracle.gain_and_bias(model, K, policy).gain
    diff = float(np.max(np.abs(g_oracle - gb.g)))
    return StationaryEquivalence(gb.g, float(np.mean(g_oracle)), diff, K, diff <= tol)

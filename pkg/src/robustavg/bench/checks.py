"""Invariant suite run by ``robustavg check`` on a single instance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import oracle
from ..direct import (
    RviParams,
    bellman_residual_eval,
    check_stationary_equivalence,
    optimality_residual,
    robust_rvi_control,
    robust_rvi_eval,
)
from ..discounted import bellman_ctrl_op, bellman_eval_op
from ..limit import LimitSolveParams, blackwell_probe, robust_avg_control_limit
from ..mdp import MdpModel, Policy, validate_model
from ..uncertainty import (
    Kind,
    SupportOperator,
    UncertaintySpec,
    kl_divergence,
    oracle_support_lp,
)

BLACKWELL_GRID = (0.99, 0.999, 0.9999)
BLACKWELL_MAX_PAIRS = 64


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tol": self.tol, "passed": self.passed, "note": self.note}


def _le(name, value, tol, note=""):
    value = float(value)
    return Check(name, value, tol, bool(value <= tol), note)


def support_certificates(model: MdpModel, spec: UncertaintySpec, rng) -> list[Check]:
    """Compare every row's support value with an independent certificate.

    Polyhedral sets use an LP solve; KL uses the primal-dual gap between the
    feasible minimizer and the dual lower bound.
    """
    bare = UncertaintySpec(spec.kind, spec.radius)
    op = SupportOperator(model, bare)
    v = rng.random(model.n_states)
    vals = op(v)
    Q = op.minimizers(v)
    S, A = model.n_states, model.n_actions
    worst_gap = worst_infeas = 0.0
    for s in range(S):
        for a in range(A):
            p, q, R = model.kernel[s, a], Q[s, a], bare.radius_at(s, a)
            worst_gap = max(worst_gap, abs(float(q @ v) - vals[s, a]))
            if spec.kind is Kind.KL:
                worst_infeas = max(worst_infeas, kl_divergence(q, p) - R)
            else:
                worst_gap = max(worst_gap, abs(oracle_support_lp(spec.kind, p, v, R) - vals[s, a]))
    name = "support_vs_lp_oracle" if spec.kind is not Kind.KL else "support_primal_dual_gap"
    out = [_le(name, worst_gap, 1e-7)]
    if spec.kind is Kind.KL:
        out.append(_le("support_minimizer_kl_excess", worst_infeas, 1e-8))
    return out


def contraction(model: MdpModel, spec: UncertaintySpec, rng, gamma=0.9, n_pairs=50) -> list[Check]:
    op = SupportOperator(model, spec)
    pol = Policy.uniform(model.n_states, model.n_actions)
    worst_eval = worst_ctrl = -np.inf
    for _ in range(n_pairs):
        v, w = rng.normal(size=model.n_states) * 5, rng.normal(size=model.n_states) * 5
        d = np.max(np.abs(v - w))
        e = np.max(np.abs(bellman_eval_op(model, op, pol, gamma, v) - bellman_eval_op(model, op, pol, gamma, w)))
        c = np.max(np.abs(bellman_ctrl_op(model, op, gamma, v) - bellman_ctrl_op(model, op, gamma, w)))
        worst_eval = max(worst_eval, e - gamma * d)
        worst_ctrl = max(worst_ctrl, c - gamma * d)
    return [_le("contraction_eval", worst_eval, 1e-12), _le("contraction_control", worst_ctrl, 1e-12)]


def run_checks(model: MdpModel, spec: UncertaintySpec, seed: int = 0, blackwell: bool | None = None) -> list[Check]:
    problems = validate_model(model)
    checks = [Check("validate_model", float(len(problems)), 0.0, not problems, "; ".join(problems[:5]))]
    if problems:
        return checks
    rng = np.random.default_rng(seed)
    op = SupportOperator(model, spec)
    checks += support_certificates(model, spec, rng)
    checks += contraction(model, spec, rng)

    gb, policy, rep = robust_rvi_control(model, op, RviParams())
    checks.append(Check("rvi_converged", float(rep.final_residual), 1e-8, rep.converged))
    checks.append(_le("optimality_residual", optimality_residual(model, op, gb.g, gb.bias), 1e-6))
    gbe, _ = robust_rvi_eval(model, op, policy)
    checks.append(_le("bellman_residual_eval", bellman_residual_eval(model, op, policy, gbe.g, gbe.bias), 1e-6))
    checks.append(_le("eval_matches_control_gain", abs(gbe.g - gb.g), 1e-6))

    lo, hi = float(model.rewards.min()), float(model.rewards.max())
    checks.append(Check("gain_sandwich", gb.g, 0.0, lo - 1e-12 <= gb.g <= hi + 1e-12))

    # the set holds the smoothed nominal row, not the raw one
    d = spec.smoothing
    nominal = oracle.gain_and_bias(model, (1 - d) * model.kernel + d / model.n_states, policy).g
    checks.append(_le("robust_below_nominal", gb.g - nominal, 1e-8))
    if spec.is_degenerate:
        gb0, _, _ = robust_rvi_control(model, UncertaintySpec.nominal(), RviParams())
        checks.append(_le("degenerate_matches_nonrobust", abs(gb.g - gb0.g), 1e-6))

    v_lim, pol_lim, _ = robust_avg_control_limit(model, op, LimitSolveParams())
    checks.append(_le("limit_vs_rvi_gain", float(np.max(np.abs(v_lim - gb.g))), 5e-3))
    checks.append(Check("limit_vs_rvi_policy", float(np.sum(pol_lim.actions != policy.actions)), 0.0, pol_lim == policy))

    eq = check_stationary_equivalence(model, op, policy)
    checks.append(_le("stationary_equivalence", eq.difference, 1e-5))

    reason = "skipped (disabled)"
    if blackwell is None:
        blackwell = model.n_states * model.n_actions <= BLACKWELL_MAX_PAIRS
        reason = "skipped (instance too large)"
    if blackwell:
        rows, stable = blackwell_probe(model, op, BLACKWELL_GRID)
        agree = stable and rows[-1][1] == policy
        checks.append(Check("blackwell_probe", float(not agree), 0.0, agree,
                            " ".join(f"{g}:{p.actions.tolist()}" for g, p in rows)))
    else:
        checks.append(Check("blackwell_probe", 0.0, 0.0, True, reason))
    return checks

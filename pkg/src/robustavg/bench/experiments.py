"""Greedy-policy trajectories and robust-average-reward curves for the harness."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from ..direct import RviParams, robust_rvi_eval
from ..discounted import DiscountedSolveParams
from ..limit import LimitSolveParams, gamma_schedule, robust_avg_eval_limit
from ..mdp import MdpModel, Policy, greedy_policy
from ..uncertainty import SupportOperator, UncertaintySpec

METHODS = ("robust-vi-limit", "robust-rvi", "robust-dvi", "nonrobust-vi", "nonrobust-rvi")
COMPARE_METHODS = ("robust-vi-limit", "nonrobust-vi", "robust-rvi", "nonrobust-rvi")
# (robust, non-robust) pairs whose final values are compared
PAIRS = (("robust-vi-limit", "nonrobust-vi"), ("robust-rvi", "nonrobust-rvi"))
CSV_COLUMNS = ("seed", "t", "method", "kind", "radius", "robust_avg_reward", "elapsed_ms")


@dataclass(frozen=True)
class CurveParams:
    n_iter: int = 100
    eval_every: int = 5
    eval_T: int = 5000
    final_eval_T: int = 20000
    evaluator: str = "limit"
    gamma: float = 0.99
    epsilon: float = 1e-8
    max_iter: int = 1_000_000

    def __post_init__(self):
        if self.evaluator not in ("limit", "rvi"):
            raise ValueError("evaluator must be 'limit' or 'rvi'")
        if self.n_iter < 1 or self.eval_every < 1 or self.eval_T < 1 or self.final_eval_T < 1:
            raise ValueError("iteration counts must be positive")


@dataclass(frozen=True)
class ExperimentRow:
    seed: int
    t: int
    method: str
    kind: str
    radius: float
    robust_avg_reward: float
    elapsed_ms: float

    def as_csv(self, timing: bool) -> list[str]:
        return [
            str(self.seed),
            str(self.t),
            self.method,
            self.kind,
            repr(float(self.radius)),
            f"{self.robust_avg_reward:.12f}",
            f"{self.elapsed_ms:.3f}" if timing else "0",
        ]


def method_spec(method: str, spec: UncertaintySpec) -> UncertaintySpec:
    """The set a method plans against: the nominal kernel for the non-robust baselines."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return UncertaintySpec.nominal() if method.startswith("nonrobust") else spec


def greedy_trajectory(model: MdpModel, spec: UncertaintySpec, method: str, params: CurveParams):
    """Run ``method`` for ``params.n_iter`` sweeps; return the greedy policy and
    cumulative wall time (ms) after every sweep.

    Relative value iteration stops early once the span criterion holds; its
    last policy is then carried forward.
    """
    op = SupportOperator(model, method_spec(method, spec))
    r = model.rewards
    v = np.zeros(model.n_states)
    out = []
    t0 = time.perf_counter()
    done = False
    last = None
    for t in range(params.n_iter):
        if not done:
            if method.endswith("vi-limit") or method == "nonrobust-vi":
                g = gamma_schedule(t)
                q = (1 - g) * r + g * op(v)
                v = q.max(axis=1)
            elif method == "robust-dvi":
                q = r + params.gamma * op(v)
                v = q.max(axis=1)
            else:
                q = r + op(v)
                V = q.max(axis=1)
                w = V - V[0]
                done = float(np.ptp(w - v)) < params.epsilon
                v = w
            last = greedy_policy(q)
        out.append((t + 1, last, (time.perf_counter() - t0) * 1e3))
    return out


class PolicyEvaluator:
    """Robust average reward of deterministic policies, memoized per policy."""

    def __init__(self, model: MdpModel, spec: UncertaintySpec, evaluator: str = "limit", T: int = 5000):
        self.model = model
        self.op = SupportOperator(model, spec)
        self.evaluator = evaluator
        self.T = T
        self._cache: dict[bytes, float] = {}

    def __call__(self, policy: Policy) -> float:
        key = policy.probs.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = evaluate(self.model, self.op, policy, self.evaluator, self.T)
            self._cache[key] = hit
        return hit


def evaluate(model: MdpModel, spec, policy: Policy, evaluator: str = "limit", T: int = 5000) -> float:
    if evaluator == "limit":
        v, _ = robust_avg_eval_limit(model, spec, policy, LimitSolveParams(T=T, report_every=T))
        return float(np.mean(v))
    gb, _ = robust_rvi_eval(model, spec, policy)
    return gb.g


def run_curve(model, spec: UncertaintySpec, method: str, seed: int, params: CurveParams, evaluator=None):
    """Per-checkpoint robust average reward of ``method``'s greedy policies.

    Returns ``(rows, final_policy)``.
    """
    evaluator = evaluator or PolicyEvaluator(model, spec, params.evaluator, params.eval_T)
    traj = greedy_trajectory(model, spec, method, params)
    checkpoints = {1, params.n_iter} | set(range(params.eval_every, params.n_iter + 1, params.eval_every))
    rows = []
    for t, policy, ms in traj:
        if t in checkpoints:
            rows.append(
                ExperimentRow(seed, t, method, spec.kind.value, _radius_label(spec), evaluator(policy), ms)
            )
    return rows, traj[-1][1]


def _radius_label(spec: UncertaintySpec) -> float:
    return float(np.max(spec.radius)) if np.ndim(spec.radius) else float(spec.radius)


@dataclass
class CompareResult:
    rows: list[ExperimentRow] = field(default_factory=list)
    finals: list[dict] = field(default_factory=list)

    def ordering(self, tol: float = 1e-6) -> list[dict]:
        """Robust-vs-non-robust final comparisons, one per (seed, pair)."""
        by = {(f["seed"], f["method"]): f["final_robust_avg_reward"] for f in self.finals}
        out = []
        for seed in sorted({f["seed"] for f in self.finals}):
            for robust, base in PAIRS:
                if (seed, robust) in by and (seed, base) in by:
                    a, b = by[(seed, robust)], by[(seed, base)]
                    out.append(
                        {"seed": seed, "robust": robust, "baseline": base, "robust_value": a,
                         "baseline_value": b, "passed": a >= b - tol}
                    )
        return out


def compare(models: dict[int, MdpModel], spec: UncertaintySpec, methods, params: CurveParams) -> CompareResult:
    """Curves for every (seed, method) plus a final high-budget re-evaluation."""
    if len(methods) < 2:
        raise ValueError("compare needs at least two methods")
    res = CompareResult()
    for seed in sorted(models):
        model = models[seed]
        evaluator = PolicyEvaluator(model, spec, params.evaluator, params.eval_T)
        final_eval = PolicyEvaluator(model, spec, params.evaluator, params.final_eval_T)
        for method in methods:
            rows, final_policy = run_curve(model, spec, method, seed, params, evaluator)
            res.rows.extend(rows)
            res.finals.append(
                {"seed": seed, "method": method, "policy": final_policy.actions.tolist(),
                 "final_robust_avg_reward": final_eval(final_policy)}
            )
    res.rows.sort(key=lambda row: (row.seed, row.t, methods.index(row.method)))
    return res


def rows_to_csv(rows, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(row.as_csv(timing))
    return buf.getvalue()


def mean_curves(rows) -> dict[str, list[tuple[int, float]]]:
    acc: dict[str, dict[int, list[float]]] = {}
    for row in rows:
        acc.setdefault(row.method, {}).setdefault(row.t, []).append(row.robust_avg_reward)
    return {m: [(t, float(np.mean(vals))) for t, vals in sorted(ts.items())] for m, ts in acc.items()}


def discounted_params(params: CurveParams) -> DiscountedSolveParams:
    return DiscountedSolveParams(params.gamma, 1e-8, params.max_iter)


def rvi_params(params: CurveParams) -> RviParams:
    return RviParams(params.epsilon, 0, params.max_iter)


__all__ = [
    "METHODS",
    "COMPARE_METHODS",
    "PAIRS",
    "CSV_COLUMNS",
    "CurveParams",
    "ExperimentRow",
    "CompareResult",
    "method_spec",
    "greedy_trajectory",
    "PolicyEvaluator",
    "evaluate",
    "run_curve",
    "compare",
    "rows_to_csv",
    "mean_curves",
]

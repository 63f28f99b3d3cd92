"""Acceptance gate: ten end-to-end criteria, one PASS/FAIL line each.

Instance families and seeds were fixed before any run:

* criteria 4, 5, 8: Garnet G(5,3), row smoothing 0.1, set smoothing 0.01,
  radii contamination 0.4 / TV 0.6 / KL 0.8, seeds 0-9;
* criterion 6: the same family, seeds 0-4, uniform random policy;
* criterion 7: Garnet G(4,2), row smoothing 0.1, plain sets, same radii,
  seeds 0-9;
* criteria 9, 10: Garnet G(20,30), no smoothing, seeds 0-4.
"""
import itertools
import json
import time

import numpy as np
import pytest

from robustavg.bench.cli import main
from robustavg.direct import (
    RviParams,
    bellman_residual_eval,
    check_stationary_equivalence,
    optimality_residual,
    robust_rvi_control,
    robust_rvi_eval,
)
from robustavg.discounted import DiscountedSolveParams, bellman_ctrl_op, bellman_eval_op, robust_dvi_eval
from robustavg.garnet import GarnetConfig, generate
from robustavg.limit import LimitSolveParams, blackwell_probe, robust_avg_control_limit, robust_avg_eval_limit
from robustavg.mdp import Policy
from robustavg.uncertainty import (
    Kind,
    SupportOperator,
    UncertaintySpec,
    oracle_support,
    oracle_support_lp,
    support_contamination,
    support_kl,
    support_tv,
)

RADII = {Kind.CONTAMINATION: 0.4, Kind.TV: 0.6, Kind.KL: 0.8}
SUPPORTS = {Kind.CONTAMINATION: support_contamination, Kind.TV: support_tv, Kind.KL: support_kl}
EPS = 1e-8


def record(log, n, passed, detail):
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    log.append(line)
    print(line)
    assert passed, line


def a2_garnet(seed, S=5, A=3):
    return generate(GarnetConfig(S, A, seed=seed, smoothing=0.1))


def a2_spec(kind):
    return UncertaintySpec(kind, RADII[kind], smoothing=0.01)


@pytest.fixture(scope="module")
def suite():
    """Criterion-4 suite: RVI and limit control on 10 seeds x 3 kinds."""
    t0 = time.perf_counter()
    out = []
    for kind in Kind:
        spec = a2_spec(kind)
        for seed in range(10):
            model = a2_garnet(seed)
            op = SupportOperator(model, spec)
            gb, pol, rep = robust_rvi_control(model, op, RviParams(epsilon=EPS))
            v_lim, pol_lim, _ = robust_avg_control_limit(model, op, LimitSolveParams(T=10_000))
            gbe, rep_e = robust_rvi_eval(model, op, pol, RviParams(epsilon=EPS))
            out.append(dict(kind=kind, seed=seed, model=model, op=op, gb=gb, pol=pol, rep=rep,
                            v_lim=v_lim, pol_lim=pol_lim, gbe=gbe, rep_e=rep_e))
    return out, time.perf_counter() - t0


def test_criterion_01_support_oracles(acceptance_log):
    t0 = time.perf_counter()
    worst = {}
    for kind in Kind:
        rng = np.random.default_rng(100 + kind.code)
        errs = []
        for i in range(200):
            n = 2 if i < 100 else 3
            p, v, R = rng.dirichlet(np.ones(n)), rng.random(n), float(rng.random())
            val = SUPPORTS[kind](p, v, R).value
            if n == 2:
                ref = oracle_support(kind, p, v, R, 1e-5 if kind is Kind.KL else 1e-4)
            elif kind is Kind.KL:
                ref = oracle_support(kind, p, v, R, 5e-4)
            else:
                ref = oracle_support_lp(kind, p, v, R)
            errs.append(abs(val - ref))
        worst[kind] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = (worst[Kind.CONTAMINATION] <= 1e-4 and worst[Kind.TV] <= 1e-4 and worst[Kind.KL] <= 1e-3
          and elapsed < 60)
    detail = ", ".join(f"{k.value} max err {e:.2e}" for k, e in worst.items())
    record(acceptance_log, 1, ok, f"{detail}; {elapsed:.1f}s")


def test_criterion_02_contraction(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = -np.inf
    for kind in Kind:
        for m in range(10):
            model = generate(GarnetConfig(5, 3, seed=200 + m))
            op = SupportOperator(model, UncertaintySpec(kind, RADII[kind]))
            pol = Policy(rng.dirichlet(np.ones(3), size=5))
            for gamma in (0.5, 0.9, 0.99):
                for _ in range(100):
                    scale = rng.uniform(0.1, 10)
                    v, w = rng.normal(size=5) * scale, rng.normal(size=5) * scale
                    d = np.max(np.abs(v - w))
                    e = np.max(np.abs(bellman_eval_op(model, op, pol, gamma, v) - bellman_eval_op(model, op, pol, gamma, w)))
                    c = np.max(np.abs(bellman_ctrl_op(model, op, gamma, v) - bellman_ctrl_op(model, op, gamma, w)))
                    worst = max(worst, e - gamma * d, c - gamma * d)
    elapsed = time.perf_counter() - t0
    record(acceptance_log, 2, worst <= 1e-12 and elapsed < 60,
           f"max(||Tv-Tw|| - gamma||v-w||) = {worst:.2e} over 9000 pairs x 2 operators; {elapsed:.1f}s")


def test_criterion_03_hand_verified_gain(acceptance_log, smoothed_chain):
    t0 = time.perf_counter()
    spec = UncertaintySpec(Kind.CONTAMINATION, 0.4)
    pol = Policy.deterministic([0, 0], 1)
    g_true = 0.54 / 1.48
    gb, _ = robust_rvi_eval(smoothed_chain, spec, pol, RviParams(epsilon=EPS))
    v, _ = robust_avg_eval_limit(smoothed_chain, spec, pol, LimitSolveParams(T=10_000))
    elapsed = time.perf_counter() - t0
    e_rvi, e_lim = abs(gb.g - g_true), float(np.max(np.abs(v - g_true)))
    record(acceptance_log, 3, e_rvi <= 1e-5 and e_lim <= 1e-4 and elapsed < 1,
           f"RVI err {e_rvi:.1e}, limit err {e_lim:.1e}; {elapsed:.2f}s")


def test_criterion_04_method_agreement(acceptance_log, suite):
    runs, elapsed = suite
    mismatched = [(r["kind"].value, r["seed"]) for r in runs if r["pol"] != r["pol_lim"]]
    gap = max(float(np.max(np.abs(r["v_lim"] - r["gb"].g))) for r in runs)
    record(acceptance_log, 4, not mismatched and gap <= 5e-3 and elapsed < 60,
           f"{len(runs)} instances, policy mismatches {mismatched or 0}, max gain gap {gap:.1e}; {elapsed:.1f}s")


def test_criterion_05_certificates(acceptance_log, suite, smoothed_chain):
    runs, _ = suite
    opt, bell = [], []
    for r in runs:
        opt.append(optimality_residual(r["model"], r["op"], r["gb"].g, r["gb"].bias))
        bell.append(bellman_residual_eval(r["model"], r["op"], r["pol"], r["gbe"].g, r["gbe"].bias))
        uni = Policy.uniform(5, 3)
        gu, _ = robust_rvi_eval(r["model"], r["op"], uni, RviParams(epsilon=EPS))
        bell.append(bellman_residual_eval(r["model"], r["op"], uni, gu.g, gu.bias))
    spec = UncertaintySpec(Kind.CONTAMINATION, 0.4)
    one = Policy.deterministic([0, 0], 1)
    gb, _, _ = robust_rvi_control(smoothed_chain, spec, RviParams(epsilon=EPS))
    opt.append(optimality_residual(smoothed_chain, spec, gb.g, gb.bias))
    ge, _ = robust_rvi_eval(smoothed_chain, spec, one, RviParams(epsilon=EPS))
    bell.append(bellman_residual_eval(smoothed_chain, spec, one, ge.g, ge.bias))
    record(acceptance_log, 5, max(opt) <= 1e-6 and max(bell) <= 1e-6,
           f"{len(opt)} control solves max residual {max(opt):.1e}, "
           f"{len(bell)} evaluation solves max residual {max(bell):.1e}")


def test_criterion_06_discount_limit(acceptance_log):
    grid = (0.9, 0.99, 0.999, 0.9999)
    bad, last = [], 0.0
    for kind in Kind:
        spec = a2_spec(kind)
        for seed in range(5):
            model = a2_garnet(seed)
            op = SupportOperator(model, spec)
            pol = Policy.uniform(5, 3)
            g, _ = robust_rvi_eval(model, op, pol, RviParams(epsilon=EPS))
            gaps = []
            for gamma in grid:
                v, rep = robust_dvi_eval(model, op, pol, DiscountedSolveParams(gamma, tol=1e-8), trace_every=10**7)
                assert rep.converged
                gaps.append(float(np.max(np.abs((1 - gamma) * v - g.g))))
            last = max(last, gaps[-1])
            if not all(a > b for a, b in zip(gaps, gaps[1:])) or gaps[-1] > 1e-2:
                bad.append((kind.value, seed, gaps))
    record(acceptance_log, 6, not bad,
           f"15 instances, non-monotone or too far: {bad or 0}; max gap at 0.9999 {last:.1e}")


def test_criterion_07_blackwell(acceptance_log):
    t0 = time.perf_counter()
    policies = [Policy.deterministic(a, 2) for a in itertools.product(range(2), repeat=4)]
    failures, ties = [], 0
    for kind in Kind:
        spec = UncertaintySpec(kind, RADII[kind])
        for seed in range(10):
            model = generate(GarnetConfig(4, 2, seed=seed, smoothing=0.1))
            op = SupportOperator(model, spec)
            scores = [check_stationary_equivalence(model, op, p, RviParams(epsilon=EPS)).oracle_gain
                      for p in policies]
            best = max(scores)
            optimal = [p for p, s in zip(policies, scores) if s >= best - 1e-9]
            ties += len(optimal) > 1
            rows, stable = blackwell_probe(model, op, (0.99, 0.999, 0.9999))
            if not stable or rows[-1][1] not in optimal:
                failures.append((kind.value, seed, [p.actions.tolist() for _, p in rows],
                                 [p.actions.tolist() for p in optimal]))
    elapsed = time.perf_counter() - t0
    record(acceptance_log, 7, not failures and elapsed < 300,
           f"30 instances, failures {failures or 0}, tied optima {ties}; {elapsed:.1f}s")


def test_criterion_08_stationary_equivalence(acceptance_log, suite):
    runs, _ = suite
    diffs = [check_stationary_equivalence(r["model"], r["op"], r["pol"], RviParams(epsilon=EPS)).difference
             for r in runs]
    record(acceptance_log, 8, max(diffs) <= 1e-5, f"{len(diffs)} instances, max |g_oracle - g_robust| {max(diffs):.1e}")


FIGURE_ARGS = ["--states", "20", "--actions", "30", "--seeds", "0,1,2,3,4", "--no-timing"]


def _run_figures(root):
    codes = {}
    for kind in Kind:
        out = root / kind.value
        codes[kind] = main(["compare", "--out", str(out), "--kind", kind.value,
                            "--radius", str(RADII[kind]), *FIGURE_ARGS])
    return codes


@pytest.fixture(scope="module")
def figures(tmp_path_factory):
    root = tmp_path_factory.mktemp("figures")
    t0 = time.perf_counter()
    codes = _run_figures(root)
    return root, codes, time.perf_counter() - t0


def _outputs(root, kind):
    stem = f"compare_{kind.value}_R{RADII[kind]:g}"
    return tuple(root / kind.value / f"{stem}.{ext}" for ext in ("csv", "svg", "json"))


@pytest.mark.slow
def test_criterion_09_figure_ordering(acceptance_log, figures):
    root, codes, elapsed = figures
    lines, ok = [], elapsed < 900
    for kind in Kind:
        csv_path, svg_path, json_path = _outputs(root, kind)
        ordering = json.loads(json_path.read_text())["ordering"]
        worst = min(o["robust_value"] - o["baseline_value"] for o in ordering)
        ok &= codes[kind] == 0 and csv_path.exists() and svg_path.exists() and all(o["passed"] for o in ordering)
        lines.append(f"{kind.value} min(robust - nonrobust) {worst:+.2e}")
    record(acceptance_log, 9, ok, f"{'; '.join(lines)}; {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_10_determinism(acceptance_log, figures, tmp_path):
    root, _, _ = figures
    _run_figures(tmp_path)
    same = []
    for kind in Kind:
        a, b = _outputs(root, kind)[0], _outputs(tmp_path, kind)[0]
        same.append(a.read_bytes() == b.read_bytes())
    record(acceptance_log, 10, all(same), f"byte-identical CSVs on rerun: {sum(same)}/3")

"""Command-line harness: ``robustavg {garnet,solve,compare,check,sweep}``.

Every flag mirrors a key of the optional JSON ``--config`` file (dashes
become underscores); flags given on the command line win over file values.
Exit codes: 0 success, 1 property or convergence failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..direct import RviParams, robust_rvi_control, robust_rvi_eval
from ..discounted import DiscountedSolveParams, robust_dvi_control
from ..garnet import GarnetConfig, fingerprint, generate
from ..limit import LimitSolveParams, robust_avg_control_limit
from ..mdp import ModelError, load_model, save_model, validate_model
from ..report import _jsonable
from ..uncertainty import RadiusError, UncertaintySpec
from . import experiments as ex
from .checks import run_checks
from .svg import line_chart

log = logging.getLogger("robustavg")

DEFAULTS = {
    "seed": 0,
    "seeds": None,
    "states": 20,
    "actions": 30,
    "garnet_smoothing": 0.0,
    "reward_law": "gaussian",
    "branching": None,
    "model": None,
    "kind": "contamination",
    "radius": 0.4,
    "set_smoothing": 0.0,
    "method": "robust-rvi",
    "methods": None,
    "T": 10_000,
    "gamma": 0.99,
    "epsilon": 1e-8,
    "max_iter": 1_000_000,
    "n_iter": 100,
    "eval_every": 5,
    "eval_T": 5000,
    "final_eval_T": 20000,
    "evaluator": "limit",
    "out": "out",
    "timing": True,
    "kinds": None,
    "radii": None,
    "blackwell": None,
}


class InputError(Exception):
    pass


def _csv_list(cast):
    def parse(text):
        return [cast(x) for x in text.split(",") if x]
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file whose keys mirror the flags")
    common.add_argument("--seed", type=int)
    common.add_argument("--seeds", type=_csv_list(int), help="comma-separated seeds")
    common.add_argument("--states", type=int)
    common.add_argument("--actions", type=int)
    common.add_argument("--garnet-smoothing", type=float, help="uniform mixing weight of generated rows")
    common.add_argument("--reward-law", choices=["gaussian", "uniform"])
    common.add_argument("--branching", type=int)
    common.add_argument("--model", type=Path, help="MDP JSON file instead of a generated Garnet")
    common.add_argument("--kind", choices=["contamination", "tv", "kl"])
    common.add_argument("--radius", type=float)
    common.add_argument("--set-smoothing", type=float, help="interior smoothing of every set member")
    common.add_argument("--method", choices=list(ex.METHODS))
    common.add_argument("--methods", type=_csv_list(str))
    common.add_argument("--T", type=int, dest="T", help="budget of the limit-schedule solvers")
    common.add_argument("--gamma", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--n-iter", type=int, help="sweeps per curve")
    common.add_argument("--eval-every", type=int)
    common.add_argument("--eval-T", type=int, dest="eval_T")
    common.add_argument("--final-eval-T", type=int, dest="final_eval_T")
    common.add_argument("--evaluator", choices=["limit", "rvi"])
    common.add_argument("--out", type=Path)
    common.add_argument("--no-timing", dest="timing", action="store_false", default=None)
    common.add_argument("--kinds", type=_csv_list(str))
    common.add_argument("--radii", type=_csv_list(float))
    common.add_argument("--blackwell", dest="blackwell", action="store_true", default=None)
    common.add_argument("--no-blackwell", dest="blackwell", action="store_false")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="robustavg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("garnet", parents=[common], help="generate a Garnet instance as JSON")
    sub.add_parser("solve", parents=[common], help="run one solver, write report JSON and curve CSV")
    sub.add_parser("compare", parents=[common], help="robust vs non-robust curves, CSV + SVG")
    sub.add_parser("check", parents=[common], help="run the invariant suite on one instance")
    sub.add_parser("sweep", parents=[common], help="compare over kinds x radii x seeds")
    return p


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        frag = doc.pop("uncertainty", None)
        if frag:
            cfg.update(kind=frag.get("kind", cfg["kind"]), radius=frag.get("radius", cfg["radius"]),
                       set_smoothing=frag.get("smoothing", cfg["set_smoothing"]))
        unknown = set(doc) - set(cfg)
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(doc)
    for key, value in vars(args).items():
        if key in cfg and value is not None:
            cfg[key] = value
    return cfg


def _spec(cfg, kind=None, radius=None) -> UncertaintySpec:
    return UncertaintySpec(kind or cfg["kind"], cfg["radius"] if radius is None else radius, cfg["set_smoothing"])


def _garnet(cfg, seed) -> GarnetConfig:
    return GarnetConfig(cfg["states"], cfg["actions"], seed, cfg["garnet_smoothing"], cfg["reward_law"], cfg["branching"])


def _seeds(cfg) -> list[int]:
    return list(cfg["seeds"]) if cfg["seeds"] else [cfg["seed"]]


def _models(cfg, strict: bool = True) -> dict:
    if cfg["model"]:
        try:
            model = load_model(cfg["model"], renormalize=strict)
        except OSError as exc:
            raise InputError(f"cannot read model {cfg['model']}: {exc}") from exc
        return {cfg["seed"]: model}
    return {s: generate(_garnet(cfg, s)) for s in _seeds(cfg)}


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _curve_params(cfg) -> ex.CurveParams:
    return ex.CurveParams(cfg["n_iter"], cfg["eval_every"], cfg["eval_T"], cfg["final_eval_T"], cfg["evaluator"],
                          cfg["gamma"], cfg["epsilon"], cfg["max_iter"])


def _tag(spec: UncertaintySpec) -> str:
    return f"{spec.kind.value}_R{ex._radius_label(spec):g}"


def cmd_garnet(cfg) -> int:
    out = _outdir(cfg)
    for seed in _seeds(cfg):
        gc = _garnet(cfg, seed)
        model = generate(gc)
        path = out / f"garnet_S{gc.n_states}_A{gc.n_actions}_seed{seed}.json"
        try:
            save_model(model, path)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        print(f"{path}\t{fingerprint(model)}")
    return 0


def solve_one(model, spec: UncertaintySpec, method: str, cfg) -> dict:
    """Run ``method`` to completion and collect the JSON report fields."""
    plan = ex.method_spec(method, spec)
    rvi = RviParams(cfg["epsilon"], 0, cfg["max_iter"])
    if method in ("robust-rvi", "nonrobust-rvi"):
        gb, policy, rep = robust_rvi_control(model, plan, rvi)
        value = gb.g
        residuals = {"optimality_residual": rep.extras["optimality_residual"], "span_step": rep.final_residual}
    elif method == "robust-dvi":
        v, policy, rep = robust_dvi_control(model, plan, DiscountedSolveParams(cfg["gamma"], 1e-8, cfg["max_iter"]),
                                            trace_every=100)
        value = float(np.mean(v)) * (1 - cfg["gamma"])
        residuals = {"fixed_point_residual": rep.extras["fixed_point_residual"], "sup_step": rep.final_residual}
    else:
        v, policy, rep = robust_avg_control_limit(model, plan, LimitSolveParams(T=cfg["T"]))
        value = float(np.mean(v))
        residuals = {"last_sup_step": rep.final_residual}
    gbe, erep = robust_rvi_eval(model, spec, policy, rvi)
    return {
        "method": method,
        "uncertainty": spec.to_dict(),
        "fingerprint": fingerprint(model),
        "policy": policy.actions.tolist(),
        "solver_value": value,
        "robust_avg_reward": gbe.g,
        "residuals": {**residuals, "policy_bellman_residual": erep.extras["bellman_residual"]},
        "converged": bool(rep.converged and erep.converged),
        "report": rep.to_dict(),
    }


def cmd_solve(cfg) -> int:
    out = _outdir(cfg)
    spec = _spec(cfg)
    params = _curve_params(cfg)
    reports, rows, ok = [], [], True
    for seed, model in sorted(_models(cfg).items()):
        problems = validate_model(model)
        if problems:
            raise InputError("; ".join(problems[:5]))
        rep = solve_one(model, spec, cfg["method"], cfg)
        rep["seed"] = seed
        if not cfg["timing"]:
            rep["report"].pop("elapsed_s", None)
        reports.append(rep)
        ok &= rep["converged"]
        curve, _ = ex.run_curve(model, spec, cfg["method"], seed, params)
        rows.extend(curve)
    rows.sort(key=lambda r: (r.seed, r.t))
    _write(out / "report.json", json.dumps(_jsonable(reports), indent=2, sort_keys=True) + "\n")
    _write(out / "curve.csv", ex.rows_to_csv(rows, cfg["timing"]))
    for rep in reports:
        print(f"seed {rep['seed']}: {rep['method']} robust average reward {rep['robust_avg_reward']:.6f}"
              f" converged={rep['converged']}")
    return 0 if ok else 1


def _compare_one(cfg, models, spec, out: Path) -> tuple[bool, dict]:
    methods = list(cfg["methods"] or ex.COMPARE_METHODS)
    res = ex.compare(models, spec, methods, _curve_params(cfg))
    tag = _tag(spec)
    _write(out / f"compare_{tag}.csv", ex.rows_to_csv(res.rows, cfg["timing"]))
    title = f"{spec.kind.value} R={ex._radius_label(spec):g} (mean over {len(models)} seed(s))"
    _write(out / f"compare_{tag}.svg", line_chart(ex.mean_curves(res.rows), title, "iteration", "robust average reward"))
    ordering = res.ordering()
    summary = {"uncertainty": spec.to_dict(), "finals": res.finals, "ordering": ordering}
    _write(out / f"compare_{tag}.json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    passed = all(o["passed"] for o in ordering)
    for o in ordering:
        flag = "ok " if o["passed"] else "BAD"
        print(f"[{flag}] {tag} seed {o['seed']}: {o['robust']} {o['robust_value']:.6f} "
              f"vs {o['baseline']} {o['baseline_value']:.6f}")
    return passed, summary


def cmd_compare(cfg) -> int:
    out = _outdir(cfg)
    passed, _ = _compare_one(cfg, _models(cfg), _spec(cfg), out)
    return 0 if passed else 1


def cmd_sweep(cfg) -> int:
    out = _outdir(cfg)
    if not cfg["seeds"]:
        cfg = {**cfg, "seeds": list(range(10))}
    models = _models(cfg)
    kinds = cfg["kinds"] or [cfg["kind"]]
    radii = cfg["radii"] or [cfg["radius"]]
    ok, summaries = True, []
    for kind in kinds:
        for radius in radii:
            passed, summary = _compare_one(cfg, models, _spec(cfg, kind, radius), out)
            ok &= passed
            means = {}
            for f in summary["finals"]:
                means.setdefault(f["method"], []).append(f["final_robust_avg_reward"])
            summaries.append({"kind": kind, "radius": radius,
                              "mean_final": {m: float(np.mean(v)) for m, v in means.items()}})
    _write(out / "sweep_summary.json", json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return 0 if ok else 1


def cmd_check(cfg) -> int:
    out = _outdir(cfg)
    spec = _spec(cfg)
    ok, report = True, []
    for seed, model in sorted(_models(cfg, strict=False).items()):
        checks = run_checks(model, spec, seed, cfg["blackwell"])
        for c in checks:
            flag = "PASS" if c.passed else "FAIL"
            print(f"[{flag}] seed {seed} {c.name}: {c.value:.3g} (tol {c.tol:g}) {c.note}".rstrip())
        ok &= all(c.passed for c in checks)
        report.append({"seed": seed, "uncertainty": spec.to_dict(), "checks": [c.to_dict() for c in checks]})
    _write(out / "check_report.json", json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return 0 if ok else 1


COMMANDS = {"garnet": cmd_garnet, "solve": cmd_solve, "compare": cmd_compare, "check": cmd_check, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (InputError, ModelError, RadiusError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

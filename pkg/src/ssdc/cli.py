"""Command line entry point: ``ssdc run|tune|gen-data|eval-crit``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .criticality import prox_point
from .data import gen_synthetic, scale_features, write_libsvm
from .driver import moreau_residual, moreau_surrogate
from .errors import SsdcError
from .harness import build_problem, envelope_mu, load_config, parse_config_text, run_experiment, tune
from .problem import objective_value


def _load(path):
    try:
        return load_config(path)
    except OSError as exc:
        raise SystemExit(f"error: cannot read config {path}: {exc}") from None


def cmd_run(args):
    cfg = _load(args.config)
    seeds = [args.seed] if args.seed is not None else None
    res = run_experiment(cfg, out_dir=args.out_dir, seeds=seeds, trace_stride=args.trace_stride,
                         quiet=args.quiet)
    if not args.quiet:
        print(f"trace: {res.csv_path}\nsummary: {res.json_path}")
    return 1 if res.all_failed else 0


def cmd_tune(args):
    cfg = _load(args.config)
    report = tune(cfg, seed=args.seed, quiet=args.quiet)
    out = Path(args.out_dir or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg['name']}_tune.json"
    path.write_text(json.dumps(report, indent=2), encoding="utf-8")
    for name, rep in report.items():
        print(f"{name}: best {rep['best']} objective {rep['objective']:.6g}")
    if not args.quiet:
        print(f"tuning table: {path}")
    failed = all(np.isinf(row["objective"]) for rep in report.values() for row in rep["table"])
    return 1 if failed else 0


_GEN_KEYS = {"n": int, "d": int, "task": str, "sparsity": float, "noise": float, "seed": int, "corr": float,
             "scale": lambda s: s.strip().lower() in ("1", "true", "yes", "on")}


def cmd_gen_data(args):
    raw = parse_config_text(Path(args.spec).read_text(encoding="utf-8"))
    spec = {}
    for key, val in raw.items():
        k = key.split(".", 1)[1] if key.startswith("synthetic.") else key
        if k not in _GEN_KEYS:
            raise SsdcError(f"unknown data-spec key {key!r}")
        try:
            spec[k] = _GEN_KEYS[k](val) if _GEN_KEYS[k] is not int else int(float(val))
        except ValueError:
            raise SsdcError(f"{key}: cannot parse {val!r}") from None
    if args.seed is not None:
        spec["seed"] = args.seed
    scale = spec.pop("scale", False)
    if "n" not in spec or "d" not in spec:
        raise SsdcError("data spec needs n and d")
    data = gen_synthetic(**spec)
    if scale:
        data = scale_features(data)
    write_libsvm(data, args.out)
    if not args.quiet:
        print(f"wrote {data.n} x {data.d} {data.task} dataset to {args.out}")
    return 0


def _select_run(summary, run):
    name, sep, seed = (run or "").rpartition(":")
    if not sep:
        raise SsdcError("a run summary needs --run VARIANT:SEED")
    for entry in summary["runs"]:
        if entry["variant"] == name and str(entry["seed"]) == seed:
            if entry["status"] != "ok":
                raise SsdcError(f"run {run} failed: {entry.get('error')}")
            return entry
    raise SsdcError(f"run {run} not found in summary")


def _read_iterate(path, run=None):
    text = Path(path).read_text(encoding="utf-8").strip()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return np.array([float(t) for t in text.split()])
    if isinstance(obj, dict) and "runs" in obj:
        obj = _select_run(obj, run)
    if isinstance(obj, dict):
        for key in ("x_tau", "x", "x_last"):
            if key in obj:
                return np.asarray(obj[key], dtype=float)
        raise SsdcError("iterate JSON needs an 'x_tau', 'x' or 'x_last' field")
    return np.asarray(obj, dtype=float)


def cmd_eval_crit(args):
    cfg = _load(args.config)
    problem, _ = build_problem(cfg)
    x = _read_iterate(args.iterate, args.run)
    if x.shape != (problem.dim,):
        raise SsdcError(f"iterate has shape {x.shape}, problem dimension is {problem.dim}")
    gamma = args.gamma
    if gamma is None:
        gamma = cfg.get("algorithm.gamma.gamma0") or 3.0 * (problem.constants.L or 1.0 / 3.0)
    out = {"gamma": gamma}
    if problem.r.convex:
        est = prox_point(problem, x, gamma, tol=args.tol)
        out.update(est.to_dict())
        out["objective"] = objective_value(problem, x)
    else:
        mu = envelope_mu(cfg)
        surrogate, env = moreau_surrogate(problem, mu)
        est = prox_point(surrogate, x, gamma, tol=args.tol)
        w = env.prox(x)
        out.update(est.to_dict())
        out.update({"mu": mu, "w": w.tolist(), "x_w_distance": float(np.linalg.norm(x - w)),
                    "moreau_residual": moreau_residual(problem, env, x),
                    "objective": objective_value(problem, w)})
    print(json.dumps(out, indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ssdc", description="Stagewise stochastic DC optimization")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="run only this seed")
        sp.add_argument("--out-dir", default=None, help="output directory")
        sp.add_argument("--trace-stride", type=int, default=None, help="record every k-th stage")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")

    sp = sub.add_parser("run", help="run an experiment config")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("tune", help="grid-search step sizes on a holdout seed")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("gen-data", help="write a synthetic dataset in libsvm format")
    sp.add_argument("spec")
    sp.add_argument("out")
    common(sp)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("eval-crit", help="criticality diagnostics at a stored iterate")
    sp.add_argument("config")
    sp.add_argument("iterate")
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--run", default=None, help="VARIANT:SEED when the iterate file is a run summary")
    common(sp)
    sp.set_defaults(func=cmd_eval_crit)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "trace_stride", None) is not None and args.trace_stride < 1:
        print("error: --trace-stride must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except SsdcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

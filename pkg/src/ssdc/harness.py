"""Experiment harness: flat config files, problem construction, replicate runs and traces.

Config files hold one ``key = value`` pair per line with dotted section
names; ``#`` starts a comment and comma-separated values form lists.  See
``README.md`` for the full schema.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import itertools
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import dataset_digest, gen_pu, gen_synthetic, read_libsvm, scale_features
from .driver import (
    GammaSchedule,
    RunReport,
    SamplingLaw,
    SolverSpec,
    StageRecord,
    digest_vector,
    mu_for_target,
    ssdc_moreau_run,
    ssdc_run,
)
from .errors import ConfigurationError, DivergenceError, SsdcError
from .losses import LOSS_KINDS, LossSpec, build_erm_dc, build_erm_nonconvex, build_pu_problem
from .problem import DcProblem, LinearModelSum, ProblemConstants, ZeroOracle, objective_value
from .prox import PENALTY_KINDS, L0Reg, L1Reg, LpReg, ZeroReg, dc_penalty, shifted_prox

__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "build_problem",
    "envelope_mu",
    "proxsgd_run",
    "proxgrad_run",
    "run_variant",
    "run_experiment",
    "tune",
    "trace_csv",
    "pool_size",
]

CSV_HEADER = ["variant", "seed", "stage", "grad_evals", "objective", "g_gamma_norm"]

REGULARIZERS = PENALTY_KINDS + ("l1", "l0", "lp", "none")
METHODS = ("ssdc", "ssdc_moreau", "proxsgd", "proxgrad")


# --------------------------------------------------------------------------
# typed schema


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _unit_open(v):
    return 0 < v < 1


def _choice(*opts):
    def check(v):
        return v in opts
    check.opts = opts
    return check


def _to_bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s):
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _int_list(s):
    return [_int(t) for t in s.split(",") if t.strip()]


def _str_list(s):
    return [t.strip() for t in s.split(",") if t.strip()]


_TOP = {
    "name": (str, None),
    "problem.type": (str, _choice("erm", "pu")),
    "problem.data": (str, None),
    "problem.scale": (_to_bool, None),
    "problem.loss": (str, _choice(*LOSS_KINDS)),
    "problem.huber_delta": (float, _pos),
    "problem.truncation_alpha": (float, _pos),
    "problem.regularizer": (str, _choice(*REGULARIZERS)),
    "problem.lam": (float, _pos),
    "problem.theta": (float, _pos),
    "problem.lam_reg": (float, _nonneg),
    "problem.mu": (float, _pos),
    "problem.eps": (float, _unit_open),
    "problem.assumption": (str, _choice("lipschitz_r", "lower_bounded_r", "compact_r")),
    "problem.L_loss": (float, _pos),
    "synthetic.n": (_int, _pos),
    "synthetic.d": (_int, _pos),
    "synthetic.task": (str, _choice("classification", "regression")),
    "synthetic.sparsity": (float, lambda v: 0 < v <= 1),
    "synthetic.noise": (float, _nonneg),
    "synthetic.seed": (_int, None),
    "synthetic.corr": (float, lambda v: -1 < v < 1),
    "pu.n_pos": (_int, _pos),
    "pu.n_unl": (_int, _pos),
    "pu.d": (_int, _pos),
    "pu.prior": (float, _unit_open),
    "pu.margin": (float, _nonneg),
    "pu.seed": (_int, None),
    "algorithm.K": (_int, _pos),
    "algorithm.law": (str, _choice("uniform", "power")),
    "algorithm.alpha": (float, lambda v: v >= 1),
    "algorithm.gamma.kind": (str, _choice("constant", "power", "holder")),
    "algorithm.gamma.gamma0": (float, _pos),
    "algorithm.gamma.beta": (float, _nonneg),
    "algorithm.gamma.nu": (float, lambda v: 0 < v <= 1),
    "algorithm.seeds": (_int_list, lambda v: len(v) > 0),
    "algorithm.max_grad_evals": (_int, _pos),
    "algorithm.budget_passes": (float, _pos),
    "algorithm.criticality_tol": (float, _pos),
    "variants": (_str_list, lambda v: len(v) > 0),
    "output.dir": (str, None),
    "output.trace_stride": (_int, _pos),
    "runtime.workers": (_int, _pos),
    "tune.seed": (_int, None),
}

# keys allowed under ``variant.<name>.``; numeric ones may also be tuned
_VARIANT = {
    "method": (str, _choice(*METHODS)),
    "solver": (str, _choice("spg", "adagrad", "svrg")),
    "option": (_int, _choice(1, 2)),
    "K": (_int, _pos),
    "law": (str, _choice("uniform", "power")),
    "alpha": (float, lambda v: v >= 1),
    "gamma.kind": (str, _choice("constant", "power", "holder")),
    "gamma.gamma0": (float, _pos),
    "gamma.beta": (float, _nonneg),
    "gamma.nu": (float, lambda v: 0 < v <= 1),
    "eta0": (float, _pos),
    "T": (_int, _pos),
    "T_scale": (float, _pos),
    "eta_scale": (float, _pos),
    "radius": (float, _pos),
    "c": (float, _pos),
    "a": (float, _pos),
    "T_max": (_int, _pos),
    "eta": (float, _pos),
    "M": (float, _pos),
    "G": (float, _nonneg),
    "S": (_int, _pos),
    "S_scale": (float, _pos),
    "check": (_to_bool, None),
    "h_batch": (_int, _pos),
    "h_mode": (str, _choice("frozen", "resample")),
    "max_grad_evals": (_int, _pos),
    "budget_passes": (float, _pos),
}
_OVERRIDE_KEYS = ("T", "T_scale", "eta_scale", "radius", "c", "a", "T_max", "eta", "M", "G",
                  "S", "S_scale", "check", "h_batch", "h_mode")

_DEFAULTS = {
    "name": "experiment",
    "problem.type": "erm",
    "problem.data": "synthetic",
    "problem.scale": True,
    "problem.loss": "logistic",
    "problem.huber_delta": 1.0,
    "problem.regularizer": "scad",
    "problem.lam": 1e-4,
    "problem.theta": 3.7,
    "problem.lam_reg": 0.0,
    "problem.assumption": "lower_bounded_r",
    "synthetic.n": 1000,
    "synthetic.d": 50,
    "synthetic.task": "classification",
    "synthetic.sparsity": 0.1,
    "synthetic.noise": 0.1,
    "synthetic.seed": 0,
    "synthetic.corr": 0.0,
    "pu.n_pos": 500,
    "pu.n_unl": 1500,
    "pu.d": 20,
    "pu.prior": 0.4,
    "pu.margin": 1.0,
    "pu.seed": 0,
    "algorithm.K": 50,
    "algorithm.law": "power",
    "algorithm.alpha": 1.0,
    "algorithm.gamma.kind": "constant",
    "algorithm.gamma.beta": 0.0,
    "algorithm.gamma.nu": 1.0,
    "algorithm.seeds": [0],
    "variants": ["ssdc_spg"],
    "output.dir": "out",
    "output.trace_stride": 1,
    "tune.seed": 999,
}


def _convert(key, raw, spec):
    conv, check = spec
    try:
        val = conv(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: cannot parse {raw!r} ({exc})") from None
    if check is not None and not check(val):
        opts = getattr(check, "opts", None)
        hint = f"; expected one of {opts}" if opts else ""
        raise ConfigurationError(f"{key}: value {raw!r} out of range{hint}")
    return val


def parse_config_text(text):
    """Split config text into a ``{key: raw string}`` mapping."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, val = body.partition("=")
        if not sep:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key = key.strip()
        if not key:
            raise ConfigurationError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    ``values`` holds typed top-level keys (defaults filled in), ``variants``
    maps each variant name to its typed overrides and ``grids`` maps variant
    names to ``{key: [values]}`` tuning grids.
    """

    values: dict
    variants: dict
    grids: dict
    source: Optional[str] = None

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @classmethod
    def from_mapping(cls, raw, source=None):
        values = dict(_DEFAULTS)
        var_raw, grid_raw = {}, {}
        for key, val in raw.items():
            if key in _TOP:
                values[key] = _convert(key, val, _TOP[key])
                continue
            head, _, rest = key.partition(".")
            if head in ("variant", "tune") and "." in rest:
                name, _, sub = rest.partition(".")
                if sub not in _VARIANT:
                    raise ConfigurationError(f"{key}: unknown variant key {sub!r}")
                if head == "variant":
                    var_raw.setdefault(name, {})[sub] = _convert(key, val, _VARIANT[sub])
                else:
                    items = _str_list(val)
                    if not items:
                        raise ConfigurationError(f"{key}: empty tuning grid")
                    grid_raw.setdefault(name, {})[sub] = [
                        _convert(key, t, _VARIANT[sub]) for t in items
                    ]
                continue
            raise ConfigurationError(f"unknown config key {key!r}")
        variants = {}
        for name in values["variants"]:
            v = dict(var_raw.get(name, {}))
            v.setdefault("method", _default_method(name))
            if v["method"] in ("ssdc", "ssdc_moreau"):
                v.setdefault("solver", "spg")
            variants[name] = v
        for name in list(var_raw) + list(grid_raw):
            if name not in variants:
                raise ConfigurationError(f"variant {name!r} is configured but not listed in 'variants'")
        if values["problem.regularizer"] == "scad" and values["problem.theta"] <= 2:
            raise ConfigurationError("problem.theta must exceed 2 for scad")
        return cls(values, variants, grid_raw, source)


def _default_method(name):
    low = name.lower()
    if low in ("proxsgd", "proxgrad"):
        return low
    return "ssdc_moreau" if "moreau" in low else "ssdc"


def load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    return ExperimentConfig.from_mapping(parse_config_text(text), source=str(path))


# --------------------------------------------------------------------------
# problem construction


def _load_dataset(cfg):
    src = cfg["problem.data"]
    if src == "synthetic":
        data = gen_synthetic(cfg["synthetic.n"], cfg["synthetic.d"], cfg["synthetic.task"],
                             cfg["synthetic.sparsity"], cfg["synthetic.noise"], cfg["synthetic.seed"],
                             corr=cfg["synthetic.corr"])
    else:
        path = Path(src)
        if not path.is_absolute() and cfg.source is not None:
            path = Path(cfg.source).parent / path
        data = read_libsvm(path)
    if cfg["problem.scale"]:
        data = scale_features(data)
    return data


def build_problem(cfg: ExperimentConfig):
    """Problem plus a small description dict (dataset digest, sizes)."""
    if cfg["problem.type"] == "pu":
        pos, unl, _ = gen_pu(cfg["pu.n_pos"], cfg["pu.n_unl"], cfg["pu.d"], cfg["pu.prior"],
                             seed=cfg["pu.seed"], margin=cfg["pu.margin"])
        loss = cfg["problem.loss"] if cfg["problem.loss"] in ("hinge", "absolute") else "hinge"
        prob = build_pu_problem(pos, unl, cfg["pu.prior"], loss, cfg["problem.lam_reg"])
        info = {"n": pos.n + unl.n, "d": pos.d,
                "dataset_sha256": dataset_digest(pos) + dataset_digest(unl)}
        return prob, info
    data = _load_dataset(cfg)
    loss = LossSpec(cfg["problem.loss"], delta=cfg["problem.huber_delta"],
                    alpha=cfg.get("problem.truncation_alpha"))
    reg = cfg["problem.regularizer"]
    lam, theta, lam_reg = cfg["problem.lam"], cfg["problem.theta"], cfg["problem.lam_reg"]
    if not loss.convex:
        prob = build_erm_nonconvex(data, loss, reg if reg in ("l0", "lp") else "l0", lam,
                                   cfg.get("problem.L_loss"))
    elif reg in PENALTY_KINDS:
        prob = build_erm_dc(data, loss, dc_penalty(reg, lam, theta), lam_reg)
    else:
        loss = loss.with_alpha(data.n)
        g = LinearModelSum(data.features, data.labels, loss, l2=lam_reg)
        r = {"l1": L1Reg(lam), "l0": L0Reg(lam), "lp": LpReg(lam, 0.5), "none": ZeroReg()}[reg]
        prob = DcProblem(g, ZeroOracle(data.d), r,
                         ProblemConstants(L=g.smoothness, G_r=r.grad_bound(data.d)),
                         name=f"{loss.kind}+{reg}")
    return prob, {"n": data.n, "d": data.d, "dataset_sha256": dataset_digest(data)}


def envelope_mu(cfg):
    if cfg.get("problem.mu") is not None:
        return cfg["problem.mu"]
    eps = cfg.get("problem.eps")
    if eps is None:
        raise ConfigurationError("Moreau variants need problem.mu or problem.eps")
    return mu_for_target(cfg["problem.assumption"], eps)


# --------------------------------------------------------------------------
# baselines


def _component_count(problem):
    return max(problem.g.component_count, 1)


def proxsgd_run(problem, eta0, max_grad_evals, seed=0, x0=None, trace_every=None,
                trace_stride=1):
    """Proximal SGD on ``g - h`` with ``eta_t = eta0 / sqrt(t)``.

    One trace row is emitted per ``trace_every`` gradient evaluations
    (default: one pass over the data).
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    n = _component_count(problem)
    trace_every = trace_every or n
    g, h, r = problem.g, problem.h, problem.r
    x = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    cost = g.stoch_cost + h.stoch_cost
    if cost == 0:
        raise ConfigurationError("proxsgd needs a counted stochastic oracle")
    evals, t, rows = 0, 0, [StageRecord(0, 0.0, 0, problem.objective(x))]
    next_mark = trace_every
    epoch = 0
    while evals < max_grad_evals:
        t += 1
        grad = g.stochastic_subgradient(x, rng) - h.stochastic_subgradient(x, rng)
        evals += cost
        x = shifted_prox(r, 0.0, x, eta0 / math.sqrt(t), x, grad)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e8:
            raise DivergenceError("proxsgd iterate diverged", iteration=t)
        if evals >= next_mark or evals >= max_grad_evals:
            epoch += 1
            next_mark += trace_every
            if epoch % trace_stride == 0 or evals >= max_grad_evals:
                rows.append(StageRecord(epoch, 0.0, evals, problem.objective(x), inner_iterations=t))
    return _baseline_report(rows, x, "proxsgd", t0)


def proxgrad_run(problem, eta0=None, max_grad_evals=None, iterations=None, x0=None,
                 trace_stride=1):
    """Deterministic proximal gradient on ``g - h`` with constant step ``eta0``
    (default ``1 / L`` for the full gradient of ``g``)."""
    t0 = time.perf_counter()
    g, h, r = problem.g, problem.h, problem.r
    if eta0 is None:
        L = g.full_smoothness
        if L is None:
            raise ConfigurationError("proxgrad needs eta0 or a smooth g")
        eta0 = 1.0 / L
    cost = g.full_cost + h.full_cost
    if iterations is None:
        if max_grad_evals is None:
            raise ConfigurationError("proxgrad needs iterations or max_grad_evals")
        iterations = max(1, max_grad_evals // max(cost, 1))
    x = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    rows = [StageRecord(0, 0.0, 0, problem.objective(x))]
    evals = 0
    for t in range(1, iterations + 1):
        grad = g.full_subgradient(x) - h.full_subgradient(x)
        evals += cost
        x = r.prox(x - eta0 * grad, eta0)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e8:
            raise DivergenceError("proxgrad iterate diverged", iteration=t)
        if t % trace_stride == 0 or t == iterations:
            rows.append(StageRecord(t, 0.0, evals, problem.objective(x), inner_iterations=t))
    return _baseline_report(rows, x, "proxgrad", t0)


def _baseline_report(rows, x, name, t0):
    K = max(rows[-1].stage, 1)
    probs = np.zeros(K)
    probs[-1] = 1.0
    return RunReport(records=rows, tau=K, x_tau=x.copy(), x_last=x.copy(), K=K,
                     probabilities=probs, iterates=None,
                     wall_time=time.perf_counter() - t0, solver=name)


# --------------------------------------------------------------------------
# runs


def _variant_budget(cfg, v, n):
    if "max_grad_evals" in v:
        return v["max_grad_evals"]
    if "budget_passes" in v:
        return int(round(v["budget_passes"] * n))
    if cfg.get("algorithm.max_grad_evals") is not None:
        return cfg["algorithm.max_grad_evals"]
    if cfg.get("algorithm.budget_passes") is not None:
        return int(round(cfg["algorithm.budget_passes"] * n))
    return None


def run_variant(problem, cfg: ExperimentConfig, name, v, seed, trace_stride=None):
    """Execute one (variant, seed) pair and return its :class:`RunReport`."""
    stride = trace_stride or cfg["output.trace_stride"]
    n = _component_count(problem)
    budget = _variant_budget(cfg, v, n)
    method = v["method"]
    if method == "proxsgd":
        if budget is None:
            raise ConfigurationError(f"variant {name}: proxsgd needs a gradient budget")
        return proxsgd_run(problem, v.get("eta0", 1.0), budget, seed=seed, trace_stride=stride)
    if method == "proxgrad":
        if budget is None:
            raise ConfigurationError(f"variant {name}: proxgrad needs a gradient budget")
        return proxgrad_run(problem, v.get("eta0"), budget, trace_stride=stride)
    L = problem.constants.L
    gamma0 = v.get("gamma.gamma0", cfg.get("algorithm.gamma.gamma0"))
    if gamma0 is None:
        gamma0 = 3.0 * L if L else 1.0
    schedule = GammaSchedule(v.get("gamma.kind", cfg["algorithm.gamma.kind"]), gamma0,
                             v.get("gamma.beta", cfg["algorithm.gamma.beta"]),
                             v.get("gamma.nu", cfg["algorithm.gamma.nu"]))
    law = SamplingLaw(v.get("law", cfg["algorithm.law"]), v.get("alpha", cfg["algorithm.alpha"]))
    overrides = {k: v[k] for k in _OVERRIDE_KEYS if k in v}
    spec = SolverSpec(v["solver"], v.get("option", 1), overrides)
    K = v.get("K", cfg["algorithm.K"])
    kw = dict(max_grad_evals=budget, trace_stride=stride,
              criticality_tol=cfg.get("algorithm.criticality_tol"))
    if method == "ssdc_moreau":
        return ssdc_moreau_run(problem, envelope_mu(cfg), spec, schedule, K, law, seed=seed, **kw)
    return ssdc_run(problem, spec, schedule, K, law, seed=seed, **kw)


def _num(v):
    return "" if v is None else repr(float(v))


def trace_csv(rows):
    """CSV text for ``(variant, seed, StageRecord | None)`` rows (None marks a failed run)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for variant, seed, rec in rows:
        if rec is None:
            w.writerow([variant, seed, -1, 0, "nan", ""])
        else:
            w.writerow([variant, seed, rec.stage, rec.grad_evals, _num(rec.objective),
                        _num(rec.g_gamma_norm)])
    return buf.getvalue()


def pool_size(cfg=None):
    env = os.environ.get("SSDC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"SSDC_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("SSDC_THREADS must be >= 1")
        return n
    if cfg is not None and cfg.get("runtime.workers") is not None:
        return cfg["runtime.workers"]
    return os.cpu_count() or 1


def _job(args):
    problem, cfg, name, v, seed, stride = args
    try:
        rep = run_variant(problem, cfg, name, v, seed, stride)
        return name, seed, rep, None
    except (SsdcError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return name, seed, None, f"{type(exc).__name__}: {exc}"


def _execute(jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with cf.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_job, jobs))


def _run_summary(name, seed, rep, err, problem):
    if rep is None:
        return {"variant": name, "seed": seed, "status": "failed", "error": err}
    out = {
        "variant": name,
        "seed": seed,
        "status": "ok",
        "solver": rep.solver,
        "K": rep.K,
        "tau": rep.tau,
        "x_tau_sha256": digest_vector(rep.x_tau),
        "x_tau": rep.x_tau.tolist(),
        "objective_tau": _safe_obj(problem, rep.x_tau if rep.w_tau is None else rep.w_tau),
        "final_objective": rep.records[-1].objective,
        "grad_evals": rep.grad_evals,
        "budget_exhausted": rep.budget_exhausted,
        "wall_time": rep.wall_time,
    }
    if rep.w_tau is not None:
        out["mu"] = rep.mu
        out["w_tau_sha256"] = digest_vector(rep.w_tau)
        out["w_tau"] = rep.w_tau.tolist()
        out["x_w_distance"] = rep.x_w_distance
    return out


def _safe_obj(problem, x):
    try:
        return objective_value(problem, x)
    except SsdcError:
        return None


@dataclass
class ExperimentResult:
    csv_path: Optional[Path]
    json_path: Optional[Path]
    summary: dict
    reports: dict
    csv_text: str

    @property
    def all_failed(self):
        return all(r["status"] != "ok" for r in self.summary["runs"])


def run_experiment(cfg: ExperimentConfig, out_dir=None, seeds=None, trace_stride=None,
                   quiet=True, workers=None, write=True):
    """Run every (variant, seed) pair and write ``<name>.csv`` and ``<name>.json``.

    Runs execute in a process pool; the parent process alone writes files.
    Failed runs get a CSV row with ``stage = -1`` and ``status = failed`` in
    the summary.
    """
    problem, info = build_problem(cfg)
    seeds = list(seeds) if seeds is not None else cfg["algorithm.seeds"]
    if not seeds:
        raise ConfigurationError("seeds must be nonempty")
    jobs = [(problem, cfg, name, cfg.variants[name], s, trace_stride)
            for name in cfg["variants"] for s in seeds]
    workers = workers or pool_size(cfg)
    t0 = time.perf_counter()
    results = _execute(jobs, workers)
    rows, runs, reports = [], [], {}
    for name, seed, rep, err in results:
        if rep is None:
            rows.append((name, seed, None))
            if not quiet:
                print(f"[{name} seed={seed}] failed: {err}")
        else:
            rows.extend((name, seed, rec) for rec in rep.records)
            reports[(name, seed)] = rep
            if not quiet:
                print(f"[{name} seed={seed}] K={rep.K} tau={rep.tau} "
                      f"F={rep.records[-1].objective:.6g} evals={rep.grad_evals}")
        runs.append(_run_summary(name, seed, rep, err, problem))
    text = trace_csv(rows)
    summary = {
        "name": cfg["name"],
        "problem": problem.name,
        **info,
        "csv_header": CSV_HEADER,
        "runs": runs,
        "wall_time": time.perf_counter() - t0,
    }
    csv_path = json_path = None
    if write:
        out = Path(out_dir or cfg["output.dir"])
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{cfg['name']}.csv"
        json_path = out / f"{cfg['name']}.json"
        csv_path.write_text(text, encoding="utf-8")
        json_path.write_text(json.dumps(summary, indent=2, default=_json_default), encoding="utf-8")
    return ExperimentResult(csv_path, json_path, summary, reports, text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _grid_sort_key(point):
    return tuple(point[k] if isinstance(point[k], (int, float)) else 0 for k in sorted(point))


def tune(cfg: ExperimentConfig, seed=None, quiet=True, workers=None):
    """Grid search per variant on a holdout seed.

    The winner has the lowest final objective; ties go to the smaller
    parameter values (compared in sorted key order), and diverged runs score
    ``inf``.  Variants without a grid run once with their configured values.
    """
    problem, _ = build_problem(cfg)
    seed = cfg["tune.seed"] if seed is None else seed
    out = {}
    for name in cfg["variants"]:
        base = cfg.variants[name]
        grid = cfg.grids.get(name, {})
        keys = sorted(grid)
        points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
        points.sort(key=_grid_sort_key)
        jobs = [(problem, cfg, name, {**base, **pt}, seed, None) for pt in points]
        results = _execute(jobs, workers or pool_size(cfg))
        table = []
        for pt, (_, _, rep, err) in zip(points, results):
            score = math.inf if rep is None else rep.records[-1].objective
            if not np.isfinite(score):
                score = math.inf
            table.append({"params": pt, "objective": score, "error": err})
            if not quiet:
                print(f"[tune {name}] {pt} -> {score:.6g}")
        best = min(range(len(table)), key=lambda i: (table[i]["objective"], i))
        out[name] = {"best": table[best]["params"], "objective": table[best]["objective"],
                     "table": table, "seed": seed}
    return out

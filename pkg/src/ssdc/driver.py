"""Stagewise loop: majorant construction, inner solves, gamma schedules and output sampling.

Stage ``k`` builds the majorant around ``x_k``, runs the inner solver with
stage-dependent budgets warm-started at ``x_k`` and takes its output as
``x_{k+1}``.  After ``K`` stages an index ``tau`` is sampled and ``x_tau`` is
returned alongside the last iterate.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .criticality import prox_point
from .errors import ConfigurationError, ParameterError
from .problem import DcProblem, GradCounter, MoreauConjugateOracle, SumOracle, build_majorant
from .prox import MoreauEnvelope, SquaredL2Reg
from .solvers import (
    AdaGradConfig,
    SpgConfig,
    SvrgConfig,
    adagrad_solve,
    spg_solve,
    svrg_solve,
)

__all__ = [
    "GammaSchedule",
    "SamplingLaw",
    "SolverSpec",
    "StageRecord",
    "RunReport",
    "schedule_gamma",
    "mu_for_target",
    "stage_budget",
    "ssdc_run",
    "ssdc_moreau_run",
    "moreau_surrogate",
    "moreau_residual",
    "digest_vector",
]


@dataclass(frozen=True)
class GammaSchedule:
    """``constant``: ``gamma0``; ``power``: ``gamma0 k**beta``;
    ``holder``: ``gamma0 k**((1 - nu) / (1 + nu))``."""

    kind: str = "constant"
    gamma0: float = 1.0
    beta: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power", "holder"):
            raise ConfigurationError(f"unknown gamma schedule {self.kind!r}")
        if not self.gamma0 > 0:
            raise ConfigurationError(f"gamma0 must be > 0, got {self.gamma0}")
        if self.kind == "holder" and not 0 < self.nu <= 1:
            raise ConfigurationError(f"nu must lie in (0, 1], got {self.nu}")

    def __call__(self, k):
        return schedule_gamma(self, k)


def schedule_gamma(schedule: GammaSchedule, k: int) -> float:
    if k < 1:
        raise ParameterError(f"stage index must be >= 1, got {k}")
    if schedule.kind == "constant":
        return schedule.gamma0
    if schedule.kind == "power":
        return schedule.gamma0 * k**schedule.beta
    return schedule.gamma0 * k ** ((1.0 - schedule.nu) / (1.0 + schedule.nu))


@dataclass(frozen=True)
class SamplingLaw:
    """Law of the returned stage index: ``uniform`` or ``power`` with
    ``p(tau = k) proportional to k**alpha``."""

    kind: str = "power"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "power"):
            raise ConfigurationError(f"unknown sampling law {self.kind!r}")
        if self.kind == "power" and self.alpha < 1:
            raise ConfigurationError(f"power law needs alpha >= 1, got {self.alpha}")

    def probabilities(self, K):
        if K < 1:
            raise ParameterError(f"K must be >= 1, got {K}")
        if self.kind == "uniform":
            return np.full(K, 1.0 / K)
        w = np.arange(1, K + 1, dtype=float) ** self.alpha
        return w / w.sum()

    def sample(self, K, rng, size=None):
        """Draw ``tau`` in ``1..K``; an int array of draws when ``size`` is given."""
        draws = rng.choice(K, size=size, p=self.probabilities(K)) + 1
        return int(draws) if size is None else draws


@dataclass(frozen=True)
class SolverSpec:
    """Inner solver choice plus optional budget overrides.

    ``kind`` is ``spg`` (``option`` 1 smooth, 2 non-smooth), ``adagrad`` or
    ``svrg``.  Recognised ``overrides`` keys:

    * spg: ``T``, ``T_scale``, ``eta_scale``, ``radius``
    * adagrad: ``c`` (default 1), ``a`` (default 1), ``T_max``, ``eta``, ``M``, ``G``
    * svrg: ``eta``, ``T``, ``S``, ``S_scale``, ``check``
    * all: ``h_batch``, ``h_mode``
    """

    kind: str = "spg"
    option: int = 1
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("spg", "adagrad", "svrg"):
            raise ConfigurationError(f"unknown inner solver {self.kind!r}")

    def get(self, key, default=None):
        return self.overrides.get(key, default)


def stage_budget(problem: DcProblem, spec: SolverSpec, gamma: float, k: int):
    """Solver config for stage ``k`` following the per-solver budget rules."""
    c = problem.constants
    ov = spec.overrides
    if spec.kind == "spg":
        if "T" in ov:
            T = int(ov["T"])
        elif spec.option == 1:
            T = math.ceil(3.0 * c.require("L") * k / gamma) + 3
        else:
            T = math.ceil(k / gamma) + 1
        T = max(1, math.ceil(T * ov.get("T_scale", 1.0)))
        radius = math.inf
        if spec.option == 2:
            radius = ov["radius"] if "radius" in ov else 3.0 * c.require("G") / gamma
        return SpgConfig(T=T, gamma=gamma, option=spec.option, radius=radius,
                         eta_scale=ov.get("eta_scale", 1.0))
    if spec.kind == "adagrad":
        G = ov["G"] if "G" in ov else c.require("G")
        a = ov.get("a", 1.0)
        eta = ov["eta"] if "eta" in ov else ov.get("c", 1.0) / math.sqrt(gamma * k)
        M = ov["M"] if "M" in ov else math.ceil(4.0 / (a * gamma * eta))
        G_r = c.G_r
        if G_r is None:
            G_r = problem.r.grad_bound(problem.dim)
        G_r = 0.0 if G_r is None else G_r
        radius = ov.get("radius", (2.0 * math.sqrt(problem.dim) * G + G_r) / gamma)
        return AdaGradConfig(eta=eta, M=M, a=a, G=G, G_r=G_r, T_max=int(ov.get("T_max", 100_000)),
                             radius=radius, gamma=gamma, check=ov.get("check", True))
    # svrg
    need_L = not ("eta" in ov and "T" in ov)
    L = c.require("L") if need_L else c.L
    T = int(ov["T"]) if "T" in ov else max(2, math.ceil(200.0 * L / gamma))
    S = int(ov["S"]) if "S" in ov else (1 if k == 1 else math.ceil(math.log2(k)))
    S = max(1, math.ceil(S * ov.get("S_scale", 1.0)))
    eta = ov["eta"] if "eta" in ov else 0.05 / L
    return SvrgConfig(eta=eta, T=T, S=S, L=L, gamma=gamma, check=ov.get("check", True))


_SOLVE = {"spg": spg_solve, "adagrad": adagrad_solve, "svrg": svrg_solve}


def mu_for_target(assumption: str, eps: float) -> float:
    """Envelope parameter for target accuracy ``eps``.

    ``lipschitz_r`` gives ``mu = eps``; ``lower_bounded_r`` and ``compact_r``
    give ``mu = eps**2``.
    """
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    if assumption == "lipschitz_r":
        return eps
    if assumption in ("lower_bounded_r", "compact_r"):
        return eps * eps
    raise ParameterError(f"unknown assumption {assumption!r}")


def digest_vector(x):
    """sha256 of the little-endian float64 bytes of ``x``."""
    return hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).hexdigest()


@dataclass
class StageRecord:
    """One trace row; ``stage`` counts completed stages (0 is the start point)."""

    stage: int
    gamma: float
    grad_evals: int
    objective: float
    inner_iterations: int = 0
    budget: dict = field(default_factory=dict)
    g_gamma_norm: Optional[float] = None
    capped: bool = False

    def to_dict(self):
        return {
            "stage": self.stage,
            "gamma": self.gamma,
            "grad_evals": self.grad_evals,
            "objective": self.objective,
            "inner_iterations": self.inner_iterations,
            "budget": self.budget,
            "g_gamma_norm": self.g_gamma_norm,
            "capped": self.capped,
        }


@dataclass
class RunReport:
    """Outcome of a stagewise run.

    ``iterates[j]`` is ``x_{j+1}``, so ``iterates[0]`` is the start point and
    ``iterates[K]`` the last output.  ``x_tau = iterates[tau - 1]``.
    """

    records: list
    tau: int
    x_tau: np.ndarray
    x_last: np.ndarray
    K: int
    probabilities: np.ndarray
    iterates: Optional[list] = None
    wall_time: float = 0.0
    mu: Optional[float] = None
    w_tau: Optional[np.ndarray] = None
    x_w_distance: Optional[float] = None
    budget_exhausted: bool = False
    solver: str = ""

    @property
    def grad_evals(self):
        return self.records[-1].grad_evals

    def to_dict(self, include_iterates=False):
        out = {
            "solver": self.solver,
            "K": self.K,
            "tau": self.tau,
            "x_tau": self.x_tau.tolist(),
            "x_tau_sha256": digest_vector(self.x_tau),
            "x_last": self.x_last.tolist(),
            "grad_evals": self.grad_evals,
            "wall_time": self.wall_time,
            "budget_exhausted": self.budget_exhausted,
            "records": [r.to_dict() for r in self.records],
        }
        if self.mu is not None:
            out["mu"] = self.mu
            out["w_tau"] = self.w_tau.tolist()
            out["x_w_distance"] = self.x_w_distance
        if include_iterates and self.iterates is not None:
            out["iterates"] = [x.tolist() for x in self.iterates]
        return out


def _spg_default_h_mode(spec):
    return "resample" if spec.kind == "spg" else "frozen"


def ssdc_run(
    problem: DcProblem,
    solver: SolverSpec,
    schedule: GammaSchedule,
    K: int,
    law: SamplingLaw = SamplingLaw(),
    seed=0,
    x0=None,
    max_grad_evals: Optional[int] = None,
    trace_stride: int = 1,
    criticality_tol: Optional[float] = None,
    objective_fn: Optional[Callable] = None,
) -> RunReport:
    """Run ``K`` stages of the stagewise DC scheme.

    Parameters
    ----------
    problem : DcProblem
    solver : SolverSpec
    schedule : GammaSchedule
    K : int
        Number of stages.
    law : SamplingLaw
        Distribution of the returned index ``tau``.
    seed : int or numpy Generator
        Seeds the run RNG, which drives the inner solvers and then ``tau``.
    x0 : array_like, optional
        Start point ``x_1`` (zeros by default).
    max_grad_evals : int, optional
        Stop (possibly mid-stage) once this many gradient evaluations are spent.
    trace_stride : int
        Record every ``trace_stride``-th stage (the first and last always).
    criticality_tol : float, optional
        When set, each recorded stage carries ``||G_gamma||`` from a
        :func:`~ssdc.criticality.prox_point` solve at this tolerance.
    objective_fn : callable, optional
        Objective used in the trace (defaults to ``problem.objective``).
    """
    if K < 1:
        raise ConfigurationError(f"K must be >= 1, got {K}")
    if trace_stride < 1:
        raise ConfigurationError(f"trace_stride must be >= 1, got {trace_stride}")
    t0 = time.perf_counter()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    obj = objective_fn or problem.objective
    x = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    counter = GradCounter(limit=max_grad_evals)
    h_mode = solver.get("h_mode", _spg_default_h_mode(solver))
    h_batch = solver.get("h_batch")
    solve = _SOLVE[solver.kind]

    def crit(xk, gamma):
        if criticality_tol is None:
            return None
        return prox_point(problem, xk, gamma, tol=criticality_tol).g_gamma_norm

    gamma1 = schedule_gamma(schedule, 1)
    records = [StageRecord(0, gamma1, 0, obj(x), g_gamma_norm=crit(x, gamma1))]
    iterates = [x.copy()]
    k_done = 0
    for k in range(1, K + 1):
        if counter.exhausted:
            break
        gamma = schedule_gamma(schedule, k)
        cfg = stage_budget(problem, solver, gamma, k)
        sub = build_majorant(problem, x, gamma, rng=rng, h_batch=h_batch, counter=counter,
                             h_mode=h_mode)
        res = solve(sub, cfg, rng, stage=k)
        x = res.x
        k_done = k
        iterates.append(x.copy())
        last = k == K or counter.exhausted
        if k % trace_stride == 0 or last:
            records.append(StageRecord(
                k, gamma, counter.count, obj(x), inner_iterations=res.iterations,
                budget=_budget_dict(cfg), g_gamma_norm=crit(x, gamma), capped=res.capped,
            ))
    K_eff = max(k_done, 1)
    probs = law.probabilities(K_eff)
    tau = law.sample(K_eff, rng)
    x_tau = iterates[tau - 1]
    return RunReport(
        records=records,
        tau=tau,
        x_tau=x_tau.copy(),
        x_last=x.copy(),
        K=K_eff,
        probabilities=probs,
        iterates=iterates,
        wall_time=time.perf_counter() - t0,
        budget_exhausted=counter.exhausted,
        solver=solver.kind,
    )


def _budget_dict(cfg):
    keys = ("T", "S", "eta", "M", "T_max", "option")
    return {k: getattr(cfg, k) for k in keys if hasattr(cfg, k)}


def moreau_surrogate(problem: DcProblem, mu: float):
    """Surrogate DC problem whose ``r`` is the Moreau envelope of ``problem.r``.

    The r-slot becomes ``||x||^2 / (2 mu)`` and ``R_mu`` joins the h-slot, so
    its objective is ``g - h + r_mu``.
    """
    env = MoreauEnvelope(problem.r, mu)
    h_hat = SumOracle(problem.h, MoreauConjugateOracle(problem.dim, env))
    surrogate = DcProblem(
        g=problem.g, h=h_hat, r=SquaredL2Reg(1.0 / mu), constants=problem.constants,
        name=f"{problem.name}-moreau",
    )
    return surrogate, env


def moreau_residual(problem: DcProblem, env: MoreauEnvelope, x):
    """``||grad g(w) - grad h(w) + (x - w) / mu||`` with ``w = prox_{mu r}(x)``."""
    x = np.asarray(x, dtype=float)
    w = env.prox(x)
    d = problem.g.full_subgradient(w) - problem.h.full_subgradient(w) + (x - w) / env.mu
    return float(np.linalg.norm(d))


def ssdc_moreau_run(problem: DcProblem, mu: float, solver: SolverSpec, schedule: GammaSchedule,
                    K: int, law: SamplingLaw = SamplingLaw(), seed=0, **kw) -> RunReport:
    """Run the stagewise scheme on the Moreau surrogate of a non-convex ``r``.

    The trace objective is the original objective at ``prox_{mu r}(x_k)``.
    The report adds ``w_tau = prox_{mu r}(x_tau)`` and ``||x_tau - w_tau||``.
    """
    if not mu > 0:
        raise ConfigurationError(f"mu must be > 0, got {mu}")
    surrogate, env = moreau_surrogate(problem, mu)
    kw.setdefault("objective_fn", lambda x: problem.objective(env.prox(x)))
    rep = ssdc_run(surrogate, solver, schedule, K, law=law, seed=seed, **kw)
    rep.mu = mu
    rep.w_tau = env.prox(rep.x_tau)
    rep.x_w_distance = float(np.linalg.norm(rep.x_tau - rep.w_tau))
    return rep

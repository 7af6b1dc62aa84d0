"""Inner solvers that approximately minimize one stage majorant.

All three share the signature ``solve(sub, cfg, rng) -> InnerResult`` where
``sub`` is a :class:`~ssdc.problem.MajorantSubproblem`.  They stop early when
the subproblem's gradient counter reports an exhausted budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .prox import ZeroReg, project_ball, project_box_ball, shifted_prox

__all__ = [
    "DIVERGENCE_NORM",
    "InnerResult",
    "SpgConfig",
    "AdaGradConfig",
    "SvrgConfig",
    "svrg_rho",
    "spg_solve",
    "adagrad_solve",
    "svrg_solve",
]

DIVERGENCE_NORM = 1e8


@dataclass
class InnerResult:
    """Output of an inner solve.

    Attributes
    ----------
    x : ndarray
        The averaged output of the solver.
    iterations : int
        Inner iterations actually run.
    capped : bool
        AdaGrad only: the hard cap was reached before the stopping rule held.
    info : dict
        Solver-specific diagnostics.
    """

    x: np.ndarray
    iterations: int
    capped: bool = False
    info: dict = field(default_factory=dict)


def _guard(x, t, stage):
    if not np.all(np.isfinite(x)):
        raise DivergenceError("non-finite inner iterate", stage=stage, iteration=t)
    if np.linalg.norm(x) > DIVERGENCE_NORM:
        raise DivergenceError(
            f"inner iterate norm exceeded {DIVERGENCE_NORM:g}", stage=stage, iteration=t
        )


@dataclass(frozen=True)
class SpgConfig:
    """Settings for proximal stochastic (sub)gradient.

    ``option=1`` uses ``eta_t = 3 / (gamma (t + 1))`` by default (smooth ``g``),
    ``option=2`` uses ``eta_t = 4 / (gamma t)`` and keeps iterates in the ball
    of ``radius`` around the center (non-smooth ``g``).  ``eta_scale``
    multiplies the step rule; set it only when tuning.
    """

    T: int
    gamma: float
    option: int = 1
    step_rule: Optional[str] = None
    radius: float = math.inf
    eta_scale: float = 1.0

    def __post_init__(self):
        if self.option not in (1, 2):
            raise ConfigurationError(f"SPG option must be 1 or 2, got {self.option}")
        if self.T < 1:
            raise ConfigurationError(f"SPG needs T >= 1, got {self.T}")
        if not self.gamma > 0:
            raise ConfigurationError(f"SPG needs gamma > 0, got {self.gamma}")
        if self.option == 2 and not self.radius > 0:
            raise ConfigurationError(f"SPG option 2 needs radius > 0, got {self.radius}")
        if self.rule not in ("smooth", "nonsmooth"):
            raise ConfigurationError(f"unknown SPG step rule {self.step_rule!r}")
        if not self.eta_scale > 0:
            raise ConfigurationError("eta_scale must be > 0")

    @property
    def rule(self):
        if self.step_rule is not None:
            return self.step_rule
        return "smooth" if self.option == 1 else "nonsmooth"

    def step(self, t):
        if self.rule == "smooth":
            return self.eta_scale * 3.0 / (self.gamma * (t + 1))
        return self.eta_scale * 4.0 / (self.gamma * t)


def spg_solve(sub, cfg: SpgConfig, rng, stage=None) -> InnerResult:
    """Proximal SPG on the majorant, returning the ``t``-weighted average."""
    r = sub.r
    x1 = sub.center
    gamma = sub.gamma
    x = x1.copy()
    acc = np.zeros_like(x1)
    wsum = 0.0
    box_ball = cfg.option == 2 and r.is_box and math.isfinite(cfg.radius)
    zero = ZeroReg()
    t_run = 0
    for t in range(1, cfg.T + 1):
        if sub.counter.exhausted:
            break
        lin = sub.stochastic_gradient(x, rng)
        eta = cfg.step(t)
        if box_ball:
            c = shifted_prox(zero, gamma, x1, eta, x, lin)
            x_new = project_box_ball(c, r.lo, r.hi, x1, cfg.radius)
        else:
            x_new = shifted_prox(r, gamma, x1, eta, x, lin)
            if cfg.option == 2:
                x_new = project_ball(x_new, x1, cfg.radius)
        _guard(x_new, t, stage)
        if cfg.option == 1:
            acc += (t + 1) * x_new
            wsum += t + 1
        else:
            acc += t * x
            wsum += t
        x = x_new
        t_run = t
    if wsum == 0:
        return InnerResult(x1.copy(), 0)
    return InnerResult(acc / wsum, t_run, info={"last": x})


@dataclass(frozen=True)
class AdaGradConfig:
    """Settings for stagewise AdaGrad (diagonal dual averaging).

    Parameters
    ----------
    eta : float
        Stage step ``eta_k``.
    M : float
        Scale of the stopping rule.
    a : float
        Free balancing constant of the stopping rule.
    G : float
        Infinity-norm bound on stochastic gradients; ``H_0 = 2 G I``.
    G_r : float
        Bound on ``||dr||``; 0 disables the distance term of the stopping rule.
    T_max : int
        Hard cap on inner iterations.
    radius : float
        Ball radius around the center; ``inf`` disables it.
    gamma : float, optional
        Used only to check ``M eta >= 4 / (a gamma)``.
    """

    eta: float
    M: float
    a: float = 1.0
    G: float = 1.0
    G_r: float = 0.0
    T_max: int = 100_000
    radius: float = math.inf
    gamma: Optional[float] = None
    check: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigurationError(f"AdaGrad needs eta > 0, got {self.eta}")
        if not self.a > 0:
            raise ConfigurationError(f"AdaGrad needs a > 0, got {self.a}")
        if self.M <= 0 or self.G < 0 or self.G_r < 0 or self.T_max < 1:
            raise ConfigurationError("AdaGrad needs M > 0, G >= 0, G_r >= 0, T_max >= 1")
        if self.check and self.gamma is not None:
            need = 4.0 / (self.a * self.gamma)
            if self.M * self.eta < need * (1 - 1e-12):
                raise ConfigurationError(
                    f"AdaGrad needs M*eta >= 4/(a*gamma) = {need:g}, got {self.M * self.eta:g}"
                )


def adagrad_solve(sub, cfg: AdaGradConfig, rng, stage=None) -> InnerResult:
    """AdaGrad with the data-dependent stopping rule; returns the uniform average."""
    r = sub.r
    if not r.separable:
        raise ConfigurationError(f"AdaGrad needs a separable regularizer, got {r.name}")
    x1 = sub.center
    gamma = sub.gamma
    x = x1.copy()
    sum_g = np.zeros_like(x1)
    sum_sq = np.zeros_like(x1)
    acc = np.zeros_like(x1)
    h0 = 2.0 * cfg.G
    t = 0
    stopped = False
    s = sum_sq
    for t in range(1, cfg.T_max + 1):
        acc += x
        g = sub.stochastic_gradient(x, rng)
        sum_g += g
        sum_sq += g * g
        s = np.sqrt(sum_sq)
        coef = gamma + (h0 + s) / (t * cfg.eta)
        x_new = r.prox(x1 - (sum_g / t) / coef, 1.0 / coef)
        x_new = project_ball(x_new, x1, cfg.radius)
        _guard(x_new, t, stage)
        x = x_new
        bound = cfg.M * max(
            cfg.a * (2.0 * cfg.G + float(np.max(s))),
            float(np.sum(s)) / cfg.a,
            cfg.G_r * float(np.linalg.norm(x1 - x)) / cfg.eta,
        )
        if t >= bound:
            stopped = True
            break
        if sub.counter.exhausted:
            break
    capped = not stopped and t == cfg.T_max
    return InnerResult(acc / t, t, capped=capped, info={"s": s, "last": x})


def svrg_rho(L, gamma, eta, T):
    """Per-epoch contraction factor of proximal SVRG on a ``gamma``-strongly convex majorant."""
    q = 1.0 - 4.0 * L * eta
    if q <= 0:
        return math.inf
    return 1.0 / (gamma * eta * q * T) + 4.0 * L * eta * (T + 1) / (q * T)


@dataclass(frozen=True)
class SvrgConfig:
    """Settings for proximal SVRG.

    When ``L`` and ``gamma`` are given the contraction factor ``rho`` is
    evaluated at construction and must not exceed ``rho_max`` (0.5 by
    default); pass ``check=False`` to run untheoretical tuned steps.
    """

    eta: float
    T: int
    S: int
    L: Optional[float] = None
    gamma: Optional[float] = None
    check: bool = True
    rho_max: float = 0.5

    def __post_init__(self):
        if not self.eta > 0 or self.T < 1 or self.S < 1:
            raise ConfigurationError(
                f"SVRG needs eta > 0, T >= 1, S >= 1 (got {self.eta}, {self.T}, {self.S})"
            )
        if self.check and self.L is not None and self.gamma is not None:
            if self.eta >= 1.0 / (4.0 * self.L):
                raise ConfigurationError(f"SVRG needs eta < 1/(4L) = {0.25 / self.L:g}")
            rho = self.rho
            if rho > self.rho_max:
                raise ConfigurationError(
                    f"SVRG contraction rho = {rho:.4f} exceeds {self.rho_max}"
                )

    @classmethod
    def theory(cls, L, gamma, S):
        """``eta = 0.05/L`` and ``T = max(2, ceil(200 L / gamma))``."""
        T = max(2, math.ceil(200.0 * L / gamma))
        return cls(eta=0.05 / L, T=T, S=S, L=L, gamma=gamma)

    @property
    def rho(self):
        if self.L is None or self.gamma is None:
            return None
        return svrg_rho(self.L, self.gamma, self.eta, self.T)


def svrg_solve(sub, cfg: SvrgConfig, rng, stage=None) -> InnerResult:
    """Proximal SVRG with frozen ``h`` linearization; returns the last epoch average.

    ``info["snapshots"]`` holds every epoch average in order.
    """
    g = sub.g
    n = g.component_count
    if n <= 0:
        raise ConfigurationError("SVRG needs a finite-sum g")
    r = sub.r
    x1 = sub.center
    gamma = sub.gamma
    v = sub.h_linearization
    snap = x1.copy()
    snapshots = []
    it = 0
    epochs = 0
    for _ in range(cfg.S):
        if sub.counter.exhausted:
            break
        full = sub.g_full_gradient(snap) - v
        x = snap.copy()
        acc = np.zeros_like(x1)
        cnt = 0
        for _t in range(cfg.T):
            i = int(rng.integers(n))
            grad = sub.g_component_gradient(i, x) - sub.g_component_gradient(i, snap) + full
            x = shifted_prox(r, gamma, x1, cfg.eta, x, grad)
            it += 1
            _guard(x, it, stage)
            acc += x
            cnt += 1
            if sub.counter.exhausted:
                break
        snap = acc / cnt
        snapshots.append(snap)
        epochs += 1
    return InnerResult(snap, it, info={"epochs": epochs, "snapshots": snapshots})

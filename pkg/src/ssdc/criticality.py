r"""Convergence measurement: the proximal-point map and gradient mapping.

For a DC problem and a point ``z``,

.. math::

    P_\gamma(z) = \arg\min_x\; g(x) + r(x) - h(z) - \partial h(z)^\top (x - z)
                  + \frac{\gamma}{2}\|x - z\|^2,
    \qquad G_\gamma(z) = \gamma (z - P_\gamma(z)).

``G_gamma(z) = 0`` exactly when ``z`` is critical.  Small brute-force oracles
for one- and two-dimensional instances live here as well.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ParameterError

__all__ = [
    "CriticalityEstimate",
    "prox_point",
    "holder_bound",
    "holder_criticality",
    "gradient_residual",
    "brute_force_critical",
    "l0_support_minimizers",
]

MAX_PROX_ITER = 10**6


@dataclass
class CriticalityEstimate:
    """Result of a :func:`prox_point` solve.

    Attributes
    ----------
    p_gamma : ndarray
        Approximation of ``P_gamma(x)``.
    g_gamma_norm : float
        ``gamma * ||x - p_gamma||``.
    subproblem_gap_bound : float
        Certified bound on the majorant suboptimality of ``p_gamma``.
    distance_bound : float
        Certified bound on ``||p_gamma - P_gamma(x)||``.
    residual : float
        Final scaled fixed-point residual of the proximal-gradient solve.
    certified : bool
        False when the iteration cap was reached before ``tol``.
    """

    p_gamma: np.ndarray
    g_gamma_norm: float
    subproblem_gap_bound: float
    distance_bound: float
    residual: float
    iterations: int
    gamma: float
    certified: bool = True
    holder_distance: Optional[float] = None

    def to_dict(self):
        return {
            "g_gamma_norm": self.g_gamma_norm,
            "subproblem_gap_bound": self.subproblem_gap_bound,
            "distance_bound": self.distance_bound,
            "residual": self.residual,
            "iterations": self.iterations,
            "gamma": self.gamma,
            "certified": self.certified,
            "holder_distance": self.holder_distance,
        }


def _g_smoothness(problem):
    L = problem.g.full_smoothness
    if L is None:
        L = problem.constants.L
    if L is None:
        raise ConfigurationError("prox_point needs a smooth g (declare its smoothness constant L)")
    return float(L)


def prox_point(problem, x, gamma, tol=1e-8, max_iter=MAX_PROX_ITER, start=None):
    """Solve the proximal-point subproblem at ``x`` by proximal gradient.

    The step is ``1 / (L + gamma)``; iteration stops once the scaled residual
    ``rho = (L + gamma) ||y - y_plus||`` is at most ``tol``.  Strong convexity
    then certifies ``||y_plus - P|| <= 2 rho / gamma`` and a majorant gap of at
    most ``2 rho**2 / gamma``.  The best iterate seen is returned.

    Parameters
    ----------
    problem : DcProblem
    x : array_like
        The point ``z`` where the gradient mapping is evaluated.
    gamma : float
    tol : float
    max_iter : int
        Reaching it returns the best iterate with ``certified=False``.
    start : array_like, optional
        Initial iterate (defaults to ``x``).
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol}")
    z = np.asarray(x, dtype=float)
    L = _g_smoothness(problem)
    beta = L + gamma
    step = 1.0 / beta
    v = problem.h.full_subgradient(z)
    g, r = problem.g, problem.r
    y = z.copy() if start is None else np.asarray(start, dtype=float).copy()
    best_y, best_rho = None, np.inf
    certified = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = g.full_subgradient(y) - v + gamma * (y - z)
        y_new = r.prox(y - step * grad, step)
        rho = beta * float(np.linalg.norm(y - y_new))
        if rho < best_rho:
            best_rho, best_y = rho, y_new
        y = y_new
        if rho <= tol:
            certified = True
            break
    p = best_y
    return CriticalityEstimate(
        p_gamma=p,
        g_gamma_norm=gamma * float(np.linalg.norm(z - p)),
        subproblem_gap_bound=2.0 * best_rho**2 / gamma,
        distance_bound=2.0 * best_rho / gamma,
        residual=best_rho,
        iterations=it,
        gamma=float(gamma),
        certified=certified,
    )


def holder_bound(L, nu, gamma, g_norm):
    r"""``L / gamma**nu * ||G||**nu + ||G||``."""
    if g_norm < 0:
        raise ParameterError("gradient-mapping norm must be >= 0")
    if g_norm == 0:
        return 0.0
    return L / gamma**nu * g_norm**nu + g_norm


def holder_criticality(problem, x, est, side="g_plus_r_smooth", L=None, nu=None):
    """Bound on the criticality distance implied by ``||G_gamma(x)||``.

    ``side="g_plus_r_smooth"`` bounds ``dist(dh(x), grad(g + r)(x))`` using the
    Holder constants of ``g + r``.  ``side="h_smooth"`` bounds
    ``dist(grad h(x_plus), dg(x_plus) + dr(x_plus))`` at ``x_plus = P_gamma(x)``
    with the Holder constants of ``h``.  Explicit ``L``/``nu`` override the
    constants stored on the problem.
    """
    if side == "g_plus_r_smooth":
        if L is None or nu is None:
            hc = problem.g.holder_constants()
            r_sm = problem.r.smoothness
            if hc is None or r_sm is None:
                raise ConfigurationError("g + r must declare Holder constants (L, nu)")
            L0, nu0 = hc
            if r_sm and nu0 != 1.0:
                raise ConfigurationError("cannot combine Holder and Lipschitz constants of g and r")
            L = L0 + r_sm if L is None else L
            nu = nu0 if nu is None else nu
    elif side == "h_smooth":
        if L is None or nu is None:
            hc = problem.h.holder_constants()
            if hc is None and problem.constants.nu is None:
                raise ConfigurationError("h must declare Holder constants (L, nu)")
            if hc is None:
                raise ConfigurationError("h must declare its Holder constant L")
            L = hc[0] if L is None else L
            nu = (problem.constants.nu or hc[1]) if nu is None else nu
    else:
        raise ConfigurationError(f"unknown side {side!r}")
    est.holder_distance = holder_bound(L, nu, est.gamma, est.g_gamma_norm)
    return est.holder_distance


def gradient_residual(problem, x):
    """``||grad g(x) + grad r(x) - grad h(x)||`` for a smooth problem."""
    x = np.asarray(x, dtype=float)
    d = problem.g.full_subgradient(x) + problem.r.subgradient(x) - problem.h.full_subgradient(x)
    return float(np.linalg.norm(d))


def _grid_axes(lo, hi, step, d):
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
    return [np.arange(lo[i], hi[i] + 0.5 * step, step) for i in range(d)]


def brute_force_critical(problem, lo, hi, step=1e-3, mode=None):
    """Grid-scan a box for near-critical points of a problem with ``d <= 2``.

    ``mode="residual"`` (default for smooth ``r``) returns grid local minima
    of the gradient residual; ``mode="objective"`` (default otherwise) returns
    grid local minima of the objective over the neighbouring cells.  Points
    are returned sorted by objective.
    """
    d = problem.dim
    if d > 2:
        raise ParameterError("brute_force_critical supports d <= 2")
    if mode is None:
        mode = "residual" if problem.r.smoothness is not None else "objective"
    if mode not in ("residual", "objective"):
        raise ParameterError(f"unknown mode {mode!r}")
    axes = _grid_axes(lo, hi, step, d)
    shape = tuple(len(a) for a in axes)
    vals = np.empty(shape)
    obj = np.empty(shape)
    for idx in itertools.product(*(range(s) for s in shape)):
        x = np.array([axes[i][idx[i]] for i in range(d)])
        f = problem.g.value(x) + problem.r.value(x) - problem.h.value(x)
        obj[idx] = f
        vals[idx] = gradient_residual(problem, x) if mode == "residual" else f
    out = []
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]
    for idx in itertools.product(*(range(s) for s in shape)):
        v = vals[idx]
        is_min = True
        for o in offsets:
            j = tuple(idx[i] + o[i] for i in range(d))
            if any(j[i] < 0 or j[i] >= shape[i] for i in range(d)):
                continue
            # strict on one side so plateaus yield one representative
            if vals[j] < v or (vals[j] == v and j < idx):
                is_min = False
                break
        if is_min:
            out.append(np.array([axes[i][idx[i]] for i in range(d)]))
    out.sort(key=lambda p: problem.g.value(p) + problem.r.value(p) - problem.h.value(p))
    return out


def _quadratic_form(oracle, d):
    if hasattr(oracle, "quadratic_form"):
        return oracle.quadratic_form()
    if oracle.smoothness == 0.0 and oracle.value(np.zeros(d)) == 0.0:
        return np.zeros((d, d)), np.zeros(d), 0.0
    raise ConfigurationError(f"{type(oracle).__name__} is not a quadratic")


def l0_support_minimizers(problem, lam):
    """Exact per-support minimizers of a quadratic ``g - h`` plus ``lam ||x||_0``.

    Returns a list of ``(support, x, objective)`` sorted by objective; the
    first entry is a global minimizer.
    """
    d = problem.dim
    Qg, cg, kg = _quadratic_form(problem.g, d)
    Qh, ch, kh = _quadratic_form(problem.h, d)
    Q, c, k = Qg - Qh, cg - ch, kg - kh
    results = []
    for size in range(d + 1):
        for supp in itertools.combinations(range(d), size):
            x = np.zeros(d)
            if size:
                s = list(supp)
                x[s] = np.linalg.solve(Q[np.ix_(s, s)], -c[s])
            f = 0.5 * float(x @ Q @ x) + float(c @ x) + k + lam * size
            results.append((supp, x, f))
    results.sort(key=lambda t: t[2])
    return results

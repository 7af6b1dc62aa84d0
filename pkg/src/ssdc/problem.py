"""Objective representation ``F(x) = g(x) + r(x) - h(x)`` and stage majorants.

``g`` and ``h`` are convex oracles (deterministic, stochastic or finite-sum),
``r`` is a :class:`~ssdc.prox.Regularizer`.  Oracles are immutable; gradient
evaluations are charged to a :class:`GradCounter` owned by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError, ParameterError
from .prox import Regularizer, ZeroReg

__all__ = [
    "GradCounter",
    "ConvexOracle",
    "ZeroOracle",
    "QuadraticOracle",
    "QuadraticSum",
    "LinearModelSum",
    "L1NormOracle",
    "PenaltyR2Oracle",
    "SquaredNormOracle",
    "NoisyOracle",
    "SumOracle",
    "MoreauConjugateOracle",
    "ProblemConstants",
    "DcProblem",
    "MajorantSubproblem",
    "objective_value",
    "build_majorant",
]


class GradCounter:
    """Gradient-evaluation counter; one component gradient is one unit.

    An optional ``limit`` lets solvers stop early once the budget is spent.
    """

    __slots__ = ("count", "limit")

    def __init__(self, count=0, limit=None):
        self.count = int(count)
        self.limit = None if limit is None else int(limit)

    def charge(self, units):
        self.count += int(units)

    @property
    def exhausted(self):
        return self.limit is not None and self.count >= self.limit

    def __repr__(self):
        return f"GradCounter({self.count}, limit={self.limit})"


class ConvexOracle:
    """Convex function accessed through (sub)gradient queries.

    Attributes
    ----------
    dim : int
    component_count : int
        ``n > 0`` for a finite sum ``(1/n) sum_i f_i``; 0 otherwise.
    deterministic : bool
        True when ``stochastic_subgradient`` equals ``full_subgradient``.
    counted : bool
        Whether queries are charged to the gradient counter.  Data-free parts
        (penalty pieces, quadratic terms) are not counted.
    smoothness : float or None
        Lipschitz constant of each component gradient.
    holder : tuple or None
        ``(L, nu)`` Holder constants of the full gradient.
    """

    component_count = 0
    deterministic = True
    counted = True
    smoothness: Optional[float] = None
    holder = None

    def __init__(self, dim):
        self.dim = int(dim)

    def value(self, x):
        raise NotImplementedError

    def full_subgradient(self, x):
        raise NotImplementedError

    def stochastic_subgradient(self, x, rng):
        if self.component_count > 0:
            i = int(rng.integers(self.component_count))
            return self.component_gradient(i, x)
        return self.full_subgradient(x)

    def component_gradient(self, i, x):
        raise ConfigurationError(f"{type(self).__name__} has no finite-sum structure")

    @property
    def full_smoothness(self):
        """Lipschitz constant of the full gradient (defaults to ``smoothness``)."""
        return self.smoothness

    @property
    def full_cost(self):
        if not self.counted:
            return 0
        return self.component_count if self.component_count > 0 else 1

    @property
    def stoch_cost(self):
        return 1 if self.counted else 0

    def holder_constants(self):
        if self.holder is not None:
            return self.holder
        if self.full_smoothness is not None:
            return (self.full_smoothness, 1.0)
        return None


class ZeroOracle(ConvexOracle):
    counted = False
    smoothness = 0.0

    def value(self, x):
        return 0.0

    def full_subgradient(self, x):
        return np.zeros(self.dim)

    def component_gradient(self, i, x):
        return np.zeros(self.dim)


class QuadraticOracle(ConvexOracle):
    """Deterministic ``0.5 x'Qx + c'x + const`` with ``Q`` symmetric PSD."""

    def __init__(self, Q, c=None, const=0.0, counted=True):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        super().__init__(Q.shape[0])
        self.Q = Q
        self.c = np.zeros(self.dim) if c is None else np.asarray(c, dtype=float)
        self.const = float(const)
        self.counted = counted
        self.smoothness = float(np.max(np.linalg.eigvalsh(Q))) if self.dim else 0.0

    def value(self, x):
        return 0.5 * float(x @ self.Q @ x) + float(self.c @ x) + self.const

    def full_subgradient(self, x):
        return self.Q @ x + self.c

    def quadratic_form(self):
        return self.Q, self.c, self.const


class QuadraticSum(ConvexOracle):
    """Finite sum of quadratics ``f_i(x) = 0.5 x'Q_i x + c_i'x + k_i``."""

    deterministic = False

    def __init__(self, Qs, cs, consts=None):
        Qs = np.asarray(Qs, dtype=float)
        cs = np.asarray(cs, dtype=float)
        n, d, _ = Qs.shape
        super().__init__(d)
        self.Qs, self.cs = Qs, cs
        self.consts = np.zeros(n) if consts is None else np.asarray(consts, dtype=float)
        self.component_count = n
        self.Q = Qs.mean(axis=0)
        self.c = cs.mean(axis=0)
        self.const = float(self.consts.mean())
        self.smoothness = float(max(np.max(np.linalg.eigvalsh(Qi)) for Qi in Qs))
        self._full_L = float(np.max(np.linalg.eigvalsh(self.Q)))

    @classmethod
    def shifted_identity(cls, centers, scale=1.0):
        """Components ``(scale/2) ||x - b_i||^2``."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        n, d = centers.shape
        Qs = np.broadcast_to(scale * np.eye(d), (n, d, d)).copy()
        cs = -scale * centers
        consts = 0.5 * scale * np.sum(centers**2, axis=1)
        return cls(Qs, cs, consts)

    @property
    def full_smoothness(self):
        return self._full_L

    def value(self, x):
        return 0.5 * float(x @ self.Q @ x) + float(self.c @ x) + self.const

    def full_subgradient(self, x):
        return self.Q @ x + self.c

    def component_gradient(self, i, x):
        return self.Qs[i] @ x + self.cs[i]

    def quadratic_form(self):
        return self.Q, self.c, self.const


class LinearModelSum(ConvexOracle):
    r"""``(1/n) sum_i w_i loss(a_i'x, b_i) + (l2/2) ||x||^2``.

    The ridge term is distributed over every component so that a uniformly
    sampled component gradient stays unbiased.
    """

    deterministic = False

    def __init__(self, A, b, loss, weights=None, l2=0.0):
        A = np.asarray(A, dtype=float)
        super().__init__(A.shape[1])
        self.A = A
        self.b = np.asarray(b, dtype=float)
        self.loss = loss
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.l2 = float(l2)
        self.component_count = A.shape[0]
        row_sq = np.einsum("ij,ij->i", A, A)
        wmax = 1.0 if self.weights is None else float(np.max(np.abs(self.weights)))
        if loss.smoothness is None:
            self.smoothness = None
        else:
            self.smoothness = loss.smoothness * wmax * float(np.max(row_sq)) + self.l2
        self._full_L = None

    @property
    def full_smoothness(self):
        if self.loss.smoothness is None:
            return None
        if self._full_L is None:
            A = self.A if self.weights is None else self.A * np.sqrt(np.abs(self.weights))[:, None]
            top = np.linalg.norm(A, 2) ** 2 / self.component_count
            self._full_L = self.loss.smoothness * float(top) + self.l2
        return self._full_L

    def _w(self, i=None):
        if self.weights is None:
            return 1.0
        return self.weights if i is None else self.weights[i]

    def value(self, x):
        s = self.A @ x
        vals = self.loss.value(s, self.b) * self._w()
        return float(np.mean(vals)) + 0.5 * self.l2 * float(x @ x)

    def full_subgradient(self, x):
        s = self.A @ x
        coef = self.loss.derivative(s, self.b) * self._w()
        return self.A.T @ coef / self.component_count + self.l2 * x

    def component_gradient(self, i, x):
        a = self.A[i]
        coef = self.loss.derivative(a @ x, self.b[i]) * self._w(i)
        return coef * a + self.l2 * x


class L1NormOracle(ConvexOracle):
    """``weight * ||x||_1``, subgradient 0 at kinks."""

    counted = False

    def __init__(self, dim, weight=1.0):
        super().__init__(dim)
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.sum(np.abs(x)))

    def full_subgradient(self, x):
        return self.weight * np.sign(x)


class PenaltyR2Oracle(ConvexOracle):
    """The convex ``r2`` part of a :class:`~ssdc.prox.DcPenalty`."""

    counted = False

    def __init__(self, dim, penalty):
        super().__init__(dim)
        self.penalty = penalty
        self.smoothness = penalty.r2_smoothness

    def value(self, x):
        return self.penalty.r2_value(x)

    def full_subgradient(self, x):
        return self.penalty.r2_gradient(x)


class SquaredNormOracle(ConvexOracle):
    """``(scale/2) ||x||^2`` (data free, not counted)."""

    counted = False

    def __init__(self, dim, scale):
        super().__init__(dim)
        self.scale = float(scale)
        self.smoothness = self.scale

    def value(self, x):
        return 0.5 * self.scale * float(x @ x)

    def full_subgradient(self, x):
        return self.scale * np.asarray(x, dtype=float)

    def quadratic_form(self):
        return self.scale * np.eye(self.dim), np.zeros(self.dim), 0.0


class NoisyOracle(ConvexOracle):
    """Purely stochastic view of ``base``: gradients carry N(0, sigma^2 I) noise."""

    deterministic = False
    component_count = 0

    def __init__(self, base, sigma):
        super().__init__(base.dim)
        self.base = base
        self.sigma = float(sigma)
        self.smoothness = base.smoothness
        self.holder = base.holder

    @property
    def full_smoothness(self):
        return self.base.full_smoothness

    def value(self, x):
        return self.base.value(x)

    def full_subgradient(self, x):
        return self.base.full_subgradient(x)

    def stochastic_subgradient(self, x, rng):
        return self.base.full_subgradient(x) + self.sigma * rng.standard_normal(self.dim)

    def quadratic_form(self):
        return self.base.quadratic_form()


class SumOracle(ConvexOracle):
    """Sum of oracles; at most one part may be stochastic or finite-sum."""

    def __init__(self, *parts):
        super().__init__(parts[0].dim)
        self.parts = parts
        random_parts = [p for p in parts if not p.deterministic]
        if len(random_parts) > 1:
            raise ConfigurationError("SumOracle supports at most one stochastic part")
        self.main = random_parts[0] if random_parts else None
        self.rest = [p for p in parts if p is not self.main]
        self.deterministic = self.main is None
        self.component_count = self.main.component_count if self.main is not None else 0
        self.counted = any(p.counted for p in parts)
        sm = [p.smoothness for p in parts]
        self.smoothness = None if any(s is None for s in sm) else float(sum(sm))

    @property
    def full_smoothness(self):
        sm = [p.full_smoothness for p in self.parts]
        return None if any(s is None for s in sm) else float(sum(sm))

    @property
    def full_cost(self):
        return sum(p.full_cost for p in self.parts)

    @property
    def stoch_cost(self):
        return sum(p.stoch_cost for p in self.parts)

    def value(self, x):
        return float(sum(p.value(x) for p in self.parts))

    def full_subgradient(self, x):
        return sum(p.full_subgradient(x) for p in self.parts)

    def _rest_grad(self, x):
        out = np.zeros(self.dim)
        for p in self.rest:
            out = out + p.full_subgradient(x)
        return out

    def stochastic_subgradient(self, x, rng):
        if self.main is None:
            return self.full_subgradient(x)
        return self.main.stochastic_subgradient(x, rng) + self._rest_grad(x)

    def component_gradient(self, i, x):
        if self.main is None or self.component_count == 0:
            raise ConfigurationError("SumOracle has no finite-sum part")
        return self.main.component_gradient(i, x) + self._rest_grad(x)


class MoreauConjugateOracle(ConvexOracle):
    """The convex function ``R_mu`` of a Moreau envelope; subgradient ``prox(x)/mu``."""

    counted = False

    def __init__(self, dim, envelope):
        super().__init__(dim)
        self.envelope = envelope

    def value(self, x):
        return self.envelope.conjugate_value(x)

    def full_subgradient(self, x):
        return self.envelope.prox(x) / self.envelope.mu


@dataclass(frozen=True)
class ProblemConstants:
    """Known problem constants; any may be None when unknown.

    G : stochastic (sub)gradient bound (variance bound in the smooth case,
        infinity-norm bound for AdaGrad).
    G_r : bound on ``||dr||``.
    Delta : bound on ``F(x_1) - inf F``.
    L : smoothness of the components of ``g``.
    nu : Holder exponent of ``grad h`` in ``(0, 1]``.
    """

    G: Optional[float] = None
    G_r: Optional[float] = None
    Delta: Optional[float] = None
    L: Optional[float] = None
    nu: Optional[float] = None

    def __post_init__(self):
        for name in ("G", "G_r", "Delta", "L"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ParameterError(f"constant {name} must be >= 0, got {v}")
        if self.nu is not None and not 0 < self.nu <= 1:
            raise ParameterError(f"nu must lie in (0, 1], got {self.nu}")

    def require(self, name):
        v = getattr(self, name)
        if v is None:
            raise ConfigurationError(f"problem constant {name!r} is required but not set")
        return v


@dataclass(frozen=True)
class DcProblem:
    g: ConvexOracle
    h: ConvexOracle
    r: Regularizer = field(default_factory=ZeroReg)
    constants: ProblemConstants = field(default_factory=ProblemConstants)
    name: str = "dc"

    def __post_init__(self):
        if self.g.dim != self.h.dim:
            raise ConfigurationError(f"g has dim {self.g.dim} but h has dim {self.h.dim}")

    @property
    def dim(self):
        return self.g.dim

    def with_constants(self, **kw):
        return replace(self, constants=replace(self.constants, **kw))

    def objective(self, x):
        return objective_value(self, x)


def objective_value(problem, x):
    """``g(x) + r(x) - h(x)``; raises :class:`DomainError` naming a non-finite term."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise ParameterError(f"expected a vector of dimension {problem.dim}, got shape {x.shape}")
    gv = problem.g.value(x)
    rv = problem.r.value(x)
    hv = problem.h.value(x)
    for name, v in (("g", gv), ("r", rv), ("h", hv)):
        if not np.isfinite(v):
            raise DomainError(f"term {name}(x) = {v} is not finite")
    return gv + rv - hv


class MajorantSubproblem:
    r"""Stage surrogate

    .. math::

        F_k(x) = g(x) + r(x) - h(c) - v^\top (x - c) + \frac{\gamma}{2}\|x - c\|^2

    with center ``c`` and a subgradient ``v`` of ``h`` at ``c``, frozen for the
    stage.  ``h_mode="resample"`` makes :meth:`stochastic_gradient` draw a fresh
    stochastic subgradient of ``h`` at the center on every call instead.
    """

    def __init__(self, problem, center, gamma, h_linearization, h_value, counter,
                 h_mode="frozen"):
        self.problem = problem
        self.g = problem.g
        self.h = problem.h
        self.r = problem.r
        self.center = np.asarray(center, dtype=float)
        self.gamma = float(gamma)
        self.h_linearization = np.asarray(h_linearization, dtype=float)
        self.h_value = float(h_value)
        self.counter = counter
        if h_mode not in ("frozen", "resample"):
            raise ConfigurationError(f"unknown h_mode {h_mode!r}")
        self.h_mode = "frozen" if self.h.deterministic else h_mode

    @property
    def dim(self):
        return self.center.shape[0]

    def value(self, x):
        """Surrogate value (not charged to the counter)."""
        x = np.asarray(x, dtype=float)
        d = x - self.center
        return (self.g.value(x) + self.r.value(x) - self.h_value
                - float(self.h_linearization @ d) + 0.5 * self.gamma * float(d @ d))

    def smooth_value(self, x):
        """The part without ``r`` and without the proximal quadratic."""
        x = np.asarray(x, dtype=float)
        return self.g.value(x) - self.h_value - float(self.h_linearization @ (x - self.center))

    def h_term(self, rng):
        if self.h_mode == "resample":
            self.counter.charge(self.h.stoch_cost)
            return self.h.stochastic_subgradient(self.center, rng)
        return self.h_linearization

    def stochastic_gradient(self, x, rng):
        """Stochastic subgradient of ``g(x) - v'x``."""
        self.counter.charge(self.g.stoch_cost)
        return self.g.stochastic_subgradient(x, rng) - self.h_term(rng)

    def g_component_gradient(self, i, x):
        self.counter.charge(self.g.stoch_cost)
        return self.g.component_gradient(i, x)

    def g_full_gradient(self, x):
        self.counter.charge(self.g.full_cost)
        return self.g.full_subgradient(x)


def build_majorant(problem, center, gamma, rng=None, h_batch=None, counter=None,
                   h_mode="frozen"):
    """Construct the stage-``k`` convex majorant around ``center``.

    Parameters
    ----------
    h_batch : int or None
        None computes the full subgradient of ``h`` (charged ``n`` units for a
        finite sum).  An integer ``b`` averages ``b`` stochastic subgradients,
        which is the only option for a purely stochastic ``h``.
    h_mode : {"frozen", "resample"}
        See :class:`MajorantSubproblem`.
    """
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be > 0, got {gamma}")
    center = np.asarray(center, dtype=float)
    counter = GradCounter() if counter is None else counter
    h = problem.h
    if h_mode == "resample" and not h.deterministic and h_batch is None:
        # the inner solver redraws dh every step; one draw is kept for value()
        h_batch = 1
    if h_batch is None and not h.deterministic and h.component_count == 0:
        raise ConfigurationError("purely stochastic h needs an h_batch size")
    if h_batch is None:
        counter.charge(h.full_cost)
        v = h.full_subgradient(center)
    else:
        if rng is None:
            raise ConfigurationError("mini-batch h linearization requires an rng")
        b = int(h_batch)
        if b < 1:
            raise ConfigurationError(f"h_batch must be >= 1, got {b}")
        counter.charge(b * h.stoch_cost)
        v = sum(h.stochastic_subgradient(center, rng) for _ in range(b)) / b
    return MajorantSubproblem(problem, center, gamma, v, h.value(center), counter, h_mode=h_mode)

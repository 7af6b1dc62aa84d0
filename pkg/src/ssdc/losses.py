"""Per-sample losses of a linear score and the ERM / PU problem builders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ParameterError
from .problem import (
    DcProblem,
    LinearModelSum,
    PenaltyR2Oracle,
    ProblemConstants,
    SquaredNormOracle,
    ZeroOracle,
)
from .prox import DcPenalty, L0Reg, LpReg, Regularizer

__all__ = [
    "LOSS_KINDS",
    "LossSpec",
    "loss_spec",
    "build_erm_dc",
    "build_erm_nonconvex",
    "build_pu_problem",
]

LOSS_KINDS = ("logistic", "huber", "squared", "sigmoid_ls", "truncated_ls", "hinge", "absolute")
_CONVEX = {"logistic", "huber", "squared", "hinge", "absolute"}
# curvature bound of the loss in the score
_SMOOTH = {"logistic": 0.25, "huber": 1.0, "squared": 1.0, "sigmoid_ls": 0.5, "truncated_ls": 1.0}


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


@dataclass(frozen=True)
class LossSpec:
    """Loss ``l(s, y)`` of a score ``s = a'x`` and a label ``y``.

    Classification losses take labels in ``{-1, +1}``; ``sigmoid_ls`` maps
    them to ``{0, 1}`` internally.  Subgradients at kinks are 0.

    Parameters
    ----------
    kind : str
        One of :data:`LOSS_KINDS`.
    delta : float
        Huber threshold.
    alpha : float or None
        Truncation level of ``truncated_ls``; builders fill in ``sqrt(10 n)``.
    """

    kind: str
    delta: float = 1.0
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ParameterError(f"unknown loss {self.kind!r}")
        if self.kind == "huber" and not self.delta > 0:
            raise ParameterError("huber delta must be > 0")
        if self.alpha is not None and not self.alpha > 0:
            raise ParameterError("truncation alpha must be > 0")

    @property
    def convex(self):
        return self.kind in _CONVEX

    @property
    def smooth(self):
        return self.kind in _SMOOTH

    @property
    def smoothness(self):
        return _SMOOTH.get(self.kind)

    @property
    def derivative_bound(self):
        """Bound on ``|dl/ds|`` (None when unbounded)."""
        return {"logistic": 1.0, "huber": self.delta, "hinge": 1.0, "absolute": 1.0,
                "sigmoid_ls": 0.5}.get(self.kind)

    def with_alpha(self, n):
        if self.kind == "truncated_ls" and self.alpha is None:
            return LossSpec(self.kind, self.delta, math.sqrt(10.0 * n))
        return self

    def value(self, s, y):
        s = np.asarray(s, dtype=float)
        k = self.kind
        if k == "logistic":
            return np.logaddexp(0.0, -y * s)
        if k == "huber":
            u = np.abs(s - y)
            d = self.delta
            return np.where(u <= d, 0.5 * u * u, d * (u - 0.5 * d))
        if k == "squared":
            return 0.5 * (s - y) ** 2
        if k == "sigmoid_ls":
            t = 0.5 * (y + 1.0)
            return (t - _sigmoid(s)) ** 2
        if k == "truncated_ls":
            a = self._alpha()
            return 0.5 * a * np.log1p((y - s) ** 2 / a)
        if k == "hinge":
            return np.maximum(0.0, 1.0 - y * s)
        return np.abs(1.0 - y * s)

    def derivative(self, s, y):
        s = np.asarray(s, dtype=float)
        k = self.kind
        if k == "logistic":
            return -y * _sigmoid(-y * s)
        if k == "huber":
            return np.clip(s - y, -self.delta, self.delta)
        if k == "squared":
            return s - y
        if k == "sigmoid_ls":
            t = 0.5 * (y + 1.0)
            q = _sigmoid(s)
            return -2.0 * (t - q) * q * (1.0 - q)
        if k == "truncated_ls":
            a = self._alpha()
            u = s - y
            return u / (1.0 + u * u / a)
        m = y * s
        if k == "hinge":
            return np.where(m < 1.0, -y, 0.0) * np.ones_like(s)
        return -y * np.sign(1.0 - m)

    def _alpha(self):
        if self.alpha is None:
            raise ConfigurationError("truncated_ls needs alpha (use with_alpha(n))")
        return self.alpha


def loss_spec(kind, **kw):
    return LossSpec(kind.lower(), **kw)


def _as_loss(loss):
    return loss_spec(loss) if isinstance(loss, str) else loss


def _check_labels(data, loss):
    if loss.kind in ("logistic", "sigmoid_ls", "hinge", "absolute"):
        if not np.all(np.isin(data.labels, (-1.0, 1.0))):
            raise ParameterError(f"{loss.kind} loss needs labels in {{-1, +1}}")


def build_erm_dc(data, loss, penalty: DcPenalty, lam_reg: float = 0.0) -> DcProblem:
    """Regularized ERM with a DC sparsity penalty.

    ``g`` is the mean loss plus ``(lam_reg / 2) ||x||^2`` (a finite sum),
    ``r`` is the penalty's scaled l1 part and ``h`` its convex remainder.
    """
    loss = _as_loss(loss).with_alpha(data.n)
    if not loss.convex:
        raise ConfigurationError(
            f"{loss.kind} is not convex; use build_erm_nonconvex for this loss"
        )
    if lam_reg < 0:
        raise ParameterError("lam_reg must be >= 0")
    _check_labels(data, loss)
    g = LinearModelSum(data.features, data.labels, loss, l2=lam_reg)
    h = PenaltyR2Oracle(data.d, penalty)
    r = penalty.r1
    G = None
    db = loss.derivative_bound
    if db is not None and lam_reg == 0:
        amax = float(np.max(np.abs(data.features))) if data.features.size else 0.0
        G = db * amax + penalty.grad_bound_r2_inf
    constants = ProblemConstants(
        G=G,
        G_r=r.grad_bound(data.d),
        L=g.smoothness,
        nu=1.0 if penalty.r2_smooth else None,
    )
    return DcProblem(g, h, r, constants, name=f"{loss.kind}+{penalty.kind}")


def _nonconvex_reg(reg, lam_reg):
    if isinstance(reg, Regularizer):
        return reg
    kind = str(reg).lower()
    if kind == "l0":
        return L0Reg(lam_reg)
    if kind in ("lp", "l_half", "lhalf"):
        return LpReg(lam_reg, 0.5)
    raise ParameterError(f"unknown non-convex regularizer {reg!r}")


def build_erm_nonconvex(data, loss, reg, lam_reg: float = 1.0,
                        L_loss: Optional[float] = None) -> DcProblem:
    """Smooth non-convex loss made DC by adding and subtracting a quadratic.

    ``g = mean loss + (L_loss / 2) ||x||^2`` (the quadratic is spread over the
    components), ``h = (L_loss / 2) ||x||^2`` and ``r`` is the non-convex
    regularizer, meant for the Moreau driver.  ``L_loss`` defaults to the
    curvature bound of the loss times ``max_i ||a_i||^2``.
    """
    loss = _as_loss(loss).with_alpha(data.n)
    if loss.kind not in ("sigmoid_ls", "truncated_ls"):
        raise ConfigurationError(f"build_erm_nonconvex expects sigmoid_ls or truncated_ls, got {loss.kind}")
    _check_labels(data, loss)
    if L_loss is None:
        row_sq = np.einsum("ij,ij->i", data.features, data.features)
        L_loss = loss.smoothness * float(np.max(row_sq))
    if not L_loss > 0:
        raise ConfigurationError(f"L_loss must be > 0, got {L_loss}")
    g = LinearModelSum(data.features, data.labels, loss, l2=L_loss)
    h = SquaredNormOracle(data.d, L_loss)
    r = _nonconvex_reg(reg, lam_reg)
    constants = ProblemConstants(L=g.smoothness, nu=1.0)
    return DcProblem(g, h, r, constants, name=f"{loss.kind}+{r.name}")


def build_pu_problem(positives, unlabeled, pi_p: float, loss="hinge",
                     lam_l2: float = 0.0) -> DcProblem:
    """Unbiased PU risk as a DC problem.

    ``g = (pi/n_p) sum l(z_i, +1) + (1/n_u) sum l(z_j, -1) + (lam_l2/2)||x||^2``
    and ``h = (pi/n_p) sum l(z_i, -1)``; both are finite sums and ``r = 0``.
    ``pi_p = 0`` is accepted and gives ``h = 0``.
    """
    loss = _as_loss(loss)
    if loss.kind not in ("hinge", "absolute"):
        raise ConfigurationError(f"PU builder expects hinge or absolute loss, got {loss.kind}")
    if not 0.0 <= pi_p < 1.0:
        raise ParameterError(f"class prior pi_p must lie in [0, 1), got {pi_p}")
    if positives.d != unlabeled.d:
        raise ParameterError("positive and unlabeled sets differ in dimension")
    n_p, n_u = positives.n, unlabeled.n
    n = n_p + n_u
    A = np.vstack([positives.features, unlabeled.features])
    b = np.concatenate([np.ones(n_p), -np.ones(n_u)])
    w = np.concatenate([np.full(n_p, pi_p * n / n_p), np.full(n_u, n / n_u)])
    g = LinearModelSum(A, b, loss, weights=w, l2=lam_l2)
    if pi_p == 0.0:
        h = ZeroOracle(positives.d)
    else:
        h = LinearModelSum(positives.features, -np.ones(n_p), loss,
                           weights=np.full(n_p, pi_p))
    amax = float(np.max(np.abs(A))) if A.size else 0.0
    G = None if lam_l2 > 0 else (float(np.max(w)) + pi_p) * amax
    constants = ProblemConstants(G=G, G_r=0.0)
    return DcProblem(g, h, constants=constants, name=f"pu-{loss.kind}")

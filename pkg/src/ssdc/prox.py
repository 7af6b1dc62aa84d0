r"""Proximal maps, sparsity penalties and their DC decompositions.

Every regularizer exposes ``prox(x, w)`` solving

.. math::

    \operatorname{prox}_{w r}(x) = \arg\min_y \frac{1}{2w}\|y - x\|^2 + r(y)

where ``w`` may be a scalar or an array broadcastable against ``x`` (per-coordinate
weights are only meaningful for separable regularizers).  For non-convex
regularizers the prox is set valued; ties are always resolved toward the
sparser point, i.e. toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "prox_l1",
    "prox_l0",
    "prox_lp_half",
    "prox_lp",
    "prox_capped_l1",
    "prox_l12",
    "project_ball",
    "project_box_ball",
    "Regularizer",
    "ZeroReg",
    "L1Reg",
    "L0Reg",
    "LpReg",
    "BoxReg",
    "SquaredL2Reg",
    "CappedL1Reg",
    "L12Reg",
    "DcPenalty",
    "dc_penalty",
    "PENALTY_KINDS",
    "MoreauEnvelope",
    "moreau_prox_and_subgrad",
    "envelope_value",
    "shifted_prox",
]


def _check_weight(w):
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError(f"prox weight must be finite and >= 0, got {w}")
    return w


def prox_l1(x, w):
    """Soft thresholding ``sign(x) * max(|x| - w, 0)``."""
    w = _check_weight(w)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - w, 0.0)


def prox_l0(x, w):
    """Hard thresholding for ``lam * ||.||_0`` with ``w = lam * mu``.

    Keeps ``x_i`` iff ``x_i**2 > 2 w``; the tie ``x_i**2 == 2 w`` maps to zero.
    """
    w = _check_weight(w)
    x = np.asarray(x, dtype=float)
    return np.where(x * x > 2.0 * w, x, 0.0)


def _lp_objective(y, x, w, p):
    return 0.5 * (y - x) ** 2 + w * np.abs(y) ** p


def prox_lp_half(x, w):
    r"""Coordinatewise minimizer of :math:`\tfrac12 (y - x)^2 + w |y|^{1/2}`.

    With ``s = sqrt(|y|)`` the stationarity condition is the depressed cubic
    ``s**3 - |x| s + w / 2 = 0``; its largest root is taken in trigonometric
    form and compared against ``y = 0``.
    """
    w = _check_weight(w)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    w_b = np.broadcast_to(w, x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = -(3.0 * np.sqrt(3.0) * w_b) / (4.0 * ax ** 1.5)
        arg = np.clip(np.nan_to_num(arg, nan=-1.0, neginf=-1.0), -1.0, 1.0)
        s = 2.0 * np.sqrt(ax / 3.0) * np.cos(np.arccos(arg) / 3.0)
    y = s * s
    keep = _lp_objective(y, ax, w_b, 0.5) < 0.5 * ax * ax
    return np.where(keep, np.sign(x) * y, 0.0)


def prox_lp(x, w, p, iters=100):
    r"""Coordinatewise prox of :math:`w |y|^p` for ``0 < p < 1``.

    ``p = 1/2`` uses the closed form; other exponents run a safeguarded Newton
    iteration on the stationarity equation ``y + w p y^{p-1} = |x|`` over the
    bracket ``[y_min, |x|]``, where ``y_min`` minimizes its left-hand side.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    if p == 0.5:
        return prox_lp_half(x, w)
    w = _check_weight(w)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    w_b = np.broadcast_to(w, x.shape).astype(float)
    y_min = (w_b * p * (1.0 - p)) ** (1.0 / (2.0 - p))

    def phi(y):
        return y + w_b * p * y ** (p - 1.0) - ax

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        solvable = (phi(np.maximum(y_min, 1e-300)) <= 0.0) & (ax > 0)
        lo = np.where(solvable, y_min, 0.0)
        hi = np.where(solvable, ax, 0.0)
        y = hi.copy()
        for _ in range(iters):
            f = phi(np.where(solvable, y, 1.0))
            df = 1.0 + w_b * p * (p - 1.0) * np.where(solvable, y, 1.0) ** (p - 2.0)
            step = np.where(df != 0, f / df, 0.0)
            cand = y - step
            # bisect whenever Newton leaves the bracket
            bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
            cand = np.where(bad, 0.5 * (lo + hi), cand)
            fc = phi(np.where(solvable, cand, 1.0))
            lo = np.where(solvable & (fc < 0), cand, lo)
            hi = np.where(solvable & (fc >= 0), cand, hi)
            y = np.where(solvable, cand, 0.0)
    keep = solvable & (_lp_objective(y, ax, w_b, p) < 0.5 * ax * ax)
    return np.where(keep, np.sign(x) * y, 0.0)


def prox_capped_l1(x, w, lam, theta):
    """Prox of ``lam * sum(min(|y_i|, theta))``."""
    w = _check_weight(w)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    wl = w * lam
    outer = np.maximum(ax, theta)
    inner = np.minimum(np.maximum(ax - wl, 0.0), theta)
    f_out = 0.5 * (outer - ax) ** 2 + wl * theta
    f_in = 0.5 * (inner - ax) ** 2 + wl * inner
    y = np.where(f_in <= f_out, inner, outer)
    return np.sign(x) * y


def prox_l12(x, w, lam):
    r"""Prox of :math:`\lambda(\|y\|_1 - \|y\|_2)`, which is not separable.

    If ``max|x_i| > w lam`` the solution is the soft-thresholded vector rescaled
    by ``(||z|| + w lam) / ||z||``; otherwise it is one-sparse, keeping the
    largest-magnitude coordinate (first index on ties).
    """
    x = np.asarray(x, dtype=float)
    wl = float(_check_weight(w)) * lam
    amax = np.max(np.abs(x)) if x.size else 0.0
    if amax == 0.0:
        return np.zeros_like(x)
    if amax > wl:
        z = prox_l1(x, wl)
        nz = np.linalg.norm(z)
        return z * (nz + wl) / nz
    y = np.zeros_like(x)
    i = int(np.argmax(np.abs(x)))
    y[i] = x[i]
    return y


def project_ball(x, center, radius):
    """Radial projection onto ``{y : ||y - center|| <= radius}``."""
    if radius is None or not np.isfinite(radius):
        return x
    diff = x - center
    nrm = np.linalg.norm(diff)
    if nrm <= radius:
        return x
    return center + diff * (radius / nrm)


def project_box_ball(x, lo, hi, center, radius, iters=200, tol=1e-12):
    """Projection onto a box intersected with a ball.

    The minimizer has the form ``clip((x + lam c) / (1 + lam), lo, hi)`` for a
    multiplier ``lam >= 0``; the distance to ``c`` decreases in ``lam``, so the
    multiplier is found by bisection.  The intersection must be nonempty.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)

    def at(lam):
        return np.clip((x + lam * c) / (1.0 + lam), lo, hi)

    y = at(0.0)
    if np.linalg.norm(y - c) <= radius:
        return y
    if np.linalg.norm(np.clip(c, lo, hi) - c) > radius:
        raise ParameterError("box and ball do not intersect")
    hi_lam = 1.0
    while np.linalg.norm(at(hi_lam) - c) > radius:
        hi_lam *= 2.0
        if hi_lam > 1e300:
            break
    lo_lam = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo_lam + hi_lam)
        if np.linalg.norm(at(mid) - c) > radius:
            lo_lam = mid
        else:
            hi_lam = mid
        if hi_lam - lo_lam <= tol * max(1.0, hi_lam):
            break
    return at(hi_lam)


class Regularizer:
    """Base regularizer: a value, a weighted prox and structural flags.

    Attributes
    ----------
    convex, separable : bool
    smoothness : float or None
        Lipschitz constant of the gradient when the regularizer is smooth.
    """

    convex = True
    separable = True
    smoothness = None
    is_box = False
    name = "base"

    def value(self, x):
        raise NotImplementedError

    def prox(self, x, w):
        raise NotImplementedError

    def subgradient(self, x):
        raise NotImplementedError(f"{self.name} exposes no subgradient")

    def grad_bound(self, d):
        """Bound ``G_r`` on the subgradient norm in dimension ``d``, or None."""
        return None

    def __repr__(self):
        return f"{type(self).__name__}()"


class ZeroReg(Regularizer):
    name = "zero"
    smoothness = 0.0

    def value(self, x):
        return 0.0

    def prox(self, x, w):
        _check_weight(w)
        return np.array(x, dtype=float, copy=True)

    def subgradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def grad_bound(self, d):
        return 0.0


@dataclass(frozen=True, repr=True)
class L1Reg(Regularizer):
    lam: float
    name = "l1"

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError(f"l1 weight must be >= 0, got {self.lam}")

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)))

    def prox(self, x, w):
        return prox_l1(x, self.lam * np.asarray(w, dtype=float))

    def subgradient(self, x):
        return self.lam * np.sign(x)

    def grad_bound(self, d):
        return self.lam * np.sqrt(d)


@dataclass(frozen=True, repr=True)
class L0Reg(Regularizer):
    lam: float
    convex = False
    name = "l0"

    def value(self, x):
        return self.lam * float(np.count_nonzero(x))

    def prox(self, x, w):
        return prox_l0(x, self.lam * np.asarray(w, dtype=float))


@dataclass(frozen=True, repr=True)
class LpReg(Regularizer):
    lam: float
    p: float = 0.5
    convex = False
    name = "lp"

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x) ** self.p))

    def prox(self, x, w):
        return prox_lp(x, self.lam * np.asarray(w, dtype=float), self.p)


@dataclass(frozen=True, repr=True)
class BoxReg(Regularizer):
    """Indicator of the box ``[lo, hi]^d``."""

    lo: float
    hi: float
    is_box = True
    name = "box"

    def __post_init__(self):
        if self.lo > self.hi:
            raise ParameterError(f"empty box [{self.lo}, {self.hi}]")

    def value(self, x):
        x = np.asarray(x)
        inside = np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12)
        return 0.0 if inside else np.inf

    def prox(self, x, w):
        _check_weight(w)
        return np.clip(x, self.lo, self.hi)

    def subgradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def grad_bound(self, d):
        return 0.0


@dataclass(frozen=True, repr=True)
class SquaredL2Reg(Regularizer):
    """``(scale / 2) ||x||^2``; used as the r-slot of the Moreau surrogate."""

    scale: float
    name = "sq_l2"

    @property
    def smoothness(self):
        return self.scale

    def value(self, x):
        return 0.5 * self.scale * float(np.dot(x, x))

    def prox(self, x, w):
        w = _check_weight(w)
        return np.asarray(x, dtype=float) / (1.0 + w * self.scale)

    def subgradient(self, x):
        return self.scale * np.asarray(x, dtype=float)


@dataclass(frozen=True, repr=True)
class CappedL1Reg(Regularizer):
    lam: float
    theta: float
    convex = False
    name = "capped_l1"

    def value(self, x):
        return self.lam * float(np.sum(np.minimum(np.abs(x), self.theta)))

    def prox(self, x, w):
        return prox_capped_l1(x, w, self.lam, self.theta)


@dataclass(frozen=True, repr=True)
class L12Reg(Regularizer):
    lam: float
    convex = False
    separable = False
    name = "l12"

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)) - np.linalg.norm(x))

    def prox(self, x, w):
        w = np.asarray(w, dtype=float)
        if w.ndim:
            raise ParameterError("l1-2 prox needs a scalar weight")
        return prox_l12(x, float(w), self.lam)


# --------------------------------------------------------------------------
# DC decompositions r = r1 - r2 with r1 a scaled l1 norm

PENALTY_KINDS = ("lsp", "mcp", "scad", "tl1", "capped_l1")


@dataclass(frozen=True)
class DcPenalty:
    """Sparsity penalty ``r1(x) - r2(x)`` with ``r1 = c ||x||_1`` and ``r2`` convex.

    ``r2_smoothness`` is None for the capped l1 penalty, whose ``r2`` is only
    subdifferentiable; ``r2_gradient`` then returns the subgradient
    ``lam * sign(x) * 1[|x| > theta]``.
    """

    kind: str
    lam: float
    theta: float

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ParameterError(f"unknown penalty kind {self.kind!r}")
        if self.lam <= 0 or self.theta <= 0:
            raise ParameterError("penalty requires lam > 0 and theta > 0")
        if self.kind == "scad" and self.theta <= 2:
            raise ParameterError(f"SCAD requires theta > 2, got {self.theta}")

    @property
    def l1_coef(self):
        lam, th = self.lam, self.theta
        if self.kind == "lsp":
            return lam / th
        if self.kind == "tl1":
            return lam * (1.0 + th) / th
        return lam

    @property
    def r1(self):
        return L1Reg(self.l1_coef)

    @property
    def r2_smooth(self):
        return self.kind != "capped_l1"

    @property
    def r2_smoothness(self):
        lam, th, k = self.lam, self.theta, self.kind
        if k == "lsp":
            return lam / th**2
        if k == "mcp":
            return 1.0 / th
        if k == "scad":
            return 1.0 / (th - 1.0)
        if k == "tl1":
            return lam * 2.0 * (1.0 + th) / th**2
        return None

    @property
    def grad_bound_r2_inf(self):
        """Bound on ``||grad r2||_inf``."""
        lam, th = self.lam, self.theta
        if self.kind == "lsp":
            return lam / th
        if self.kind == "tl1":
            return lam * (1.0 + th) / th
        return lam

    def penalty_value(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        lam, th = self.lam, self.theta
        if self.kind == "lsp":
            v = lam * np.log(a + th)
        elif self.kind == "mcp":
            v = np.where(a <= th * lam, lam * a - a * a / (2 * th), th * lam**2 / 2)
        elif self.kind == "scad":
            v = np.where(
                a <= lam,
                lam * a,
                np.where(
                    a <= th * lam,
                    (-a * a + 2 * th * lam * a - lam**2) / (2 * (th - 1)),
                    (th + 1) * lam**2 / 2,
                ),
            )
        elif self.kind == "tl1":
            v = lam * (th + 1) * a / (th + a)
        else:
            v = lam * np.minimum(a, th)
        return float(np.sum(v))

    def r2_value(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        lam, th = self.lam, self.theta
        if self.kind == "lsp":
            v = lam * (a / th - np.log(a + th))
        elif self.kind == "mcp":
            v = np.where(a <= th * lam, a * a / (2 * th), lam * a - th * lam**2 / 2)
        elif self.kind == "scad":
            v = np.where(
                a <= lam,
                0.0,
                np.where(
                    a <= th * lam,
                    (a * a - 2 * lam * a + lam**2) / (2 * (th - 1)),
                    lam * a - (th + 1) * lam**2 / 2,
                ),
            )
        elif self.kind == "tl1":
            v = lam * ((th + 1) * a / th - (th + 1) * a / (th + a))
        else:
            v = lam * np.maximum(a - th, 0.0)
        return float(np.sum(v))

    def r2_gradient(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        s = np.sign(x)
        lam, th = self.lam, self.theta
        if self.kind == "lsp":
            g = lam * (1.0 / th - 1.0 / (a + th))
        elif self.kind == "mcp":
            g = np.where(a <= th * lam, a / th, lam)
        elif self.kind == "scad":
            g = np.where(a <= lam, 0.0, np.where(a <= th * lam, (a - lam) / (th - 1), lam))
        elif self.kind == "tl1":
            g = lam * (th + 1) * (1.0 / th - th / (th + a) ** 2)
        else:
            g = np.where(a > th, lam, 0.0)
        return s * g

    def breakpoints(self):
        """Magnitudes where ``r2`` or its derivative is not smooth."""
        lam, th = self.lam, self.theta
        return {
            "lsp": [0.0],
            "mcp": [0.0, th * lam],
            "scad": [0.0, lam, th * lam],
            "tl1": [0.0],
            "capped_l1": [0.0, th],
        }[self.kind]

    def as_regularizer(self):
        """The whole (non-convex) penalty as a prox-capable regularizer."""
        if self.kind == "capped_l1":
            return CappedL1Reg(self.lam, self.theta)
        raise NotImplementedError(
            f"{self.kind} is handled through its DC split; only capped_l1 routes to the Moreau path"
        )


def dc_penalty(kind, lam, theta):
    """Build the DC decomposition of a sparsity penalty (see :class:`DcPenalty`)."""
    return DcPenalty(kind.lower(), float(lam), float(theta))


# --------------------------------------------------------------------------
# Moreau envelope


@dataclass(frozen=True)
class MoreauEnvelope:
    r"""Moreau envelope :math:`r_\mu(x) = \min_y \|y-x\|^2/(2\mu) + r(y)`.

    It splits as ``||x||^2 / (2 mu) - R_mu(x)`` with ``R_mu`` convex; ``p / mu``
    with ``p = prox_{mu r}(x)`` is a subgradient of ``R_mu`` at ``x``.
    """

    base: Regularizer
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")

    def prox(self, x):
        return self.base.prox(x, self.mu)

    def value(self, x):
        return envelope_value(self, x)

    def conjugate_value(self, x):
        """``R_mu(x) = ||x||^2 / (2 mu) - r_mu(x)``."""
        x = np.asarray(x, dtype=float)
        return float(np.dot(x, x)) / (2 * self.mu) - envelope_value(self, x)

    def frechet_subgradient(self, x):
        """``(x - p) / mu``, a Frechet subgradient of the base at ``p``."""
        x = np.asarray(x, dtype=float)
        return (x - self.prox(x)) / self.mu


def moreau_prox_and_subgrad(env, x):
    """Return ``(p, p / mu)`` with ``p = prox_{mu r}(x)``."""
    p = env.prox(x)
    return p, p / env.mu


def envelope_value(env, x):
    x = np.asarray(x, dtype=float)
    p = env.prox(x)
    d = p - x
    return float(np.dot(d, d)) / (2 * env.mu) + env.base.value(p)


def shifted_prox(reg, gamma, center, eta, anchor, lin):
    r"""Exact minimizer of the inner proximal step

    .. math::

        x^\top \mathrm{lin} + r(x) + \frac{\gamma}{2}\|x - c\|^2 + \frac{1}{2\eta}\|x - a\|^2,

    i.e. ``prox_{w r}(w (gamma c + a / eta - lin))`` with ``w = 1 / (gamma + 1/eta)``.
    """
    if gamma < 0 or not eta > 0:
        raise ParameterError(f"shifted_prox needs gamma >= 0 and eta > 0 (got {gamma}, {eta})")
    inv = 1.0 / eta
    w = 1.0 / (gamma + inv)
    c = w * (gamma * center + inv * anchor - lin)
    return reg.prox(c, w)

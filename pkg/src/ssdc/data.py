"""Datasets: libsvm text I/O, synthetic generators and feature scaling."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ParseError

__all__ = [
    "Dataset",
    "read_libsvm",
    "write_libsvm",
    "parse_libsvm_line",
    "gen_synthetic",
    "gen_pu",
    "scale_features",
    "dataset_digest",
]


@dataclass(frozen=True)
class Dataset:
    """Dense features ``(n, d)`` with labels; classification labels are +-1."""

    features: np.ndarray
    labels: np.ndarray
    task: str = "classification"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ParameterError(f"inconsistent dataset shapes {X.shape} and {y.shape}")
        if self.task not in ("classification", "regression"):
            raise ParameterError(f"unknown task {self.task!r}")
        if self.task == "classification" and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ParameterError("classification labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.task, dict(self.meta))


def parse_libsvm_line(line, lineno=None):
    """Parse ``label idx:val ...`` into ``(label, indices, values)`` (0-based indices)."""
    body = line.split("#", 1)[0].strip()
    if not body:
        return None
    toks = body.split()
    try:
        label = float(toks[0])
    except ValueError:
        raise ParseError(f"bad label {toks[0]!r}", line=lineno) from None
    idx, vals = [], []
    prev = 0
    for tok in toks[1:]:
        key, sep, val = tok.partition(":")
        if not sep:
            raise ParseError(f"expected idx:val, got {tok!r}", line=lineno)
        try:
            i = int(key)
            v = float(val)
        except ValueError:
            raise ParseError(f"bad feature {tok!r}", line=lineno) from None
        if i < 1:
            raise ParseError(f"feature indices are 1-based, got {i}", line=lineno)
        if i <= prev:
            raise ParseError(f"feature indices must increase strictly ({prev} then {i})", line=lineno)
        prev = i
        idx.append(i - 1)
        vals.append(v)
    return label, idx, vals


def read_libsvm(path, d=None, task=None):
    """Read a libsvm-format file into a dense :class:`Dataset`.

    Parameters
    ----------
    d : int, optional
        Feature dimension; inferred from the largest index when omitted.
    task : str, optional
        ``classification`` or ``regression``; inferred from the labels when
        omitted (all labels in ``{-1, +1}`` means classification).
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parsed = parse_libsvm_line(line, lineno)
            if parsed is not None:
                rows.append((lineno, parsed))
    max_idx = max((p[1][-1] + 1 for _, p in rows if p[1]), default=0)
    if d is None:
        d = max_idx
    X = np.zeros((len(rows), d))
    y = np.empty(len(rows))
    for r, (lineno, (label, idx, vals)) in enumerate(rows):
        if idx and idx[-1] >= d:
            raise ParseError(f"feature index {idx[-1] + 1} exceeds dimension {d}", line=lineno)
        X[r, idx] = vals
        y[r] = label
    if task is None:
        task = "classification" if len(y) and np.all(np.isin(y, (-1.0, 1.0))) else "regression"
    return Dataset(X, y, task, {"source": str(path)})


def write_libsvm(data: Dataset, path):
    """Write nonzero entries with 1-based indices; ``repr`` floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, label in zip(data.features, data.labels):
            lab = f"{int(label):+d}" if data.task == "classification" else repr(float(label))
            nz = np.flatnonzero(x)
            feats = " ".join(f"{i + 1}:{float(x[i])!r}" for i in nz)
            fh.write(f"{lab} {feats}".rstrip() + "\n")


def gen_synthetic(n, d, task="classification", sparsity=0.1, noise=0.1, seed=0, corr=0.0):
    """Gaussian design with a sparse ground truth.

    ``w*`` has ``max(1, round(sparsity d))`` standard-normal entries at random
    positions.  Feature rows are Gaussian with covariance ``corr**|i - j|``
    (independent when ``corr = 0``).  Regression labels are ``A w* + noise e``;
    classification labels are the sign of the same quantity (zero maps to +1).
    """
    if n < 1 or d < 1:
        raise ParameterError(f"need n, d >= 1, got {n}, {d}")
    if not 0 < sparsity <= 1 or noise < 0:
        raise ParameterError("need 0 < sparsity <= 1 and noise >= 0")
    if task not in ("classification", "regression"):
        raise ParameterError(f"unknown task {task!r}")
    if not -1 < corr < 1:
        raise ParameterError(f"corr must lie in (-1, 1), got {corr}")
    rng = np.random.default_rng(seed)
    k = max(1, int(round(sparsity * d)))
    w = np.zeros(d)
    w[rng.choice(d, size=k, replace=False)] = rng.standard_normal(k)
    A = rng.standard_normal((n, d))
    if corr:
        # AR(1) rows: a_j = corr a_{j-1} + sqrt(1 - corr^2) z_j
        for j in range(1, d):
            A[:, j] = corr * A[:, j - 1] + math.sqrt(1.0 - corr * corr) * A[:, j]
    s = A @ w + noise * rng.standard_normal(n)
    y = np.where(s >= 0, 1.0, -1.0) if task == "classification" else s
    meta = {"w_star": w, "seed": seed, "sparsity": sparsity, "noise": noise, "corr": corr}
    return Dataset(A, y, task, meta)


def gen_pu(n_pos, n_unl, d, pi_p, seed=0, margin=1.0):
    """Positive and unlabeled samples from a two-Gaussian mixture.

    Positives are ``N(+margin * u, I)`` and negatives ``N(-margin * u, I)``
    with a random unit ``u``; unlabeled points are positive with probability
    ``pi_p``.  Returns ``(positives, unlabeled, hidden_labels)``.
    """
    if not 0 < pi_p < 1:
        raise ParameterError(f"pi_p must lie in (0, 1), got {pi_p}")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    P = margin * u + rng.standard_normal((n_pos, d))
    hidden = np.where(rng.random(n_unl) < pi_p, 1.0, -1.0)
    U = hidden[:, None] * margin * u + rng.standard_normal((n_unl, d))
    pos = Dataset(P, np.ones(n_pos), "classification", {"direction": u})
    unl = Dataset(U, -np.ones(n_unl), "classification", {"direction": u})
    return pos, unl, hidden


def scale_features(data: Dataset, lo=-1.0, hi=1.0):
    """Per-feature min-max scaling to ``[lo, hi]``; constant columns map to 0."""
    X = data.features
    mn = X.min(axis=0)
    mx = X.max(axis=0)
    span = mx - mn
    safe = np.where(span > 0, span, 1.0)
    Z = lo + (hi - lo) * (X - mn) / safe
    Z = np.where(span > 0, Z, 0.0)
    return Dataset(Z, data.labels, data.task, dict(data.meta, scaled=True))


def dataset_digest(data: Dataset):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.features, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(data.labels, dtype="<f8").tobytes())
    h.update(data.task.encode())
    return h.hexdigest()

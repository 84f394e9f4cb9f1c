"""Fisher linear discriminant: class means, scatter matrices, projection, objective."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateDenominator,
    DimensionMismatch,
    EmptyClass,
    RankDeficient,
    SingularScatter,
)

RANK_TOL = 1e-9


def _classes(y: np.ndarray, classes=None) -> np.ndarray:
    if classes is None:
        return np.unique(y)
    classes = np.asarray(classes)
    present = np.isin(classes, y)
    if not present.all():
        raise EmptyClass(f"classes {classes[~present].tolist()} have no samples")
    return classes


def class_means(x: np.ndarray, y: np.ndarray, classes=None):
    """Per-class means (K x n), the overall mean, and class counts."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    cls = _classes(y, classes)
    means = np.empty((len(cls), x.shape[1]))
    counts = np.empty(len(cls), dtype=np.int64)
    for j, c in enumerate(cls):
        members = x[y == c]
        means[j] = members.mean(axis=0)
        counts[j] = len(members)
    return means, x.mean(axis=0), counts


@dataclass
class ScatterPair:
    s_w: np.ndarray
    s_b: np.ndarray
    class_means: np.ndarray
    overall_mean: np.ndarray
    class_counts: np.ndarray
    classes: np.ndarray


def scatter_matrices(x: np.ndarray, y: np.ndarray, classes=None) -> ScatterPair:
    """Within-class and between-class scatter as n x n outer-product sums."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    cls = _classes(y, classes)
    means, mu, counts = class_means(x, y, cls)
    n = x.shape[1]
    s_w = np.zeros((n, n))
    s_b = np.zeros((n, n))
    for j, c in enumerate(cls):
        dev = x[y == c] - means[j]
        s_w += dev.T @ dev
        off = (means[j] - mu)[:, None]
        s_b += counts[j] * (off @ off.T)
    # exact symmetry; the accumulations above are symmetric up to rounding
    s_w = 0.5 * (s_w + s_w.T)
    s_b = 0.5 * (s_b + s_b.T)
    return ScatterPair(s_w, s_b, means, mu, counts, cls)


def default_epsilon(s_w: np.ndarray) -> float:
    return 1e-6 * float(np.trace(s_w)) / s_w.shape[0]


@dataclass
class ProjectionModel:
    """Projection W (n x d, one discriminant direction per column).

    Columns solve S_B w = lambda (S_W + eps I) w, are scaled so that
    w^T (S_W + eps I) w = 1 and have their first significant entry positive.
    """

    w: np.ndarray
    eigenvalues: np.ndarray
    epsilon: float
    standardization: Optional[dict] = field(default=None)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "d": self.d,
            "epsilon": self.epsilon,
            "eigenvalues": self.eigenvalues.tolist(),
            "w": self.w.ravel(order="F").tolist(),
            "standardization": self.standardization,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ProjectionModel":
        doc = json.loads(text)
        w = np.array(doc["w"], dtype=np.float64).reshape((doc["n"], doc["d"]), order="F")
        return cls(
            w=w,
            eigenvalues=np.array(doc["eigenvalues"], dtype=np.float64),
            epsilon=float(doc["epsilon"]),
            standardization=doc.get("standardization"),
        )


def _fix_signs(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for j in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, j]) > 1e-12)
        if len(nz) and v[nz[0], j] < 0:
            v[:, j] = -v[:, j]
    return v


def solve_generalized(s_b: np.ndarray, s_w: np.ndarray, epsilon: float):
    """All eigenpairs of S_B w = lambda (S_W + eps I) w, descending.

    Whitening: with S_W + eps I = L L^T, the symmetric matrix
    L^-1 S_B L^-T shares the eigenvalues, and w = L^-T v.
    """
    n = s_w.shape[0]
    try:
        chol = scipy.linalg.cholesky(s_w + epsilon * np.eye(n), lower=True)
    except np.linalg.LinAlgError:
        raise SingularScatter(
            f"S_W + {epsilon:g} I is not positive definite; increase epsilon"
        ) from None
    tmp = scipy.linalg.solve_triangular(chol, s_b, lower=True)
    c = scipy.linalg.solve_triangular(chol, tmp.T, lower=True)
    c = 0.5 * (c + c.T)
    lam, v = np.linalg.eigh(c)
    order = np.lexsort((np.arange(n), -lam))
    lam, v = lam[order], v[:, order]
    w = scipy.linalg.solve_triangular(chol.T, v, lower=False)
    return lam, _fix_signs(w)


def fit(x: np.ndarray, y: np.ndarray, d: int, epsilon: Optional[float] = None) -> ProjectionModel:
    """Top-``d`` discriminant directions of (x, y).

    ``epsilon`` regularizes S_W; it defaults to 1e-6 of its mean diagonal.
    """
    pair = scatter_matrices(x, y)
    k = len(pair.classes)
    if not 1 <= d:
        raise ValueError(f"d must be >= 1, got {d}")
    eps = default_epsilon(pair.s_w) if epsilon is None else float(epsilon)
    if eps < 0:
        raise ValueError(f"epsilon must be >= 0, got {eps}")
    lam, w = solve_generalized(pair.s_b, pair.s_w, eps)
    lam_max = lam[0] if len(lam) else 0.0
    significant = int(np.sum(lam > RANK_TOL * lam_max)) if lam_max > 0 else 0
    if d > min(significant, k - 1):
        raise RankDeficient(
            f"requested d={d} but only {significant} eigenvalues are significant "
            f"(K={k} classes allows at most {k - 1})"
        )
    return ProjectionModel(w=w[:, :d].copy(), eigenvalues=lam[:d].copy(), epsilon=eps)


def transform(model: ProjectionModel, x: np.ndarray) -> np.ndarray:
    """z_i = W^T x_i for every row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.n:
        raise DimensionMismatch(f"model expects {model.n} features, got {x.shape[1]}")
    return x @ model.w


def objective(w, pair: ScatterPair) -> float:
    """prod diag(W^T S_B W) / prod diag(W^T S_W W)."""
    w = w.w if isinstance(w, ProjectionModel) else np.asarray(w, dtype=np.float64)
    num = np.einsum("ij,ik,kj->j", w, pair.s_b, w)
    den = np.einsum("ij,ik,kj->j", w, pair.s_w, w)
    if np.any(den < 1e-15):
        raise DegenerateDenominator(f"diag(W^T S_W W) has entries below 1e-15: {den}")
    return float(np.prod(num) / np.prod(den))


def eigen_residuals(model: ProjectionModel, pair: ScatterPair) -> np.ndarray:
    """||S_B w - lambda (S_W + eps I) w|| / (||S_B|| ||w||), per column."""
    n = model.n
    reg = pair.s_w + model.epsilon * np.eye(n)
    out = np.empty(model.d)
    sb_norm = np.linalg.norm(pair.s_b, 2)
    for j in range(model.d):
        wj = model.w[:, j]
        r = pair.s_b @ wj - model.eigenvalues[j] * (reg @ wj)
        out[j] = np.linalg.norm(r) / (sb_norm * np.linalg.norm(wj))
    return out

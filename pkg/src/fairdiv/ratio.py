"""Probability-ratio estimation by minimizing a U-statistic MMD.

On finite viewpoint/label sets the delta kernel has an explicit feature map
(one-hot over ``(v, y)`` cells), so every RKHS quantity below is an ordinary
vector in ``R^{|V| |Y|}``.

The weights reweight joint draws toward the product of the marginals, so
they estimate ``P_V x P_Y / P_VY`` at the observed pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .divergence import RatioBounds
from .exceptions import ConvergenceError, InsufficientSamples, ShapeError


class LabeledPair(NamedTuple):
    v: int
    yhat: int


@dataclass(frozen=True)
class KernelSpec:
    """Delta kernel ``k((v, y), (v', y')) = 1[v = v'] 1[y = y']``.

    ``productdelta`` is the same kernel written as a product of two delta
    kernels; on a finite grid both have identical feature maps.
    """

    n_v: int
    n_y: int
    kind: str = "delta"

    def __post_init__(self):
        if self.kind not in ("delta", "productdelta"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.n_v < 1 or self.n_y < 1:
            raise ValueError("index sets must be non-empty")

    @property
    def feature_dim(self):
        return self.n_v * self.n_y

    def cell(self, v, y):
        return np.asarray(v) * self.n_y + np.asarray(y)

    def features(self, v, y):
        """One-hot feature rows, shape ``(n, feature_dim)``."""
        idx = self.cell(v, y)
        out = np.zeros((idx.size, self.feature_dim))
        out[np.arange(idx.size), idx.ravel()] = 1.0
        return out

    def gram(self):
        return np.eye(self.feature_dim)


def as_pairs(samples, kernel=None):
    """Normalize samples to two int arrays ``(v, yhat)``."""
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1:
        v, y = samples
    else:
        arr = np.asarray(samples)
        if arr.size == 0:
            return np.zeros(0, int), np.zeros(0, int)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ShapeError("samples must be (v, yhat) pairs")
        v, y = arr[:, 0], arr[:, 1]
    v = np.asarray(v, dtype=int)
    y = np.asarray(y, dtype=int)
    if v.shape != y.shape:
        raise ShapeError("v and yhat must have equal length")
    if kernel is not None:
        if v.size and (v.min() < 0 or v.max() >= kernel.n_v):
            raise ShapeError("viewpoint index out of range")
        if y.size and (y.min() < 0 or y.max() >= kernel.n_y):
            raise ShapeError("label index out of range")
    return v, y


def default_kernel(v, y):
    return KernelSpec(int(np.max(v)) + 1, int(np.max(y)) + 1)


def _check_n(n):
    if n < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {n}")


def cross_pair_sum(v, y, kernel):
    """``sum_{i != j} Phi(v_i, y_j)`` as a feature-space vector."""
    cv = np.bincount(v, minlength=kernel.n_v).astype(float)
    cy = np.bincount(y, minlength=kernel.n_y).astype(float)
    joint = np.bincount(kernel.cell(v, y), minlength=kernel.feature_dim)
    return np.outer(cv, cy).ravel() - joint


def mean_embedding_residual(samples, r, kernel=None):
    v, y = as_pairs(samples, kernel)
    kernel = kernel or default_kernel(v, y)
    n = v.size
    _check_n(n)
    r = np.asarray(r, dtype=float)
    if r.shape != (n,):
        raise ShapeError(f"r must have length {n}")
    if np.any(r < 0):
        raise ValueError("ratio values must be non-negative")
    indep = cross_pair_sum(v, y, kernel) / (n * (n - 1))
    weighted = np.bincount(kernel.cell(v, y), weights=r, minlength=kernel.feature_dim) / n
    return indep - weighted


def empirical_mmd(samples, r, kernel=None) -> float:
    return float(np.linalg.norm(mean_embedding_residual(samples, r, kernel)))


@dataclass
class MmdQp:
    """``min_{r >= 0} 1/2 r^T (Q + ridge I) r - p^T r``.

    ``features`` holds a factor with ``Q = F F^T`` when one is known; the
    solver then never forms ``Q``.
    """

    p: np.ndarray
    ridge: float = 0.0
    features: np.ndarray | None = None
    _Q: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self._Q is None and self.features is None:
            raise ValueError("need Q or a feature factor")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    @classmethod
    def from_matrix(cls, Q, p, ridge=0.0):
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (len(p), len(p)):
            raise ShapeError("Q must be square and match p")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        return cls(p=p, ridge=ridge, _Q=Q)

    @property
    def n(self):
        return self.p.size

    @property
    def Q(self):
        if self._Q is None:
            self._Q = self.features @ self.features.T
        return self._Q

    def matvec(self, r):
        if self.features is not None:
            out = self.features @ (self.features.T @ r)
        else:
            out = self._Q @ r
        return out + self.ridge * r

    def gradient(self, r):
        return self.matvec(r) - self.p

    def objective(self, r):
        r = np.asarray(r, dtype=float)
        return float(0.5 * r @ self.matvec(r) - self.p @ r)

    def row_bounds(self):
        """Absolute row sums of ``Q + ridge I`` (Gershgorin discs)."""
        F = self.features
        if F is not None and np.all(F >= 0):
            rows = F @ F.sum(axis=0)
        else:
            rows = np.abs(self.Q).sum(axis=1)
        return rows + self.ridge


def default_ridge(n, trace):
    return 1e-6 * trace / n


def build_qp(samples, kernel=None, ridge=None) -> MmdQp:
    v, y = as_pairs(samples, kernel)
    kernel = kernel or default_kernel(v, y)
    n = v.size
    _check_n(n)
    F = kernel.features(v, y)
    p = F @ cross_pair_sum(v, y, kernel) / (n - 1)
    if ridge is None:
        ridge = default_ridge(n, float(np.einsum("ij,ij->", F, F)))
    return MmdQp(p=p, ridge=float(ridge), features=F)


def kkt_residual(qp, r):
    g = qp.gradient(r)
    return float(np.max(np.abs(r - np.maximum(r - g, 0.0)))) if r.size else 0.0


def solve_ratio_qp(qp: MmdQp, max_iter=20000, tol=1e-8, step="diagonal", r0=None):
    """Projected gradient on the non-negative orthant.

    ``step="global"`` uses the fixed step ``1/L`` with ``L`` the largest
    Gershgorin bound.  ``step="diagonal"`` scales each coordinate by its own
    Gershgorin bound; since ``diag(row sums) - Q`` is diagonally dominant this
    is still a majorize-minimize step and converges for any PSD ``Q``.
    """
    rows = qp.row_bounds()
    if np.any(rows <= 0):
        raise ValueError("QP has an all-zero row and no ridge; minimizer not unique")
    scale = 1.0 / rows if step == "diagonal" else np.full(qp.n, 1.0 / rows.max())
    r = np.zeros(qp.n) if r0 is None else np.maximum(np.asarray(r0, float), 0.0)
    res = np.inf
    for _ in range(max_iter):
        g = qp.gradient(r)
        res = float(np.max(np.abs(r - np.maximum(r - g, 0.0))))
        if res <= tol:
            return r
        r = np.maximum(r - scale * g, 0.0)
    res = kkt_residual(qp, r)
    if res <= tol:
        return r
    raise ConvergenceError(
        f"projected gradient stopped after {max_iter} iterations (residual {res:.3g})",
        iterate=r,
        residual=res,
    )


@dataclass(frozen=True)
class RatioTable:
    per_sample: np.ndarray
    per_cell: np.ndarray
    normalized: bool = False
    clamped: bool = False

    def lookup(self, v, y):
        return self.per_cell[np.asarray(v), np.asarray(y)]


def aggregate_cells(v, y, r, kernel):
    idx = kernel.cell(v, y)
    sums = np.bincount(idx, weights=r, minlength=kernel.feature_dim)
    counts = np.bincount(idx, minlength=kernel.feature_dim)
    with np.errstate(invalid="ignore", divide="ignore"):
        cell = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return cell.reshape(kernel.n_v, kernel.n_y)


def estimate_ratio(
    samples,
    kernel=None,
    ridge=None,
    normalize=False,
    clamp: RatioBounds | None = None,
    max_iter=20000,
    tol=1e-8,
) -> RatioTable:
    v, y = as_pairs(samples, kernel)
    kernel = kernel or default_kernel(v, y)
    qp = build_qp((v, y), kernel, ridge)
    r = solve_ratio_qp(qp, max_iter=max_iter, tol=tol)
    if normalize:
        mean = r.mean()
        if mean > 0:
            r = r / mean
    if clamp is not None:
        r = np.clip(r, clamp.c_lo, clamp.c_hi)
    return RatioTable(
        per_sample=r,
        per_cell=aggregate_cells(v, y, r, kernel),
        normalized=bool(normalize),
        clamped=clamp is not None,
    )

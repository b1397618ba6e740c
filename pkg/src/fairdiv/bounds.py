"""Monte-Carlo Rademacher complexities over finite hypothesis sets, and bound assembly."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dependency import theorem1_constant
from .divergence import PHI_NAMES, RatioBounds, get_phi
from .exceptions import ShapeError
from .learner import LinearScorer

DEFAULT_DRAWS = 100_000
#: sign vectors drawn per block; each block gets its own spawned seed
BLOCK = 2_000


@dataclass(frozen=True)
class LossMatrix:
    """Losses of ``m`` hypotheses on ``n`` samples; ``values[h, i]``."""

    values: np.ndarray
    range_bound: float | None = None

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.ndim != 2 or vals.size == 0:
            raise ShapeError("loss matrix must be a non-empty m x n table")
        if not np.all(np.isfinite(vals)):
            raise ValueError("losses must be finite")
        spread = float(vals.max() - vals.min())
        bound = spread if self.range_bound is None else float(self.range_bound)
        if spread > bound + 1e-12:
            raise ValueError(f"loss spread {spread:.6g} exceeds range bound {bound:.6g}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "range_bound", bound)

    @property
    def shape(self):
        return self.values.shape

    def extend(self, other: "LossMatrix") -> "LossMatrix":
        """Union of two hypothesis sets on the same samples."""
        if other.shape[1] != self.shape[1]:
            raise ShapeError("hypothesis sets must be evaluated on the same samples")
        return LossMatrix(
            np.vstack([self.values, other.values]),
            max(self.range_bound, other.range_bound,
                float(max(self.values.max(), other.values.max())
                      - min(self.values.min(), other.values.min()))),
        )

    @classmethod
    def from_scorers(cls, scorers, X, y, reference: LinearScorer | None = None):
        """Logistic losses of each scorer, minus those of ``reference`` if given."""
        y = np.asarray(y, dtype=int)
        rows = [_logistic_losses(s, X, y) for s in scorers]
        if not rows:
            raise ShapeError("need at least one scorer")
        vals = np.array(rows)
        if reference is not None:
            vals = vals - _logistic_losses(reference, X, y)[None, :]
        return cls(vals)


def _logistic_losses(scorer: LinearScorer, X, y):
    S = scorer.scores(X)
    return logsumexp(S, axis=1) - S[np.arange(len(y)), y]


def random_scorers(n_classes, dim, count, scale=1.0, seed=0):
    """``count`` scorers with iid normal weights of standard deviation ``scale``."""
    rng = np.random.default_rng(seed)
    return [LinearScorer(scale * rng.normal(size=(n_classes, dim + 1))) for _ in range(count)]


@dataclass(frozen=True)
class ComplexityEstimate:
    rad: float
    rad_abs: float
    sup_variance: float
    draws: int = 0
    std_error: float = 0.0

    @property
    def sigma(self):
        return float(np.sqrt(self.sup_variance))


def empirical_rademacher(losses: LossMatrix, draws=DEFAULT_DRAWS, seed=0) -> ComplexityEstimate:
    """Average over random sign vectors of ``sup_h (1/n) sum_i s_i values[h, i]``.

    Sign blocks come from seeds spawned off ``seed``, so the result does not
    depend on how blocks are scheduled, and two loss matrices on the same
    samples see identical signs (adding hypotheses can only raise each sup).
    ``std_error`` is the larger of the two Monte-Carlo standard errors.
    """
    if not isinstance(losses, LossMatrix):
        losses = LossMatrix(losses)
    if draws < 1:
        raise ValueError("draws must be at least 1")
    H = losses.values
    n = H.shape[1]
    n_blocks = -(-draws // BLOCK)
    seeds = np.random.SeedSequence(seed).spawn(n_blocks)
    sums = np.zeros(2)
    sq = np.zeros(2)
    for b, ss in enumerate(seeds):
        size = min(BLOCK, draws - b * BLOCK)
        signs = np.random.default_rng(ss).integers(0, 2, size=(size, n), dtype=np.int8)
        proj = (2.0 * signs - 1.0) @ H.T / n
        sup = proj.max(axis=1)
        sup_abs = np.abs(proj).max(axis=1)
        sums += [sup.sum(), sup_abs.sum()]
        sq += [(sup * sup).sum(), (sup_abs * sup_abs).sum()]
    mean = sums / draws
    if draws > 1:
        var = np.maximum(sq / draws - mean**2, 0.0) * draws / (draws - 1)
        se = float(np.sqrt(var.max() / draws))
    else:
        se = float("inf")
    return ComplexityEstimate(
        rad=float(mean[0]),
        rad_abs=float(mean[1]),
        sup_variance=float(H.var(axis=1).max()),
        draws=int(draws),
        std_error=se,
    )


def _check_tn(t, n):
    if not t > 0:
        raise ValueError("t must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")


def generalization_bound(risk_gap, est: ComplexityEstimate, c, t, n) -> float:
    """``risk_gap + 4 rad + sigma sqrt(2t/n) + 4ct/(3n)``."""
    _check_tn(t, n)
    return float(
        risk_gap + 4.0 * est.rad + est.sigma * np.sqrt(2.0 * t / n) + c * 4.0 * t / (3.0 * n)
    )


def restriction_cost_bound(est_tau: ComplexityEstimate, est_full: ComplexityEstimate,
                           c, t, tau, n) -> float:
    """Bound on the excess risk paid for restricting the class.

    ``tau`` only enters the confidence level, not the value.
    """
    _check_tn(t, n)
    if not tau > 0:
        raise ValueError("tau must be positive")
    return float(
        4.0 * est_tau.rad_abs
        + 4.0 * est_full.rad_abs
        + (est_tau.sigma + est_full.sigma) * np.sqrt(2.0 * t / n)
        + c * 8.0 * t / (3.0 * n)
    )


def constant_sweep(phis=PHI_NAMES, t_grid=(0.1, 0.5, 1.0, 2.0)):
    """Rows ``(phi, t, c)`` with ``c`` the bound constant at ratio bounds ``(e^-t, e^t)``."""
    t_grid = [float(t) for t in t_grid]
    if any(not t > 0 for t in t_grid):
        raise ValueError("t grid entries must be positive")
    return [
        (get_phi(p).kind, t, theorem1_constant(p, RatioBounds.symmetric(t)))
        for p in phis
        for t in t_grid
    ]


def phi_shape_table(phis=PHI_NAMES, u_grid=None):
    """Rows ``(phi, u, phi(u))``."""
    u = np.linspace(0.05, 4.0, 80) if u_grid is None else np.asarray(u_grid, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("u grid entries must be positive")
    rows = []
    for p in phis:
        gen = get_phi(p)
        rows.extend((gen.kind, float(x), float(gen.phi(x))) for x in u)
    return rows


def table_to_csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()

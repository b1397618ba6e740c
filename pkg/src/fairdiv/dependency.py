"""Empirical dependency estimate with a finite-sample upper bound."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np

from .divergence import RatioBounds, get_phi
from .exceptions import DomainError, InsufficientSamples
from .ratio import KernelSpec, as_pairs, default_kernel, empirical_mmd, estimate_ratio

#: floor applied to the scale ``a`` when every term of its formula vanishes
SCALE_FLOOR = 1e-12


@dataclass(frozen=True)
class DependencyReport:
    d_phi_n: float
    mmd_n: float
    a_n: float
    c_const: float
    t: float
    n: int
    upper_bound: float

    def to_csv(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in fields(self)]
        if header:
            w.writerow(names)
        w.writerow([_fmt(getattr(self, k)) for k in names])
        return buf.getvalue()

    def to_text(self):
        width = max(len(f.name) for f in fields(self))
        return "\n".join(
            f"{k:<{width}} : {_fmt(v)}" for k, v in asdict(self).items()
        ) + "\n"


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def empirical_divergence(phi, r_values) -> float:
    """Sample mean of ``phi(r_i)``."""
    phi = get_phi(phi)
    r = np.asarray(r_values, dtype=float)
    if r.size == 0:
        raise InsufficientSamples("no ratio values")
    if np.any(r < 0):
        raise DomainError("ratio values must be non-negative")
    if np.any(r == 0) and not phi.bounded_at_zero():
        raise DomainError(f"{phi.kind} is unbounded at 0; floor the ratios first")
    vals = np.where(r == 0, phi.value_at_zero, phi.phi(np.where(r == 0, 1.0, r)))
    return float(vals.mean())


def theorem1_constant(phi, bounds: RatioBounds) -> float:
    """``2 max{phi(lo), phi(hi)} + phi'(hi) hi + phi'(hi) - 2 phi'(lo)``."""
    phi = get_phi(phi)
    lo, hi = bounds.c_lo, bounds.c_hi
    f_lo, f_hi = float(phi.phi(lo)), float(phi.phi(hi))
    d_lo, d_hi = float(phi.dphi(lo)), float(phi.dphi(hi))
    return 2.0 * max(f_lo, f_hi) + d_hi * hi + d_hi - 2.0 * d_lo


def choose_scale_a(phi, bounds: RatioBounds, kernel: KernelSpec) -> float:
    """Smallest ``a`` putting ``phi' o r / a`` in the unit ball for all admissible r.

    With the delta kernel the RKHS norm is the Euclidean norm over cells, so
    the bound is ``sqrt(#cells) * max |phi'|`` on ``[c_lo, c_hi]``; monotone
    ``phi'`` attains that max at an end point.
    """
    phi = get_phi(phi)
    slope = max(abs(float(phi.dphi(bounds.c_lo))), abs(float(phi.dphi(bounds.c_hi))))
    return max(np.sqrt(kernel.feature_dim) * slope, SCALE_FLOOR)


def dependency_bound(d_phi_n, mmd_n, a_n, c_const, t, n) -> DependencyReport:
    if n < 2:
        raise InsufficientSamples("n must be at least 2")
    if t < 0:
        raise ValueError("t must be positive")
    vals = (d_phi_n, mmd_n, a_n, c_const, t)
    if not all(np.isfinite(vals)):
        raise ValueError("bound inputs must be finite")
    upper = d_phi_n + a_n * mmd_n + c_const * np.sqrt(2.0 * t / n)
    return DependencyReport(
        d_phi_n=float(d_phi_n),
        mmd_n=float(mmd_n),
        a_n=float(a_n),
        c_const=float(c_const),
        t=float(t),
        n=int(n),
        upper_bound=float(upper),
    )


def estimate_dependency(
    phi,
    samples,
    kernel=None,
    bounds: RatioBounds | None = None,
    t=2.3,
    ridge=None,
    normalize=False,
    max_iter=20000,
    tol=1e-8,
) -> DependencyReport:
    """Ratio estimation, plug-in divergence and the bound in one pass.

    The reported bound holds with probability ``1 - e^-t`` only if the true
    ratio really lies inside ``bounds``; nothing here can check that.
    """
    phi = get_phi(phi)
    bounds = bounds or RatioBounds()
    v, y = as_pairs(samples, kernel)
    kernel = kernel or default_kernel(v, y)
    table = estimate_ratio(
        (v, y), kernel, ridge=ridge, normalize=normalize, clamp=bounds,
        max_iter=max_iter, tol=tol,
    )
    r = table.per_sample
    d = empirical_divergence(phi, r)
    mmd = empirical_mmd((v, y), r, kernel)
    a = choose_scale_a(phi, bounds, kernel)
    c = theorem1_constant(phi, bounds)
    return dependency_bound(d, mmd, a, c, t, v.size)


def u_statistic_diagnostic(phi, samples, true_ratio) -> float:
    """Centered term of the estimation-error decomposition; mean zero in expectation.

    ``(1/n) sum_i phi'(r_ii) r_ii - (1/(n(n-1))) sum_{i != j} phi'(r_ij)`` where
    ``r_ij`` is the true ratio at ``(v_i, yhat_j)``.
    """
    phi = get_phi(phi)
    ratio = np.asarray(true_ratio, dtype=float)
    if np.any(ratio <= 0):
        raise DomainError("true ratio must be strictly positive")
    v, y = as_pairs(samples)
    n = v.size
    if n < 2:
        raise InsufficientSamples("need at least 2 samples")
    d = phi.dphi(ratio)
    diag = d[v, y] * ratio[v, y]
    cv = np.bincount(v, minlength=ratio.shape[0]).astype(float)
    cy = np.bincount(y, minlength=ratio.shape[1]).astype(float)
    cross = cv @ d @ cy - d[v, y].sum()
    return float(diag.mean() - cross / (n * (n - 1)))

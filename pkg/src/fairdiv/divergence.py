"""Convex generators for f-divergences and exact divergences on finite tables.

Every generator is normalized so that ``phi(1) = 0`` and ``0`` lies in the
subdifferential at 1.  KL therefore uses ``(u - 1) - ln u`` rather than
``u ln u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import AbsoluteContinuityError, DomainError, ShapeError

PHI_NAMES = ("tv", "hellinger", "chi2", "kl")

_ALIASES = {
    "tv": "tv",
    "totalvariation": "tv",
    "total_variation": "tv",
    "hellinger": "hellinger",
    "chi2": "chi2",
    "chisquared": "chi2",
    "chi_squared": "chi2",
    "kl": "kl",
}


def _tv(u):
    return np.abs(u - 1.0)


def _tv_d(u):
    # sign(0) = 0 picks the zero element of the subdifferential at u = 1
    return np.sign(u - 1.0)


def _tv_conj(v):
    return np.maximum(v, -1.0)


def _hel(u):
    return (np.sqrt(u) - 1.0) ** 2


def _hel_d(u):
    with np.errstate(divide="ignore"):
        return 1.0 - 1.0 / np.sqrt(u)


def _hel_conj(v):
    return v / (1.0 - v)


def _chi2(u):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (u - 1.0) ** 2 / u
    return np.where(u == 0, np.inf, out)


def _chi2_d(u):
    with np.errstate(divide="ignore"):
        return 1.0 - 1.0 / u**2


def _chi2_conj(v):
    return 2.0 - 2.0 * np.sqrt(1.0 - v)


def _kl(u):
    with np.errstate(divide="ignore"):
        out = (u - 1.0) - np.log(u)
    return np.where(u == 0, np.inf, out)


def _kl_d(u):
    with np.errstate(divide="ignore"):
        return 1.0 - 1.0 / u


def _kl_conj(v):
    return -np.log1p(-v)


@dataclass(frozen=True)
class PhiGenerator:
    """A normalized convex generator together with its derivative and conjugate.

    ``conj_upper`` is the right end of the set where the conjugate is finite;
    ``conj_upper_closed`` says whether that end point itself is included.
    ``value_at_zero`` is the limit of phi as u -> 0+ (``inf`` when unbounded).
    """

    kind: str
    phi: Callable = field(repr=False)
    dphi: Callable = field(repr=False)
    conj: Callable = field(repr=False)
    conj_upper: float = 1.0
    conj_upper_closed: bool = False
    value_at_zero: float = np.inf

    @property
    def conj_domain(self):
        return (-np.inf, self.conj_upper)

    def in_conj_domain(self, v):
        v = np.asarray(v, dtype=float)
        if self.conj_upper_closed:
            return v <= self.conj_upper
        return v < self.conj_upper

    def bounded_at_zero(self):
        return np.isfinite(self.value_at_zero)


_GENERATORS = {
    "tv": PhiGenerator("tv", _tv, _tv_d, _tv_conj, 1.0, True, 1.0),
    "hellinger": PhiGenerator("hellinger", _hel, _hel_d, _hel_conj, 1.0, False, 1.0),
    "chi2": PhiGenerator("chi2", _chi2, _chi2_d, _chi2_conj, 1.0, True, np.inf),
    "kl": PhiGenerator("kl", _kl, _kl_d, _kl_conj, 1.0, False, np.inf),
}


def get_phi(name) -> PhiGenerator:
    """Look up a generator by name (``tv``, ``hellinger``, ``chi2``, ``kl``)."""
    if isinstance(name, PhiGenerator):
        return name
    key = _ALIASES.get(str(name).strip().lower().replace("-", "_"))
    if key is None:
        raise ValueError(f"unknown phi {name!r}; expected one of {PHI_NAMES}")
    return _GENERATORS[key]


def _positive(u):
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("generator argument must be strictly positive")
    return arr


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def phi_eval(phi, u):
    phi = get_phi(phi)
    return _scalar_or_array(phi.phi(_positive(u)))


def phi_subgradient(phi, u):
    """Chosen element of the subdifferential; 0 at u = 1 for every generator."""
    phi = get_phi(phi)
    return _scalar_or_array(phi.dphi(_positive(u)))


def phi_conjugate(phi, v):
    """Convex conjugate ``sup_{u >= 0} (u v - phi(u))``; ``inf`` off its domain."""
    phi = get_phi(phi)
    v = np.asarray(v, dtype=float)
    ok = phi.in_conj_domain(v)
    safe = np.where(ok, v, 0.0)
    out = np.where(ok, phi.conj(safe), np.inf)
    return _scalar_or_array(out)


def conjugate_maximizer(phi, v):
    """A point ``u`` attaining the supremum in the conjugate (for ``v`` in the domain)."""
    phi = get_phi(phi)
    v = np.asarray(v, dtype=float)
    if np.any(~phi.in_conj_domain(v)):
        raise DomainError("v outside the conjugate domain")
    if phi.kind == "tv":
        out = np.where(v < -1.0, 0.0, 1.0)
    elif phi.kind == "kl":
        out = 1.0 / (1.0 - v)
    elif phi.kind == "hellinger":
        out = 1.0 / (1.0 - v) ** 2
    else:
        # sup is approached but not attained at v = 1
        with np.errstate(divide="ignore"):
            out = 1.0 / np.sqrt(1.0 - v)
    return _scalar_or_array(out)


@dataclass(frozen=True)
class RatioBounds:
    c_lo: float = 0.1
    c_hi: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.c_lo <= 1.0 <= self.c_hi < np.inf):
            raise ValueError(
                f"need 0 < c_lo <= 1 <= c_hi < inf, got ({self.c_lo}, {self.c_hi})"
            )

    @classmethod
    def symmetric(cls, t):
        """Bounds ``(e^-t, e^t)``."""
        return cls(float(np.exp(-t)), float(np.exp(t)))


class DiscreteJoint:
    """Probability table over ``V x Y`` (rows: viewpoints, columns: labels)."""

    def __init__(self, pmf, atol=1e-12):
        pmf = np.array(pmf, dtype=float)
        if pmf.ndim == 1:
            pmf = pmf[None, :]
        if pmf.ndim != 2:
            raise ShapeError("pmf must be a 2-d table")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ValueError("pmf entries must be finite and non-negative")
        if abs(pmf.sum() - 1.0) > atol:
            raise ValueError(f"pmf sums to {pmf.sum()!r}, not 1")
        pmf.setflags(write=False)
        self.pmf = pmf

    @property
    def shape(self):
        return self.pmf.shape

    def marginal_v(self):
        return self.pmf.sum(axis=1)

    def marginal_y(self):
        return self.pmf.sum(axis=0)

    def product_of_marginals(self):
        return DiscreteJoint(np.outer(self.marginal_v(), self.marginal_y()), atol=1e-9)

    def ratio(self):
        """True probability ratio ``P_V x P_Y / P_VY`` per cell."""
        prod = np.outer(self.marginal_v(), self.marginal_y())
        with np.errstate(divide="ignore", invalid="ignore"):
            return prod / self.pmf

    def __repr__(self):
        return f"DiscreteJoint({self.pmf.tolist()!r})"


def _table(x):
    return x.pmf if isinstance(x, DiscreteJoint) else np.asarray(x, dtype=float)


def exact_f_divergence(phi, P, Q) -> float:
    """``sum_cells Q * phi(P / Q)`` by direct enumeration."""
    phi = get_phi(phi)
    p, q = _table(P), _table(Q)
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    if np.any((q == 0) & (p > 0)):
        raise AbsoluteContinuityError("Q vanishes on a cell where P is positive")
    live = q > 0
    u = p[live] / q[live]
    vals = np.empty_like(u)
    zero = u == 0
    vals[~zero] = phi.phi(u[~zero])
    vals[zero] = phi.value_at_zero
    return float(np.sum(q[live] * vals))


def exact_dependency(phi, joint) -> float:
    """Divergence of the product of marginals from the joint itself."""
    if not isinstance(joint, DiscreteJoint):
        joint = DiscreteJoint(joint)
    if np.any(joint.pmf <= 0):
        raise AbsoluteContinuityError("joint must be strictly positive on every cell")
    return exact_f_divergence(phi, joint.product_of_marginals(), joint)

"""Linear multiclass scorer trained under an empirical dependency budget.

Predictions are relaxed to per-sample label distributions ``gamma`` (rows on
the probability simplex).  The fairness functional of ``gamma`` is

    C(gamma) = min_{r >= 0}  sum_c w_c phi(r_c) + a || q - w * r ||

over the ``(v, label)`` cells, where ``w`` is the soft joint mass and ``q``
the U-statistic estimate of the product of marginals.  Substituting
``u = w * r`` gives a jointly convex program whose dual is

    C(gamma) = max_{||g|| <= a}  g . q - w . phi*(g),

a maximum of functions linear in ``gamma``.  Both forms are used below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import logsumexp, softmax

from .dependency import choose_scale_a
from .divergence import PhiGenerator, RatioBounds, get_phi, phi_conjugate
from .exceptions import (
    ConvergenceError,
    DomainError,
    EmptyDataset,
    InfeasibleBudget,
    ShapeError,
)
from .ratio import KernelSpec

# -- scorer --------------------------------------------------------------------


@dataclass
class LinearScorer:
    """``score(x, y) = <weights[y], (x, 1)>``; prediction is the argmax."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @classmethod
    def zeros(cls, n_classes, dim):
        return cls(np.zeros((n_classes, dim + 1)))

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1] - 1

    def design(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ShapeError(f"expected {self.dim} features, got {X.shape[1]}")
        return np.column_stack([X, np.ones(len(X))])

    def scores(self, X):
        return self.design(X) @ self.weights.T

    def predict(self, X):
        # np.argmax returns the first maximum: ties go to the lowest class
        return np.argmax(self.scores(X), axis=1)

    # model file: "<n_classes> <dim>" then one row of weights per class
    def dumps(self):
        lines = [f"{self.n_classes} {self.dim}"]
        lines += [" ".join(repr(float(x)) for x in row) for row in self.weights]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty model file")
        try:
            c, d = (int(tok) for tok in lines[0].split())
            rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
        except ValueError as exc:
            raise ValueError(f"malformed model file: {exc}") from None
        if len(rows) != c or any(len(r) != d + 1 for r in rows):
            raise ValueError(f"model file header says {c}x{d + 1} weights")
        return cls(np.array(rows))


def predict(scorer: LinearScorer, x):
    """Label index for one input vector (or an array of rows)."""
    out = scorer.predict(x)
    return int(out[0]) if np.ndim(x) == 1 else out


def empirical_risk(scorer: LinearScorer, X, y) -> float:
    """Mean multiclass logistic loss."""
    y = np.asarray(y, dtype=int)
    if y.size == 0:
        raise EmptyDataset("empirical risk of an empty dataset")
    S = scorer.scores(X)
    return float(np.mean(logsumexp(S, axis=1) - S[np.arange(y.size), y]))


# -- simplex helpers -----------------------------------------------------------


def project_simplex(Y):
    """Euclidean projection of each row onto the probability simplex."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, c = Y.shape
    U = -np.sort(-Y, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, c + 1)
    cond = U - css / ind > 0
    rho = c - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(Y - theta[:, None], 0.0)


def check_gamma(gamma, atol=1e-9):
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    if np.any(gamma < -atol) or np.any(np.abs(gamma.sum(axis=1) - 1.0) > atol):
        raise ValueError("gamma rows must lie in the probability simplex")
    return gamma


# -- fairness functional -------------------------------------------------------


def soft_tables(gamma, viewpoints, n_v, counts=None):
    """Cell masses ``(q, w)`` of shape ``(n_v, c)`` for relaxed predictions.

    ``counts`` optionally gives a multiplicity per row, so grouped rows can
    stand in for repeated samples.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    v = np.asarray(viewpoints, dtype=int)
    rows, c = gamma.shape
    if v.shape != (rows,):
        raise ShapeError("one viewpoint per row of gamma")
    mult = np.ones(rows) if counts is None else np.asarray(counts, dtype=float)
    n = mult.sum()
    if n < 2:
        raise ValueError("need at least 2 samples")
    m = np.zeros((n_v, c))
    np.add.at(m, v, gamma * mult[:, None])
    nv = np.bincount(v, weights=mult, minlength=n_v)
    s = mult @ gamma
    q = (np.outer(nv, s) - m) / (n * (n - 1))
    return q, m / n


def _largest_cubic_root(b, c, d):
    """Largest real root of ``x^3 + b x^2 + c x + d`` (vectorized)."""
    P = c - b * b / 3.0
    R = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (R / 2.0) ** 2 + (P / 3.0) ** 3
    out = np.empty_like(b)
    pos = disc >= 0
    sq = np.sqrt(np.where(pos, disc, 0.0))
    out[pos] = (np.cbrt(-R / 2.0 + sq) + np.cbrt(-R / 2.0 - sq))[pos]
    neg = ~pos
    if np.any(neg):
        Pn, Rn = P[neg], R[neg]
        m = 2.0 * np.sqrt(-Pn / 3.0)
        arg = np.clip(3.0 * Rn / (Pn * m), -1.0, 1.0)
        out[neg] = m * np.cos(np.arccos(arg) / 3.0)
    return out - b / 3.0


def _prox(phi: PhiGenerator, q, w, tau):
    """Per-cell ``argmin_u  h(u) + (u - q)^2 / (2 tau)`` with ``h`` the perspective of phi."""
    u = np.empty_like(q)
    empty = w <= 0
    u[empty] = np.maximum(q[empty] - tau, 0.0)  # recession slope of every generator is 1
    live = ~empty
    qq, ww = q[live], w[live]
    if phi.kind == "tv":
        diff = qq - ww
        uu = np.where(np.abs(diff) > tau, qq - tau * np.sign(diff), ww)
    elif phi.kind == "kl":
        b = qq - tau
        uu = 0.5 * (b + np.sqrt(b * b + 4.0 * tau * ww))
    elif phi.kind == "hellinger":
        s = _largest_cubic_root(np.zeros_like(qq), tau - qq, -tau * np.sqrt(ww))
        uu = s * s
    else:
        uu = _largest_cubic_root(tau - qq, np.zeros_like(qq), -tau * ww * ww)
    if phi.kind in ("hellinger", "chi2"):
        # Newton polish inside the bracket [min(q, w), max(q, w)]
        lo, hi = np.minimum(qq, ww), np.maximum(qq, ww)
        uu = np.clip(uu, lo, hi)
        for _ in range(3):
            uu = np.maximum(uu, 1e-300)
            f = phi.dphi(uu / ww) + (uu - qq) / tau
            if phi.kind == "hellinger":
                fp = 0.5 / (np.sqrt(ww) * uu**1.5) * ww + 1.0 / tau
            else:
                fp = 2.0 * ww**2 / uu**3 + 1.0 / tau
            uu = np.clip(uu - f / fp, lo, hi)
    u[live] = uu
    return u


def _perspective(phi: PhiGenerator, u, w):
    out = np.empty_like(u)
    empty = w <= 0
    out[empty] = u[empty]
    live = ~empty
    r = u[live] / w[live]
    vals = np.where(r > 0, phi.phi(np.where(r > 0, r, 1.0)), phi.value_at_zero)
    out[live] = w[live] * vals
    return out


def _slope(phi: PhiGenerator, u, w):
    """Derivative of the perspective in ``u`` (min-norm choice at kinks)."""
    out = np.ones_like(u)
    empty = w <= 0
    out[empty & (u <= 0)] = 0.0
    live = ~empty
    with np.errstate(divide="ignore"):
        out[live] = phi.dphi(u[live] / w[live])
    return out


@dataclass(frozen=True)
class FairnessSolution:
    value: float
    g: np.ndarray  # dual table, ||g|| <= a
    u: np.ndarray  # reweighted mass w * r
    q: np.ndarray
    w: np.ndarray
    a: float

    @property
    def ratio(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.w > 0, self.u / self.w, 1.0)

    @property
    def residual(self):
        return float(np.linalg.norm(self.q - self.u))


def solve_fairness(q, w, phi, a, xtol=1e-15) -> FairnessSolution:
    """Exact minimization over the ratio table for given cell masses."""
    phi = get_phi(phi)
    shape = np.shape(q)
    q = np.asarray(q, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if a <= 0:
        raise ValueError("scale a must be positive")
    g0 = _slope(phi, q, w)
    if np.all(np.isfinite(g0)) and np.linalg.norm(g0) <= a:
        u, t, g = q.copy(), 0.0, g0
    else:
        T = float(np.linalg.norm(q - np.where(w > 0, w, 0.0)))

        def gap(t):
            return np.linalg.norm(q - _prox(phi, q, w, t / a)) - t

        lo = T * 1e-12
        if T <= 0 or gap(T) >= 0:
            t = T
        elif gap(lo) <= 0:
            t = lo
        else:
            try:
                t = brentq(gap, lo, T, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
            except (ValueError, RuntimeError) as exc:
                raise ConvergenceError(f"inner fairness solve failed: {exc}") from exc
        u = _prox(phi, q, w, t / a)
        g = a * (q - u) / t if t > 0 else np.zeros_like(q)
    value = float(np.sum(_perspective(phi, u, w)) + a * np.linalg.norm(q - u))
    return FairnessSolution(value, g.reshape(shape), u.reshape(shape), q.reshape(shape),
                            w.reshape(shape), float(a))


def _n_v(viewpoints, kernel):
    if kernel is not None:
        return kernel.n_v
    return int(np.max(viewpoints)) + 1


def fairness_functional(gamma, viewpoints, phi, kernel=None, a_n=None) -> float:
    """Value of the relaxed empirical dependency constraint at ``gamma``."""
    return fairness_solution(gamma, viewpoints, phi, kernel, a_n).value


def fairness_solution(gamma, viewpoints, phi, kernel=None, a_n=None) -> FairnessSolution:
    gamma = check_gamma(gamma, atol=1e-6)
    phi = get_phi(phi)
    n_v = _n_v(viewpoints, kernel)
    if a_n is None:
        kernel = kernel or KernelSpec(n_v, gamma.shape[1])
        a_n = choose_scale_a(phi, RatioBounds(), kernel)
    q, w = soft_tables(gamma, viewpoints, n_v)
    return solve_fairness(q, w, phi, a_n)


def _capped_conjugate(phi, g):
    """``phi*(g)`` with values at an open domain end replaced by a large finite value."""
    if not phi.conj_upper_closed:
        g = np.minimum(g, phi.conj_upper - 1e-9)
    return phi_conjugate(phi, g)


def _subgradient_from(sol: FairnessSolution, viewpoints, phi, n, counts=None):
    v = np.asarray(viewpoints, dtype=int)
    mult = None if counts is None else np.asarray(counts, dtype=float)
    nv = np.bincount(v, weights=mult, minlength=sol.g.shape[0])
    g = sol.g
    cross = (nv @ g)[None, :] - g[v]
    out = cross / (n * (n - 1)) - np.atleast_2d(_capped_conjugate(phi, g[v])) / n
    return out if mult is None else out * mult[:, None]


def fairness_subgradient(gamma, viewpoints, phi, kernel=None, a_n=None, parts=False):
    """Gradient of the fairness functional in ``gamma`` at the optimal inner solution.

    With ``parts=True`` returns ``(phi_part, mmd_part)`` from
    :func:`subgradient_parts`; they sum to the full gradient.
    """
    phi = get_phi(phi)
    gamma = check_gamma(gamma, atol=1e-6)
    sol = fairness_solution(gamma, viewpoints, phi, kernel, a_n)
    if parts:
        return subgradient_parts(sol, viewpoints, phi)
    return _subgradient_from(sol, viewpoints, phi, gamma.shape[0])


def subgradient_parts(sol: FairnessSolution, viewpoints, phi):
    """Derivatives of the divergence term and of ``a * ||residual||`` with the
    ratio table and the residual direction of ``sol`` held fixed."""
    phi = get_phi(phi)
    v = np.asarray(viewpoints, dtype=int)
    n = v.size
    r = sol.ratio
    zeta = sol.g / sol.a
    nv = np.bincount(v, minlength=r.shape[0]).astype(float)
    rv = r[v]
    vals = np.where(rv > 0, phi.phi(np.where(rv > 0, rv, 1.0)), phi.value_at_zero)
    phi_part = vals / n
    mmd_part = sol.a * (
        ((nv @ zeta)[None, :] - zeta[v]) / (n * (n - 1)) - zeta[v] * rv / n
    )
    return phi_part, mmd_part


def conjugate_dual_value(gamma, g, viewpoints, phi, a_n) -> float:
    """Dual objective with the quadratic term entering negatively; a lower bound on C."""
    phi = get_phi(phi)
    gamma = check_gamma(gamma, atol=1e-6)
    g = np.asarray(g, dtype=float)
    if np.any(~phi.in_conj_domain(g)):
        raise DomainError("g outside the domain of the conjugate")
    q, w = soft_tables(gamma, viewpoints, g.shape[0])
    return float(np.sum(g * q) - np.sum(w * phi_conjugate(phi, g)) - np.sum(g * g) / (2 * a_n))


# -- training ------------------------------------------------------------------


SOLVERS = ("auto", "grouped", "subgradient")


@dataclass
class TrainConfig:
    eta: float = math.inf
    phi: str = "hellinger"
    kernel: str = "delta"
    bounds: RatioBounds = field(default_factory=RatioBounds)
    penalty_rho: float = 1.0
    coupling_rho: float = 10.0
    step_size: float = 0.1
    max_outer_iters: int = 3000
    tol: float = 1e-3
    check_every: int = 100
    solver: str = "auto"
    max_groups: int = 64

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be >= 0")
        for name in ("penalty_rho", "coupling_rho", "step_size", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer_iters < 1 or self.check_every < 1:
            raise ValueError("iteration counts must be positive")
        get_phi(self.phi)
        if self.kernel not in ("delta", "productdelta"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")


@dataclass(frozen=True)
class TrainedModel:
    scorer: LinearScorer
    gamma: np.ndarray
    achieved_fairness: float
    empirical_risk: float
    history: list = field(repr=False)
    a_n: float = 1.0
    iterations: int = 0

    def predict(self, X):
        return self.scorer.predict(X)


def _coupling(S, gamma):
    """Hinge ``sum_j max(0, max_{k != j} S_ik - S_ij + gamma_ij) / n`` and its gradients."""
    n, c = S.shape
    rows = np.arange(n)
    top = np.argmax(S, axis=1)
    S2 = S.copy()
    S2[rows, top] = -np.inf
    second = np.argmax(S2, axis=1)
    other = np.where(np.arange(c)[None, :] == top[:, None], second[:, None], top[:, None])
    H = S[rows[:, None], other] - S + gamma
    active = (H > 0).astype(float)
    value = float(np.sum(H * active) / n)
    gS = -active / n
    np.add.at(gS, (np.repeat(rows, c), other.ravel()), active.ravel() / n)
    return value, gS, active / n


def penalized_objective(theta, gamma, X, y, viewpoints, config: TrainConfig, a_n,
                        penalty_rho=None, n_v=None):
    """``R_n + coupling_rho * hinge + penalty_rho * max(0, C(gamma) - eta)``."""
    scorer = LinearScorer(theta)
    S = scorer.scores(X)
    risk = float(np.mean(logsumexp(S, axis=1) - S[np.arange(len(y)), y]))
    coup, _, _ = _coupling(S, gamma)
    n_v = n_v or int(np.max(viewpoints)) + 1
    q, w = soft_tables(gamma, viewpoints, n_v)
    C = solve_fairness(q, w, config.phi, a_n).value
    rho = config.penalty_rho if penalty_rho is None else penalty_rho
    excess = max(0.0, C - config.eta) if math.isfinite(config.eta) else 0.0
    return risk + config.coupling_rho * coup + rho * excess


def train(X, y, viewpoints, config: TrainConfig, n_classes=None, n_v=None) -> TrainedModel:
    """Fit a scorer minimizing risk plus coupling subject to ``C(gamma) <= eta``.

    Rows sharing the same input and viewpoint can share one ``gamma`` row
    without changing the optimum (the problem is convex and symmetric in
    them).  ``solver="grouped"`` exploits this and solves the resulting small
    smooth program with SLSQP; ``"subgradient"`` runs the exact-penalty
    projected subgradient method on all rows; ``"auto"`` picks the grouped
    solver when there are at most ``max_groups`` distinct rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    v = np.asarray(viewpoints, dtype=int)
    n = y.size
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if n < 2:
        raise ValueError("need at least 2 samples")
    if X.ndim != 2 or X.shape[0] != n or v.shape != (n,):
        raise ShapeError("X, y and viewpoints must have the same number of rows")
    if y.min() < 0 or v.min() < 0:
        raise ValueError("labels and viewpoints must be non-negative")
    phi = get_phi(config.phi)
    c = n_classes or int(y.max()) + 1
    n_v = n_v or int(v.max()) + 1
    if c < 2:
        raise ValueError("need at least 2 classes")
    kernel = KernelSpec(n_v, c, config.kernel)
    a_n = choose_scale_a(phi, config.bounds, kernel)
    Psi = np.column_stack([X, np.ones(n)])

    keys, inv = np.unique(np.column_stack([Psi, v]), axis=0, return_inverse=True)
    inv = inv.ravel()
    solver = config.solver
    if solver == "auto":
        solver = "grouped" if len(keys) <= config.max_groups else "subgradient"
    if solver == "grouped":
        return _train_grouped(Psi, y, v, keys, inv, config, phi, c, n_v, a_n)
    return _train_subgradient(Psi, y, v, config, phi, c, n_v, a_n)


def _finish(best, best_any, history, a_n, config):
    if best is None:
        C, th, gm, risk = best_any
        model = TrainedModel(LinearScorer(th), gm, C, risk, history, a_n, len(history))
        raise InfeasibleBudget(
            f"no iterate met eta={config.eta} (best fairness {C:.6g})",
            best_fairness=C,
            best_risk=risk,
            model=model,
        )
    _, th, gm, C, risk = best
    return TrainedModel(LinearScorer(th), gm, C, risk, history, a_n, len(history))


def _train_grouped(Psi, y, v, keys, inv, config, phi, c, n_v, a_n):
    n, p = Psi.shape
    G = len(keys)
    Pg = keys[:, :p]
    vg = keys[:, p].astype(int)
    counts = np.bincount(inv, minlength=G).astype(float)
    label_counts = np.zeros((G, c))
    np.add.at(label_counts, (inv, y), 1.0)
    nt, ng = c * p, G * c
    constrained = math.isfinite(config.eta)
    rho_c = config.coupling_rho

    def unpack(z):
        return z[:nt].reshape(c, p), z[nt:nt + ng].reshape(G, c), z[nt + ng:].reshape(G, c)

    def risk_of(theta):
        S = Pg @ theta.T
        lse = logsumexp(S, axis=1)
        return float(np.sum(label_counts * (lse[:, None] - S)) / n), S, lse

    def objective(z):
        theta, _, xi = unpack(z)
        risk, _, _ = risk_of(theta)
        return risk + rho_c * float(counts @ xi.sum(axis=1)) / n

    def objective_grad(z):
        theta, _, _ = unpack(z)
        _, S, lse = risk_of(theta)
        gS = (counts[:, None] * np.exp(S - lse[:, None]) - label_counts) / n
        out = np.zeros_like(z)
        out[:nt] = (gS.T @ Pg).ravel()
        out[nt + ng:] = np.repeat(rho_c * counts / n, c)
        return out

    # xi_gj - (S_gk - S_gj) - gamma_gj >= 0 for every k != j
    rows = []
    for g_, j, k in ((g_, j, k) for g_ in range(G) for j in range(c) for k in range(c) if k != j):
        row = np.zeros(nt + 2 * ng)
        row[k * p:(k + 1) * p] -= Pg[g_]
        row[j * p:(j + 1) * p] += Pg[g_]
        row[nt + g_ * c + j] = -1.0
        row[nt + ng + g_ * c + j] = 1.0
        rows.append(row)
    A_hinge = np.array(rows)
    A_simplex = np.zeros((G, nt + 2 * ng))
    for g_ in range(G):
        A_simplex[g_, nt + g_ * c: nt + (g_ + 1) * c] = 1.0

    def fairness(gamma):
        q, w = soft_tables(gamma, vg, n_v, counts)
        return solve_fairness(q, w, phi, a_n)

    constraints = [
        {"type": "ineq", "fun": lambda z: A_hinge @ z, "jac": lambda z: A_hinge},
        {"type": "eq", "fun": lambda z: A_simplex @ z - 1.0, "jac": lambda z: A_simplex},
    ]
    if constrained:
        def budget(z):
            return np.array([config.eta - fairness(np.clip(unpack(z)[1], 0, 1)).value])

        def budget_jac(z):
            gamma = np.clip(unpack(z)[1], 0, 1)
            sol = fairness(gamma)
            out = np.zeros((1, z.size))
            out[0, nt:nt + ng] = -_subgradient_from(sol, vg, phi, n, counts).ravel()
            return out

        constraints.append({"type": "ineq", "fun": budget, "jac": budget_jac})

    theta0 = np.zeros((c, p))
    gamma0 = np.full((G, c), 1.0 / c)
    xi0 = np.full((G, c), 1.0 / c)
    z0 = np.concatenate([theta0.ravel(), gamma0.ravel(), xi0.ravel()])
    bounds = [(None, None)] * nt + [(0.0, 1.0)] * ng + [(0.0, None)] * ng

    history = []
    best = None
    best_any = None

    def record(z):
        nonlocal best, best_any
        theta, gamma, _ = unpack(z)
        gamma = project_simplex(np.clip(gamma, 0, 1))
        risk, S, _ = risk_of(theta)
        gamma_rows = gamma[inv]
        coup, _, _ = _coupling(Psi @ theta.T, gamma_rows)
        C = fairness(gamma).value
        obj = risk + rho_c * coup
        history.append((obj, C, risk))
        if (not constrained) or C <= config.eta + config.tol:
            if best is None or obj < best[0]:
                best = (obj, theta.copy(), gamma_rows, C, risk)
        if best_any is None or C < best_any[0]:
            best_any = (C, theta.copy(), gamma_rows, risk)

    record(z0)
    res = minimize(
        objective, z0, jac=objective_grad, method="SLSQP", bounds=bounds,
        constraints=constraints, callback=record,
        options={"maxiter": config.max_outer_iters, "ftol": 1e-12},
    )
    record(res.x)
    return _finish(best, best_any, history, a_n, config)


def _train_subgradient(Psi, y, v, config, phi, c, n_v, a_n):
    """Projected subgradient descent on the exact-penalty objective.

    ``gamma`` steps are scaled by ``n`` because each row only enters the
    objective through ``1/n``-weighted terms.  The penalty weight doubles at
    each check where the budget is still violated.  The best iterate meeting
    ``C(gamma) <= eta + tol`` is returned.
    """
    n = y.size
    constrained = math.isfinite(config.eta)
    Y1 = np.zeros((n, c))
    Y1[np.arange(n), y] = 1.0
    theta = np.zeros((c, Psi.shape[1]))
    gamma = softmax(Psi @ theta.T, axis=1)
    rho = config.penalty_rho

    best = None  # (objective, theta, gamma, fairness, risk)
    best_any = None  # (fairness, theta, gamma, risk) lowest fairness seen
    history = []
    for k in range(1, config.max_outer_iters + 1):
        S = Psi @ theta.T
        lse = logsumexp(S, axis=1)
        risk = float(np.mean(lse - S[np.arange(n), y]))
        gS = (np.exp(S - lse[:, None]) - Y1) / n
        coup, cS, cG = _coupling(S, gamma)
        q, w = soft_tables(gamma, v, n_v)
        sol = solve_fairness(q, w, phi, a_n)
        C = sol.value
        obj = risk + config.coupling_rho * coup
        history.append((obj + (rho * max(0.0, C - config.eta) if constrained else 0.0), C, risk))

        feasible = (not constrained) or C <= config.eta + config.tol
        if feasible and (best is None or obj < best[0]):
            best = (obj, theta.copy(), gamma.copy(), C, risk)
        if best_any is None or C < best_any[0]:
            best_any = (C, theta.copy(), gamma.copy(), risk)

        g_theta = (gS + config.coupling_rho * cS).T @ Psi
        g_gamma = config.coupling_rho * cG
        if constrained and C > config.eta:
            g_gamma = g_gamma + rho * _subgradient_from(sol, v, phi, n)
        step = config.step_size / math.sqrt(k)
        theta = theta - step * g_theta
        gamma = project_simplex(gamma - step * n * g_gamma)

        if constrained and k % config.check_every == 0 and C > config.eta + config.tol:
            rho = min(rho * 2.0, 1e8)

    return _finish(best, best_any, history, a_n, config)


def train_dataset(dataset, config: TrainConfig, n_classes=None, n_v=None) -> TrainedModel:
    return train(dataset.X, dataset.y, dataset.v, config, n_classes=n_classes, n_v=n_v)

"""Seeded synthetic scenarios with exact dependency oracles.

The discrete scenario puts all mass on a finite grid of non-sensitive
features ``w``, so the law of ``(v, prediction)`` for any linear scorer is
obtained by enumerating grid cells.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .divergence import DiscreteJoint, exact_dependency
from .exceptions import ShapeError

#: per-cell floor keeping scenario tables strictly positive
CELL_FLOOR = 0.01
#: floor (relative to CELL_FLOOR) for prediction joints
JOINT_FLOOR = CELL_FLOOR * 1e-3


@dataclass
class Dataset:
    v: np.ndarray
    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=int)
        self.y = np.asarray(self.y, dtype=int)
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim == 1:
            self.w = self.w[:, None]
        n = self.v.size
        if n < 1:
            raise ValueError("a dataset needs at least one row")
        if self.y.shape != (n,) or self.w.shape[0] != n:
            raise ShapeError("v, w and y must have the same number of rows")
        if self.v.min() < 0 or self.y.min() < 0:
            raise ValueError("indices must be non-negative")

    @property
    def n(self):
        return self.v.size

    @property
    def X(self):
        """Scorer inputs: viewpoint as the first column, then ``w``."""
        return np.column_stack([self.v.astype(float), self.w])

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.w, other.w)
        )


def _norm(p):
    p = np.maximum(p, 0)
    return p / p.sum()


@dataclass
class DiscreteScenario:
    """Joint law over ``(v, w, y)`` with ``w`` on a finite grid.

    ``pmf[v, k, y]`` is the mass of viewpoint ``v``, grid point
    ``w_grid[k]`` and label ``y``.
    """

    pmf: np.ndarray
    w_grid: np.ndarray
    dependency_knob: float = 0.0

    def __post_init__(self):
        self.pmf = np.asarray(self.pmf, dtype=float)
        self.w_grid = np.asarray(self.w_grid, dtype=float)
        if self.w_grid.ndim == 1:
            self.w_grid = self.w_grid[:, None]
        if self.pmf.ndim != 3 or self.pmf.shape[1] != self.w_grid.shape[0]:
            raise ShapeError("pmf must be (|V|, |W|, |Y|) matching the grid")
        if np.any(self.pmf <= 0):
            raise ValueError("scenario cells must be strictly positive")
        if abs(self.pmf.sum() - 1.0) > 1e-12:
            raise ValueError("scenario pmf must sum to 1")

    @property
    def n_v(self):
        return self.pmf.shape[0]

    @property
    def n_y(self):
        return self.pmf.shape[2]

    @property
    def dim(self):
        """Dimension of the scorer input ``x = (v, w)``."""
        return 1 + self.w_grid.shape[1]

    def vy_joint(self):
        return DiscreteJoint(self.pmf.sum(axis=1), atol=1e-9)

    def cell_inputs(self):
        """All ``(v, w)`` grid inputs and their masses, summed over labels."""
        vs, ks = np.meshgrid(np.arange(self.n_v), np.arange(len(self.w_grid)), indexing="ij")
        X = np.column_stack([vs.ravel().astype(float), self.w_grid[ks.ravel()]])
        mass = self.pmf.sum(axis=2).ravel()
        return vs.ravel(), X, mass

    def relabel(self, perm):
        """Scenario with label ``y`` renamed to ``perm[y]``."""
        perm = np.asarray(perm)
        pmf = np.empty_like(self.pmf)
        pmf[:, :, perm] = self.pmf
        return DiscreteScenario(pmf, self.w_grid, self.dependency_knob)

    @classmethod
    def binary(
        cls,
        dependency_knob=0.8,
        label_agreement=0.85,
        proxy_agreement=0.8,
        v_prior=(0.5, 0.5),
    ):
        """Two viewpoints, two labels, binary features ``w = (w_label, w_proxy)``.

        ``P(y = v) = (1 + knob) / 2``; ``w_label`` matches ``y`` with
        probability ``label_agreement``; ``w_proxy`` matches ``v`` with
        probability ``proxy_agreement`` (the red-lining channel).  ``P(y | v)``
        is floored at ``CELL_FLOOR`` so every cell stays positive.
        """
        if not 0.0 <= dependency_knob <= 1.0:
            raise ValueError("dependency_knob must lie in [0, 1]")
        pv = _norm(np.asarray(v_prior, dtype=float))
        same = 0.5 * (1.0 + dependency_knob)
        py_v = _floor_rows(np.array([[same, 1 - same], [1 - same, same]]))
        la, pa = label_agreement, proxy_agreement
        grid = np.array(list(itertools.product([0.0, 1.0], repeat=2)))
        pmf = np.zeros((2, 4, 2))
        for v, (k, (wl, wp)), y in itertools.product(range(2), enumerate(grid), range(2)):
            p_wl = la if wl == y else 1 - la
            p_wp = pa if wp == v else 1 - pa
            pmf[v, k, y] = pv[v] * py_v[v, y] * p_wl * p_wp
        return cls(pmf / pmf.sum(), grid, dependency_knob)

    @classmethod
    def random(cls, n_v=2, n_y=2, grid_size=6, dim_w=2, dependency_knob=0.5, seed=0):
        """Random grid scenario; ``knob = 0`` gives an exact product ``P_V x P_Y``."""
        rng = np.random.default_rng(seed)
        grid = rng.normal(size=(grid_size, dim_w)).round(3)
        pv = rng.dirichlet(np.full(n_v, 5.0))
        py = rng.dirichlet(np.full(n_y, 5.0))
        target = np.zeros((n_v, n_y))
        target[np.arange(n_v), np.arange(n_v) % n_y] = 1.0
        py_v = _floor_rows((1 - dependency_knob) * py[None, :] + dependency_knob * target)
        pw = rng.dirichlet(np.full(grid_size, 2.0), size=(n_v, n_y))
        pmf = pv[:, None, None] * py_v[:, None, :] * np.transpose(pw, (0, 2, 1))
        return cls(pmf / pmf.sum(), grid, dependency_knob)


def _floor_rows(py_v):
    """Floor the label-given-viewpoint table at ``CELL_FLOOR``.

    Identical rows stay identical, so a product table is left a product.
    """
    out = np.maximum(py_v, CELL_FLOOR)
    return out / out.sum(axis=1, keepdims=True)


@dataclass
class GaussianScenario:
    """Continuous-feature stress scenario: ``w | v, y ~ N(mean[v, y], diag(var))``."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise ValueError("mixing weights must be a probability table")
        if self.means.shape[:2] != self.weights.shape:
            raise ShapeError("means must be indexed by (v, y)")

    @property
    def n_v(self):
        return self.weights.shape[0]

    @property
    def n_y(self):
        return self.weights.shape[1]

    @property
    def dim(self):
        return 1 + self.means.shape[2]


def generate(scenario, n, seed) -> Dataset:
    """``n`` iid rows; identical ``(scenario, n, seed)`` gives identical data."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if isinstance(scenario, DiscreteScenario):
        flat = scenario.pmf.ravel()
        idx = rng.choice(flat.size, size=n, p=flat / flat.sum())
        v, k, y = np.unravel_index(idx, scenario.pmf.shape)
        return Dataset(v, scenario.w_grid[k], y)
    if isinstance(scenario, GaussianScenario):
        flat = scenario.weights.ravel()
        idx = rng.choice(flat.size, size=n, p=flat / flat.sum())
        v, y = np.unravel_index(idx, scenario.weights.shape)
        noise = rng.normal(size=(n, scenario.means.shape[2])) * np.sqrt(scenario.variances)
        return Dataset(v, scenario.means[v, y] + noise, y)
    raise TypeError(f"unsupported scenario {type(scenario).__name__}")


def prediction_joint(scenario: DiscreteScenario, scorer) -> DiscreteJoint:
    """Exact law of ``(v, f(x))``, floored at ``JOINT_FLOOR`` and renormalized."""
    if scorer.dim != scenario.dim:
        raise ShapeError(f"scorer expects {scorer.dim} inputs, scenario has {scenario.dim}")
    vs, X, mass = scenario.cell_inputs()
    yhat = scorer.predict(X)
    joint = np.zeros((scenario.n_v, scorer.n_classes))
    np.add.at(joint, (vs, yhat), mass)
    joint = np.maximum(joint, JOINT_FLOOR)
    return DiscreteJoint(joint / joint.sum(), atol=1e-9)


def oracle_dependency(scenario: DiscreteScenario, scorer, phi) -> float:
    return exact_dependency(phi, prediction_joint(scenario, scorer))


def mc_dependency(scenario, scorer, phi, n=1_000_000, seed=0):
    """Monte-Carlo estimate of the dependency from the empirical ``(v, f(x))`` table."""
    data = generate(scenario, n, seed)
    yhat = scorer.predict(data.X)
    joint = np.zeros((scenario.n_v, scorer.n_classes))
    np.add.at(joint, (data.v, yhat), 1.0)
    joint = np.maximum(joint / n, JOINT_FLOOR)
    return exact_dependency(phi, joint / joint.sum())


# -- CSV ---------------------------------------------------------------------

def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    d = data.w.shape[1]
    wr.writerow(["v"] + [f"w{j + 1}" for j in range(d)] + ["y"])
    for v, w, y in zip(data.v, data.w, data.y):
        wr.writerow([int(v)] + [repr(float(x)) for x in w] + [int(y)])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 2
    expected = ["v"] + [f"w{j + 1}" for j in range(d)] + ["y"]
    if d < 0 or header != expected:
        raise ValueError(f"bad header {header!r}; expected {expected!r}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError("CSV has no data rows")
    v, w, y = [], [], []
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields")
        try:
            vi, yi = int(r[0]), int(r[-1])
            wi = [float(x) for x in r[1:-1]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if vi < 0 or yi < 0:
            raise ValueError(f"line {lineno}: indices must be non-negative")
        v.append(vi)
        y.append(yi)
        w.append(wi)
    return Dataset(np.array(v), np.array(w, dtype=float).reshape(len(v), d), np.array(y))


def scenario_to_json(scenario: DiscreteScenario) -> str:
    return json.dumps({
        "pmf": scenario.pmf.tolist(),
        "w_grid": scenario.w_grid.tolist(),
        "dependency_knob": scenario.dependency_knob,
    }, indent=1) + "\n"


def scenario_from_json(text: str) -> DiscreteScenario:
    try:
        raw = json.loads(text)
        return DiscreteScenario(raw["pmf"], raw["w_grid"], raw.get("dependency_knob", 0.0))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"bad scenario file: {exc}") from None

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdiv.divergence import DiscreteJoint, RatioBounds
from fairdiv.exceptions import ConvergenceError, InsufficientSamples, ShapeError
from fairdiv.ratio import (
    KernelSpec,
    MmdQp,
    build_qp,
    empirical_mmd,
    estimate_ratio,
    kkt_residual,
    mean_embedding_residual,
    solve_ratio_qp,
)
from oracles import direction_sup, grid_minimum, random_pd_instance

K22 = KernelSpec(2, 2)


def sample_joint(pmf, n, rng):
    pmf = np.asarray(pmf, dtype=float)
    idx = rng.choice(pmf.size, size=n, p=pmf.ravel())
    return np.unravel_index(idx, pmf.shape)


class TestResidual:
    def test_identical_samples(self):
        res = mean_embedding_residual([(0, 0)] * 5, np.ones(5), K22)
        np.testing.assert_array_equal(res, 0.0)

    def test_two_samples_zero_ratio(self):
        res = mean_embedding_residual([(0, 0), (1, 1)], np.zeros(2), K22)
        np.testing.assert_allclose(res, [0, 0.5, 0.5, 0])

    def test_two_samples_unit_ratio(self):
        res = mean_embedding_residual([(0, 0), (1, 1)], np.ones(2), K22)
        np.testing.assert_allclose(res, [-0.5, 0.5, 0.5, -0.5])

    def test_errors(self):
        with pytest.raises(InsufficientSamples):
            mean_embedding_residual([(0, 0)], np.ones(1), K22)
        with pytest.raises(ShapeError):
            mean_embedding_residual([(0, 0), (1, 1)], np.ones(3), K22)
        with pytest.raises(ShapeError):
            mean_embedding_residual([(0, 0), (2, 1)], np.ones(2), K22)


class TestEmpiricalMmd:
    def test_hand_instance(self):
        assert empirical_mmd([(0, 0), (1, 1)], np.zeros(2), K22) == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_identical(self):
        assert empirical_mmd([(1, 0)] * 4, np.ones(4), K22) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_dominates_random_directions(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        samples = np.column_stack([rng.integers(0, 2, n), rng.integers(0, 2, n)])
        r = rng.uniform(0, 3, n)
        mmd = empirical_mmd(samples, r, K22)
        sup = direction_sup(samples, r, K22, directions=100_000, seed=seed)
        assert mmd >= sup - 1e-12
        assert mmd - sup <= 1e-3


class TestBuildQp:
    def test_distinct_cells(self):
        qp = build_qp([(0, 0), (1, 1)], K22, ridge=0.0)
        np.testing.assert_array_equal(qp.Q, np.eye(2))
        np.testing.assert_array_equal(qp.p, [0, 0])

    def test_duplicate_samples(self):
        qp = build_qp([(0, 0), (0, 0)], K22, ridge=0.0)
        np.testing.assert_array_equal(qp.Q, np.ones((2, 2)))
        np.testing.assert_array_equal(qp.p, [2, 2])

    def test_default_ridge(self):
        qp = build_qp([(0, 0), (0, 1), (1, 1)], K22)
        assert qp.ridge == pytest.approx(1e-6)

    def test_needs_two_samples(self):
        with pytest.raises(InsufficientSamples):
            build_qp([(0, 0)], K22)

    @pytest.mark.parametrize("seed", range(5))
    def test_objective_is_scaled_squared_mmd(self, seed):
        rng = np.random.default_rng(seed)
        n = 12
        samples = np.column_stack([rng.integers(0, 2, n), rng.integers(0, 2, n)])
        qp = build_qp(samples, K22, ridge=0.0)
        r1, r2 = rng.uniform(0, 3, (2, n))
        lhs = qp.objective(r1) - qp.objective(r2)
        rhs = n**2 / 2 * (empirical_mmd(samples, r1, K22) ** 2 - empirical_mmd(samples, r2, K22) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


class TestSolver:
    def test_identity(self):
        r = solve_ratio_qp(MmdQp.from_matrix(np.eye(2), [1.0, -1.0]))
        np.testing.assert_allclose(r, [1, 0], atol=1e-8)

    @pytest.mark.parametrize("step", ["diagonal", "global"])
    def test_interior(self, step):
        r = solve_ratio_qp(MmdQp.from_matrix([[2.0, 1.0], [1.0, 2.0]], [1.0, 1.0]), step=step)
        np.testing.assert_allclose(r, [1 / 3, 1 / 3], atol=1e-7)

    @pytest.mark.parametrize("seed", range(2))
    def test_exhaustive_grid_3x3(self, seed):
        rng = np.random.default_rng(100 + seed)
        Q, p = random_pd_instance(rng, 3)
        qp = MmdQp.from_matrix(Q, p)
        val = qp.objective(solve_ratio_qp(qp))
        best, _ = grid_minimum(Q, p, step=0.01)
        assert val <= best + 1e-9
        assert best - val <= 2e-2

    def test_non_convergence(self):
        qp = MmdQp.from_matrix([[1.0, 0.99], [0.99, 1.0]], [1.0, 0.5])
        with pytest.raises(ConvergenceError) as info:
            solve_ratio_qp(qp, max_iter=3, step="global")
        assert info.value.iterate.shape == (2,)
        assert info.value.residual > 0

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            MmdQp.from_matrix([[1.0, 0.0], [1.0, 1.0]], [0.0, 0.0])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_optimality_sanity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 40))
        samples = np.column_stack([rng.integers(0, 3, n), rng.integers(0, 2, n)])
        qp = build_qp(samples, KernelSpec(3, 2))
        r = solve_ratio_qp(qp)
        assert kkt_residual(qp, r) <= 1e-8
        assert qp.objective(r) <= qp.objective(np.ones(n)) + 1e-12
        assert qp.objective(r) <= qp.objective(np.zeros(n)) + 1e-12


class TestEstimateRatio:
    def test_independent_joint(self):
        rng = np.random.default_rng(0)
        v, y = sample_joint(np.full((2, 2), 0.25), 2000, rng)
        table = estimate_ratio((v, y), K22, normalize=True)
        assert np.all(np.abs(table.per_cell - 1) <= 0.15)

    def test_correlated_joint(self):
        rng = np.random.default_rng(1)
        v, y = sample_joint([[0.4, 0.1], [0.1, 0.4]], 2000, rng)
        table = estimate_ratio((v, y), K22)
        np.testing.assert_allclose(table.per_cell, [[0.625, 2.5], [2.5, 0.625]], atol=0.2)

    def test_clamp(self):
        rng = np.random.default_rng(2)
        v, y = sample_joint([[0.45, 0.05], [0.05, 0.45]], 500, rng)
        table = estimate_ratio((v, y), K22, clamp=RatioBounds(0.5, 2.0))
        assert table.clamped
        assert table.per_sample.min() >= 0.5 and table.per_sample.max() <= 2.0

    def test_single_sample(self):
        with pytest.raises(InsufficientSamples):
            estimate_ratio([(0, 0)], K22)

    def test_empty_cell_is_nan(self):
        table = estimate_ratio([(0, 0), (1, 1), (0, 0)], K22)
        assert np.isnan(table.per_cell[0, 1]) and np.isnan(table.per_cell[1, 0])

    @pytest.mark.parametrize("seed", range(3))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        v, y = sample_joint([[0.3, 0.2], [0.1, 0.4]], 300, rng)
        perm = rng.permutation(300)
        a = estimate_ratio((v, y), K22).per_cell
        b = estimate_ratio((v[perm], y[perm]), K22).per_cell
        np.testing.assert_allclose(a, b, atol=1e-7)

    def test_cell_mean_of_unclamped_solution(self):
        rng = np.random.default_rng(3)
        v, y = sample_joint([[0.3, 0.2], [0.1, 0.4]], 400, rng)
        table = estimate_ratio((v, y), K22, ridge=0.0, tol=1e-12)
        assert table.per_sample.mean() == pytest.approx(1.0, abs=1e-8)


class TestStatistics:
    def test_u_statistic_unbiased(self):
        joint = DiscreteJoint([[0.3, 0.2], [0.1, 0.4]])
        target = np.outer(joint.marginal_v(), joint.marginal_y()).ravel()
        rng = np.random.default_rng(11)
        n, reps = 50, 1000
        draws = np.empty((reps, 4))
        for k in range(reps):
            v, y = sample_joint(joint.pmf, n, rng)
            # the cross term alone: residual at r = 0
            draws[k] = mean_embedding_residual((v, y), np.zeros(n), K22)
        se = draws.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(draws.mean(axis=0) - target) <= 3 * se)

    def test_true_ratio_mmd_shrinks(self):
        joint = DiscreteJoint([[0.4, 0.1], [0.1, 0.4]])
        ratio = joint.ratio()
        med = {}
        for n in (500, 2000):
            vals = []
            for seed in range(40):
                v, y = sample_joint(joint.pmf, n, np.random.default_rng(seed))
                vals.append(empirical_mmd((v, y), ratio[v, y], K22))
            med[n] = np.median(vals)
        assert med[2000] <= 0.5 * med[500] + 1e-12

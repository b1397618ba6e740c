import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdiv.divergence import (
    PHI_NAMES,
    DiscreteJoint,
    RatioBounds,
    conjugate_maximizer,
    exact_dependency,
    exact_f_divergence,
    get_phi,
    phi_conjugate,
    phi_eval,
    phi_subgradient,
)
from fairdiv.exceptions import AbsoluteContinuityError, DomainError, ShapeError

GRID = np.geomspace(1e-3, 1e3, 241)


class TestGenerators:
    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_normalized_at_one(self, name):
        assert phi_eval(name, 1.0) == 0.0
        assert phi_subgradient(name, 1.0) == 0.0

    @pytest.mark.parametrize(
        "name,u,expected", [("tv", 2.0, 1.0), ("kl", 1.0, 0.0), ("hellinger", 4.0, 1.0), ("chi2", 2.0, 0.5)]
    )
    def test_values(self, name, u, expected):
        assert phi_eval(name, u) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("name,u,expected", [("kl", 2.0, 0.5), ("tv", 0.5, -1.0)])
    def test_subgradient_values(self, name, u, expected):
        assert phi_subgradient(name, u) == pytest.approx(expected)

    @pytest.mark.parametrize("name", PHI_NAMES)
    @pytest.mark.parametrize("u", [0.0, -1.0])
    def test_domain_errors(self, name, u):
        with pytest.raises(DomainError):
            phi_eval(name, u)
        with pytest.raises(DomainError):
            phi_subgradient(name, u)

    def test_aliases_and_unknown(self):
        assert get_phi("Chi-Squared").kind == "chi2"
        assert get_phi("total_variation").kind == "tv"
        with pytest.raises(ValueError):
            get_phi("renyi")

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_midpoint_convexity(self, name):
        f = phi_eval(name, GRID)
        u, w = np.meshgrid(GRID, GRID)
        mid = phi_eval(name, (u + w) / 2)
        assert np.all(mid <= (phi_eval(name, u) + phi_eval(name, w)) / 2 + 1e-12 * (1 + np.abs(f).max()))

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_subgradient_monotone(self, name):
        assert np.all(np.diff(phi_subgradient(name, GRID)) >= 0)

    @pytest.mark.parametrize("name", ["hellinger", "chi2", "kl"])
    def test_subgradient_matches_finite_differences(self, name):
        u = GRID[(GRID > 0.01) & (GRID < 100) & (np.abs(GRID - 1) > 1e-2)]
        h = 1e-6 * u
        fd = (phi_eval(name, u + h) - phi_eval(name, u - h)) / (2 * h)
        d = phi_subgradient(name, u)
        assert np.all(np.abs(fd - d) <= 1e-6 * np.maximum(np.abs(d), 1e-2))


class TestConjugate:
    @pytest.mark.parametrize(
        "name,v,expected", [("tv", 0.5, 0.5), ("kl", 0.5, np.log(2)), ("kl", 0.0, 0.0)]
    )
    def test_values(self, name, v, expected):
        assert phi_conjugate(name, v) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_zero_maps_to_zero(self, name):
        assert phi_conjugate(name, 0.0) == 0.0

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_infinite_off_domain(self, name):
        assert phi_conjugate(name, 1.5) == np.inf

    def test_domain_endpoints(self):
        assert phi_conjugate("tv", 1.0) == 1.0
        assert phi_conjugate("chi2", 1.0) == 2.0
        assert phi_conjugate("kl", 1.0) == np.inf
        assert phi_conjugate("hellinger", 1.0) == np.inf

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_matches_grid_supremum(self, name):
        u = np.linspace(1e-4, 100.0, 1_000_000)
        f = phi_eval(name, u)
        for v in (-3.0, -1.0, -0.2, 0.3, 0.8):
            grid_sup = np.max(u * v - f)
            assert phi_conjugate(name, v) >= grid_sup - 1e-9
            assert phi_conjugate(name, v) == pytest.approx(grid_sup, abs=1e-3)

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_fenchel_young(self, name):
        v = np.linspace(-5, 0.95, 120)
        u, vv = np.meshgrid(GRID, v)
        assert np.all(phi_conjugate(name, vv) >= u * vv - phi_eval(name, u) - 1e-9)
        star = conjugate_maximizer(name, v)
        gen = get_phi(name)
        f_star = np.where(star > 0, gen.phi(np.maximum(star, 1e-300)), gen.value_at_zero)
        gap = phi_conjugate(name, v) - (star * v - f_star)
        assert np.max(np.abs(gap)) <= 1e-6

    def test_maximizer_off_domain(self):
        with pytest.raises(DomainError):
            conjugate_maximizer("kl", 1.0)


class TestExactDivergence:
    P = np.array([0.5, 0.5])
    Q = np.array([0.25, 0.75])

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_self_divergence_zero(self, name):
        assert exact_f_divergence(name, self.Q, self.Q) == 0.0

    def test_tv_two_cells(self):
        assert exact_f_divergence("tv", self.P, self.Q) == pytest.approx(0.5)

    def test_kl_two_cells_normalized_form(self):
        expected = 0.25 * (1 - np.log(2)) + 0.75 * ((2 / 3 - 1) - np.log(2 / 3))
        assert exact_f_divergence("kl", self.P, self.Q) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.130812, abs=1e-6)

    def test_absolute_continuity(self):
        with pytest.raises(AbsoluteContinuityError):
            exact_f_divergence("kl", [0.5, 0.5], [1.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            exact_f_divergence("kl", [0.5, 0.5], [0.2, 0.3, 0.5])

    @pytest.mark.parametrize("name", PHI_NAMES)
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_nonnegative(self, name, seed):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(5), size=2)
        assert exact_f_divergence(name, p, q) >= -1e-12


class TestDependency:
    JOINT = [[0.4, 0.1], [0.1, 0.4]]

    @pytest.mark.parametrize(
        "name,expected", [("tv", 0.6), ("kl", 0.192745), ("hellinger", 0.102633), ("chi2", 0.36)]
    )
    def test_correlated_joint(self, name, expected):
        assert exact_dependency(name, self.JOINT) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_product_joint(self, name):
        assert exact_dependency(name, np.full((2, 2), 0.25)) == 0.0

    def test_zero_cell_rejected(self):
        with pytest.raises(AbsoluteContinuityError):
            exact_dependency("tv", [[0.5, 0.0], [0.0, 0.5]])

    def test_joint_validation(self):
        with pytest.raises(ValueError):
            DiscreteJoint([[0.5, 0.6]])
        with pytest.raises(ValueError):
            DiscreteJoint([[-0.1, 1.1]])
        j = DiscreteJoint(self.JOINT)
        np.testing.assert_allclose(j.ratio(), [[0.625, 2.5], [2.5, 0.625]])
        with pytest.raises(ValueError):
            j.pmf[0, 0] = 1.0


class TestRatioBoundsChains:
    def test_validation(self):
        with pytest.raises(ValueError):
            RatioBounds(1.5, 2.0)
        with pytest.raises(ValueError):
            RatioBounds(0.0, 2.0)
        b = RatioBounds.symmetric(1.0)
        assert b.c_lo == pytest.approx(np.exp(-1)) and b.c_hi == pytest.approx(np.e)

    @pytest.mark.parametrize("name", PHI_NAMES)
    @pytest.mark.parametrize("bounds", [RatioBounds(0.1, 10.0), RatioBounds(0.5, 3.0)])
    def test_chains(self, name, bounds):
        u = np.linspace(bounds.c_lo, bounds.c_hi, 500)
        d = phi_subgradient(name, u) * u
        assert np.all(phi_subgradient(name, bounds.c_lo) <= d + 1e-12)
        assert np.all(d <= phi_subgradient(name, bounds.c_hi) * bounds.c_hi + 1e-12)
        f = phi_eval(name, u)
        top = max(phi_eval(name, bounds.c_lo), phi_eval(name, bounds.c_hi))
        assert np.all(f >= 0) and np.all(f <= top + 1e-12)

import numpy as np
import pytest

from fairdiv.dependency import (
    SCALE_FLOOR,
    DependencyReport,
    choose_scale_a,
    dependency_bound,
    empirical_divergence,
    estimate_dependency,
    theorem1_constant,
    u_statistic_diagnostic,
)
from fairdiv.divergence import PHI_NAMES, DiscreteJoint, RatioBounds, exact_dependency, get_phi
from fairdiv.exceptions import DomainError, InsufficientSamples
from fairdiv.ratio import KernelSpec

K22 = KernelSpec(2, 2)
CORRELATED = DiscreteJoint([[0.4, 0.1], [0.1, 0.4]])


def sample_pairs(joint, n, seed):
    rng = np.random.default_rng(seed)
    idx = rng.choice(joint.pmf.size, size=n, p=joint.pmf.ravel())
    return np.unravel_index(idx, joint.shape)


class TestEmpiricalDivergence:
    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_unit_ratio(self, name):
        assert empirical_divergence(name, np.ones(7)) == 0.0

    def test_tv(self):
        assert empirical_divergence("tv", [0.5, 1.5]) == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "name,expected", [("kl", 0.339356), ("tv", 0.9375), ("hellinger", 0.190792), ("chi2", 0.5625)]
    )
    def test_two_values(self, name, expected):
        assert empirical_divergence(name, [0.625, 2.5]) == pytest.approx(expected, abs=1e-6)

    def test_zero_ratio(self):
        assert empirical_divergence("tv", [0.0, 1.0]) == pytest.approx(0.5)
        assert empirical_divergence("hellinger", [0.0, 1.0]) == pytest.approx(0.5)
        for name in ("kl", "chi2"):
            with pytest.raises(DomainError):
                empirical_divergence(name, [0.0, 1.0])

    def test_errors(self):
        with pytest.raises(InsufficientSamples):
            empirical_divergence("kl", [])
        with pytest.raises(DomainError):
            empirical_divergence("tv", [-1.0])


class TestConstants:
    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_degenerate_bounds(self, name):
        assert theorem1_constant(name, RatioBounds(1.0, 1.0)) == 0.0
        assert choose_scale_a(name, RatioBounds(1.0, 1.0), K22) == SCALE_FLOOR

    @pytest.mark.parametrize("name,expected", [("kl", 7.2236), ("hellinger", 3.6024)])
    def test_symmetric_bounds(self, name, expected):
        assert theorem1_constant(name, RatioBounds.symmetric(1.0)) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_monotone_in_bounds(self, name):
        his = np.linspace(1.0, 20.0, 40)
        los = np.linspace(1.0, 0.05, 40)
        by_hi = [theorem1_constant(name, RatioBounds(0.5, h)) for h in his]
        by_lo = [theorem1_constant(name, RatioBounds(lo, 2.0)) for lo in los]
        assert np.all(np.diff(by_hi) >= -1e-12)
        assert np.all(np.diff(by_lo) >= -1e-12)

    def test_scale_tv(self):
        assert choose_scale_a("tv", RatioBounds(0.2, 3.0), K22) == pytest.approx(2.0)

    def test_scale_kl(self):
        a = choose_scale_a("kl", RatioBounds.symmetric(1.0), K22)
        assert a == pytest.approx(2 * (np.e - 1))

    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_scale_puts_slopes_in_unit_ball(self, name):
        bounds = RatioBounds(0.1, 10.0)
        a = choose_scale_a(name, bounds, K22)
        rng = np.random.default_rng(0)
        tables = rng.uniform(bounds.c_lo, bounds.c_hi, size=(1000, 4))
        tables[:4] = [bounds.c_lo] * 4
        norms = np.linalg.norm(get_phi(name).dphi(tables), axis=1) / a
        assert norms.max() <= 1 + 1e-12


class TestBound:
    def test_small_t(self):
        rep = dependency_bound(0.1, 0.05, 2.0, 5.0, 1e-16, 100)
        assert rep.upper_bound == pytest.approx(0.2, abs=1e-6)

    def test_hand_numbers(self):
        rep = dependency_bound(0.1927, 0.03, 3.4366, 7.2236, 2.3, 500)
        assert rep.upper_bound == pytest.approx(0.9888, abs=1e-3)

    def test_zero_terms(self):
        rep = dependency_bound(0.0, 0.0, 1.0, 4.0, 1.0, 50)
        assert rep.upper_bound == pytest.approx(4.0 * np.sqrt(2 / 50))

    def test_linear_in_mmd_and_sqrt_t(self):
        ups = [dependency_bound(0.1, m, 2.0, 3.0, 1.0, 100).upper_bound for m in (0.0, 0.1, 0.2)]
        assert ups[2] - ups[1] == pytest.approx(ups[1] - ups[0])
        ups = [dependency_bound(0.1, 0.1, 2.0, 3.0, s**2, 100).upper_bound for s in (1.0, 2.0, 3.0)]
        assert ups[2] - ups[1] == pytest.approx(ups[1] - ups[0])

    def test_validation(self):
        with pytest.raises(InsufficientSamples):
            dependency_bound(0.1, 0.1, 1.0, 1.0, 1.0, 1)
        with pytest.raises(ValueError):
            dependency_bound(np.nan, 0.1, 1.0, 1.0, 1.0, 10)

    def test_serialization(self):
        rep = dependency_bound(0.1, 0.05, 2.0, 5.0, 2.3, 100)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "d_phi_n,mmd_n,a_n,c_const,t,n,upper_bound"
        assert float(lines[1].split(",")[-1]) == rep.upper_bound
        assert "upper_bound" in rep.to_text()
        assert isinstance(rep, DependencyReport)


class TestEstimateDependency:
    def test_independent(self):
        v, y = sample_pairs(DiscreteJoint(np.full((2, 2), 0.25)), 2000, 0)
        rep = estimate_dependency("hellinger", (v, y), K22)
        assert rep.d_phi_n <= 0.05

    def test_correlated_kl(self):
        v, y = sample_pairs(CORRELATED, 2000, 1)
        rep = estimate_dependency("kl", (v, y), K22)
        assert abs(rep.d_phi_n - exact_dependency("kl", CORRELATED)) <= 0.08
        assert rep.upper_bound >= rep.d_phi_n

    def test_coverage_kl(self):
        truth = exact_dependency("kl", CORRELATED)
        hits = [
            estimate_dependency("kl", sample_pairs(CORRELATED, 500, s), K22, t=2.3).upper_bound >= truth
            for s in range(200)
        ]
        assert np.mean(hits) >= 0.9

    def test_too_few(self):
        with pytest.raises(InsufficientSamples):
            estimate_dependency("kl", ([0], [0]), K22)


class TestUStatistic:
    @pytest.mark.parametrize("name", PHI_NAMES)
    def test_unit_ratio(self, name):
        v, y = sample_pairs(CORRELATED, 50, 0)
        assert u_statistic_diagnostic(name, (v, y), np.ones((2, 2))) == 0.0

    def test_hand_instance(self):
        # samples (0,0), (1,1); ratio table [[0.5, 2], [4, 0.25]]; KL slope 1 - 1/r
        ratio = np.array([[0.5, 2.0], [4.0, 0.25]])
        d = 1 - 1 / ratio
        diag = (d[0, 0] * 0.5 + d[1, 1] * 0.25) / 2
        cross = (d[0, 1] + d[1, 0]) / 2
        got = u_statistic_diagnostic("kl", ([0, 1], [0, 1]), ratio)
        assert got == pytest.approx(diag - cross)

    def test_rejects_non_positive(self):
        with pytest.raises(DomainError):
            u_statistic_diagnostic("kl", ([0, 1], [0, 1]), np.zeros((2, 2)))

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from cvqkd import mathcore
from cvqkd.mathcore import (
    DomainError,
    IntegrationError,
    RandomStream,
    binary_entropy,
    gaussian_cdf,
    gaussian_quantile,
    gaussian_state_entropy,
    integrate,
    inverse_erf,
)


class TestBinaryEntropy:
    def test_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_endpoints_by_continuity(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_small_probability_value(self):
        # High-precision reference from an arbitrary-precision oracle.
        assert binary_entropy(0.0071) == pytest.approx(
            oracles.entropy_mpmath(0.0071), abs=1e-15
        )
        assert binary_entropy(0.0071) == pytest.approx(0.0609, abs=1e-4)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_symmetry(self, p):
        assert binary_entropy(p) == binary_entropy(1.0 - p)

    @pytest.mark.parametrize("bad", [-0.1, 1.1, float("nan")])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            binary_entropy(bad)


class TestInverseErf:
    def test_odd_at_zero(self):
        assert inverse_erf(0.0) == 0.0

    def test_reference_value(self):
        assert inverse_erf(0.5) == pytest.approx(0.4769362762, abs=1e-9)

    @pytest.mark.parametrize("y", [-0.9, 0.1, 0.7])
    def test_roundtrip(self, y):
        assert math.erf(inverse_erf(y)) == pytest.approx(y, abs=1e-12)

    @pytest.mark.parametrize("bad", [-1.0, 1.0, 2.0])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            inverse_erf(bad)


class TestGaussianCdfQuantile:
    def test_cdf_center(self):
        assert gaussian_cdf(0.0) == 0.5

    def test_quantile_reference(self):
        q = gaussian_quantile(0.75)
        assert q == pytest.approx(0.67449, abs=1e-4)
        assert q == pytest.approx(math.sqrt(2) * inverse_erf(0.5), abs=1e-12)

    def test_roundtrip(self):
        assert gaussian_cdf(gaussian_quantile(0.31)) == pytest.approx(
            0.31, abs=1e-10
        )

    @given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
    def test_mutually_inverse(self, q):
        assert gaussian_cdf(gaussian_quantile(q)) == pytest.approx(q, abs=1e-10)

    @pytest.mark.parametrize("bad", [0.0, 1.0])
    def test_quantile_domain(self, bad):
        with pytest.raises(DomainError):
            gaussian_quantile(bad)


class TestGaussianStateEntropy:
    def test_pure_vacuum(self):
        assert gaussian_state_entropy(1.0) == 0.0

    def test_thermal_one_photon(self):
        assert gaussian_state_entropy(3.0) == pytest.approx(2.0, abs=1e-12)

    def test_matches_fock_diagonalization(self):
        nbar = 0.5
        assert gaussian_state_entropy(2 * nbar + 1) == pytest.approx(
            oracles.thermal_entropy_fock(nbar, cutoff=64), abs=1e-6
        )

    def test_monotone_in_nu(self):
        grid = np.linspace(1.0, 20.0, 80)
        vals = [gaussian_state_entropy(nu) for nu in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(DomainError):
            gaussian_state_entropy(0.5)


class TestIntegrate:
    def test_unit_interval(self):
        assert integrate(lambda x: 1.0, (0.0, 1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_normal_density_normalization(self):
        pdf = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
        assert integrate(pdf, (-8.0, 8.0), rel_tol=1e-10) == pytest.approx(
            1.0, abs=1e-10
        )

    def test_separable_2d(self):
        val = integrate(lambda x, y: x * y, ((0.0, 1.0), (0.0, 1.0)))
        assert val == pytest.approx(0.25, abs=1e-12)

    @pytest.mark.parametrize("coeffs", [(1, 0, 2), (0.5, -1, 3, 0, 2, -4)])
    def test_polynomials_exact(self, coeffs):
        poly = np.polynomial.Polynomial(coeffs)
        exact = poly.integ()(2.0) - poly.integ()(-1.0)
        assert integrate(poly, (-1.0, 2.0)) == pytest.approx(exact, abs=1e-12)

    def test_nonconvergence_is_reported(self):
        # Highly oscillatory near the origin; the subdivision budget runs
        # out and the failure must surface as an exception.
        with pytest.raises(IntegrationError):
            integrate(lambda x: math.sin(1.0 / x), (1e-9, 1.0), rel_tol=1e-13)


class TestRandomStream:
    def test_reproducible(self):
        a = RandomStream(123, 5).generator().standard_normal(64)
        b = RandomStream(123, 5).generator().standard_normal(64)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RandomStream(123, 0).generator().standard_normal(64)
        b = RandomStream(123, 1).generator().standard_normal(64)
        assert not np.array_equal(a, b)

    def test_children_deterministic_and_distinct(self):
        root = RandomStream(99)
        kids = [root.child(i) for i in range(32)]
        assert len({k.stream_id for k in kids}) == 32
        assert root.child(7) == RandomStream(99).child(7)

    def test_independence_of_sibling_streams(self):
        root = RandomStream(2024)
        x = root.child(1).generator().standard_normal(20000)
        y = root.child(2).generator().standard_normal(20000)
        corr = np.corrcoef(x, y)[0, 1]
        assert abs(corr) < 3 / math.sqrt(20000)


def test_ensure_probability_bounds():
    assert mathcore.ensure_probability(0.3) == 0.3
    with pytest.raises(DomainError):
        mathcore.ensure_probability(1.0 + 1e-9)

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from fracheat.errors import AccuracyError, DomainError
from fracheat.specfun import (
    WrightEvaluator,
    gamma_fn,
    mittag_leffler,
    subordinate,
    wright_evaluator,
    wright_moment,
    wright_phi,
)

SQRT_PI = math.sqrt(math.pi)


class TestGamma:
    def test_trivial_values(self):
        assert gamma_fn(1.0) == 1.0
        assert gamma_fn(0.5) == pytest.approx(SQRT_PI, rel=1e-15)

    def test_negative_half_via_reflection(self):
        # Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        x = -0.5
        expected = math.pi / (math.sin(math.pi * x) * gamma_fn(1 - x))
        assert gamma_fn(x) == pytest.approx(expected, rel=1e-14)
        assert gamma_fn(x) == pytest.approx(-2 * SQRT_PI, rel=1e-14)

    @pytest.mark.parametrize("x", [0.0, -1.0, -2.0, -37.0])
    def test_poles(self, x):
        with pytest.raises(DomainError):
            gamma_fn(x)

    def test_fixtures(self, fixtures):
        for x, ref in fixtures["gamma"]:
            assert gamma_fn(x) == pytest.approx(ref, rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=-49.9, max_value=-0.01).filter(lambda x: abs(x - round(x)) > 1e-6))
    def test_reflection_property(self, x):
        lhs = gamma_fn(x) * gamma_fn(1 - x)
        k = round(x)
        sin_pix = (-1) ** k * math.sin(math.pi * (x - k))  # x - k is exact
        assert lhs == pytest.approx(math.pi / sin_pix, rel=1e-12)


class TestWrightPhi:
    def test_at_zero(self):
        assert wright_phi(0.5, 0.0) == pytest.approx(1 / SQRT_PI, rel=1e-15)

    @pytest.mark.parametrize("theta", [0.0, 0.3, 1.0, 2.5, 6.0, 12.0])
    def test_half_closed_form(self, theta):
        assert wright_phi(0.5, theta) == pytest.approx(math.exp(-theta**2 / 4) / SQRT_PI, abs=1e-14)

    def test_high_precision_fixture(self, fixtures):
        ref = float(fixtures["phi_hp"]["0.3,2"])
        assert wright_phi(0.3, 2.0) == pytest.approx(ref, abs=1e-14)

    def test_fixture_grid(self, fixtures):
        for a, th, ref in fixtures["phi"]:
            assert abs(wright_phi(a, th) - ref) <= 1e-13, (a, th)

    def test_branch_and_error_reported(self):
        v, err, branch = wright_phi(0.5, 1.0, full_output=True)
        assert branch == "series"
        assert 0 <= err < 1e-13
        _, _, branch = wright_phi(0.5, 9.0, full_output=True)
        assert branch == "integral"

    def test_series_beyond_range_raises(self):
        with pytest.raises(AccuracyError) as exc:
            wright_phi(0.9, 40.0, method="series")
        assert exc.value.bound > 1e-10

    def test_methods_agree_in_overlap(self):
        th = np.linspace(0.5, 2.0, 7)
        a = wright_phi(0.5, th, method="series")
        b = wright_phi(0.5, th, method="integral")
        np.testing.assert_allclose(a, b, atol=1e-14)

    @pytest.mark.parametrize("bad", [-1e-3, math.inf, math.nan])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            wright_phi(0.5, bad)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(DomainError):
            wright_phi(alpha, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.0, 30.0))
    def test_nonnegative(self, alpha, theta):
        assert wright_phi(alpha, theta) >= -1e-10


class TestMoments:
    def test_zero_moment(self):
        for a in (0.1, 0.5, 0.9, 1.0):
            assert wright_moment(a, 0.0) == 1.0

    def test_examples(self):
        assert wright_moment(0.5, 1.0) == pytest.approx(2 / SQRT_PI, rel=1e-14)
        assert wright_moment(0.5, -0.5) == pytest.approx(math.gamma(0.5) / math.gamma(0.75), rel=1e-13)
        assert wright_moment(0.5, -0.5) == pytest.approx(1.4464090846, abs=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            wright_moment(0.5, -1.0)


class TestEvaluator:
    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_invariants(self, alpha):
        ev = wright_evaluator(alpha)
        assert ev.truncated_mass >= 1 - ev.tail_tol
        assert np.all(ev.phi >= 0)
        assert ev.clamp_max <= 1e-10
        assert ev.nodes.flags.writeable is False

    def test_custom_theta_max_too_small(self):
        with pytest.raises(AccuracyError):
            WrightEvaluator(0.5, theta_max=2.0)

    def test_cached(self):
        assert wright_evaluator(0.5) is wright_evaluator(0.5)


class TestSubordinate:
    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_unit_mass(self, alpha):
        assert subordinate(alpha, np.ones_like) == pytest.approx(1.0, abs=1e-10)

    def test_exp_half(self):
        # E_{1/2}(-1) = e erfc(1)
        ref = math.e * math.erfc(1.0)
        assert subordinate(0.5, lambda th: np.exp(-th)) == pytest.approx(ref, abs=1e-12)
        assert ref == pytest.approx(0.4275835762, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.3, 0.6])
    def test_first_moment(self, alpha):
        assert subordinate(alpha, lambda th: th) == pytest.approx(1 / gamma_fn(1 + alpha), abs=1e-10)

    def test_vector_valued(self):
        lam = np.array([0.0, 1.0, 10.0])
        v = subordinate(0.5, lambda th: np.exp(-np.outer(th, lam)))
        assert v.shape == (3,)
        np.testing.assert_allclose(v, mittag_leffler(0.5, 1.0, -lam), atol=1e-12)

    def test_full_output(self):
        v, qerr, tail = subordinate(0.5, np.ones_like, full_output=True)
        assert qerr < 1e-10 and tail < 1e-10

    def test_tail_exceeds_tolerance(self):
        ev = WrightEvaluator(0.5, theta_max=6.0, tail_tol=1e-3)
        with pytest.raises(AccuracyError):
            subordinate(0.5, np.ones_like, evaluator=ev, tol=1e-12)

    def test_wrong_evaluator(self):
        with pytest.raises(DomainError):
            subordinate(0.5, np.ones_like, evaluator=wright_evaluator(0.3))


class TestMittagLeffler:
    def test_zero(self):
        for a, b in [(0.3, 1.0), (0.5, 0.5), (0.7, 2.2)]:
            assert mittag_leffler(a, b, 0.0) == pytest.approx(1 / gamma_fn(b), rel=1e-15)

    def test_exponential(self):
        assert mittag_leffler(1.0, 1.0, -2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)

    def test_half_erfc(self):
        x = np.array([0.1, 1.0, 3.0, 10.0, 26.0])
        ref = special.erfcx(x)
        np.testing.assert_allclose(mittag_leffler(0.5, 1.0, -x), ref, rtol=1e-13)
        assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(0.4275835762, abs=1e-10)

    def test_fixtures(self, fixtures):
        for a, b, x, ref in fixtures["ml"]:
            assert abs(mittag_leffler(a, b, -x) - ref) <= 1e-13 * max(1.0, abs(ref)), (a, b, x)

    def test_algebraic_tail(self):
        # E_{a,b}(-x) ~ 1/(x Gamma(b - a)) as x -> inf
        for a, b in [(0.5, 1.0), (0.7, 1.0), (0.3, 0.3 + 0.5)]:
            x = 1e8
            assert mittag_leffler(a, b, -x) * x * gamma_fn(b - a) == pytest.approx(1.0, rel=1e-6)

    def test_branches_cover_range(self):
        _, _, br = mittag_leffler(0.6, 1.0, -np.array([0.01, 3.0, 1e4]), full_output=True)
        assert list(br) == ["series", "integral", "asymptotic"]

    def test_positive_argument_rejected(self):
        with pytest.raises(DomainError):
            mittag_leffler(0.5, 1.0, 0.1)

    def test_alpha_one_other_beta(self):
        with pytest.raises(DomainError):
            mittag_leffler(1.0, 1.5, -1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 0.95), st.floats(1e-3, 1e3))
    def test_completely_monotone_proxy(self, alpha, lam):
        t = np.geomspace(1e-3, 1e2, 30)
        v = mittag_leffler(alpha, 1.0, -lam * t**alpha)
        assert np.all(v > 0) and np.all(v <= 1)
        assert np.all(np.diff(v) < 0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 0.95), st.floats(1e-3, 1e3))
    def test_duality_property(self, alpha, lam):
        v0 = subordinate(alpha, lambda th: np.exp(-lam * th))
        v1 = subordinate(alpha, lambda th: np.exp(-lam * th), 1)
        assert abs(v0 - mittag_leffler(alpha, 1.0, -lam)) <= 1e-8
        assert abs(v1 - mittag_leffler(alpha, alpha, -lam)) <= 1e-8

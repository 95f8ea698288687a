from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from classical import etd2_solve
from fracheat.errors import DivergenceError, DomainError, UsageError
from fracheat.norms import MorreyParams, SpaceParams, morrey_norm
from fracheat.operators import FracParams, p_alpha
from fracheat.solver import (
    SolverConfig,
    TimeGrid,
    Trajectory,
    admissible_beta,
    default_grading,
    evaluate_at,
    fixed_point_residual,
    global_norm,
    nonlinearity,
    picard_step,
    solve,
    xt_norm,
)
from fracheat.spectral import Field, Grid
from fracheat.specfun import subordinate


def gaussian(grid, amp, width=1.0):
    return Field(grid, amp * np.exp(-grid.x**2 / (2 * width**2)))


def config(alpha=0.5, gamma=3.0, p=3.0, q=3.0, s=-0.5, T=0.5, M=16, **kw):
    return SolverConfig(FracParams(alpha, gamma), SpaceParams(s, p, q), TimeGrid(T, M), **kw)


class TestTimeGrid:
    def test_graded_nodes(self):
        t = TimeGrid(2.0, 4, rho=2.0).nodes
        np.testing.assert_allclose(t, [0, 0.125, 0.5, 1.125, 2.0])

    def test_log_spaced(self):
        t = TimeGrid(1.0, 5, mode="log_spaced", t_min=1e-4).nodes
        assert t[0] == 0.0 and t[-1] == 1.0
        np.testing.assert_allclose(t[1:], np.geomspace(1e-4, 1, 5))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e3), st.integers(1, 200), st.floats(1.0, 4.0))
    def test_invariants(self, T, M, rho):
        t = TimeGrid(T, M, rho).nodes
        assert t[0] == 0.0 and t[-1] == T and t.size == M + 1
        assert np.all(np.diff(t) > 0)

    @pytest.mark.parametrize(
        "kw", [dict(T=0.0, M=4), dict(T=1.0, M=0), dict(T=1.0, M=4, rho=0.5),
               dict(T=1.0, M=4, mode="log_spaced", t_min=2.0)]
    )
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            TimeGrid(**kw)

    def test_unknown_mode(self):
        with pytest.raises(UsageError):
            TimeGrid(1.0, 4, mode="uniformish")

    def test_scaled(self):
        g = TimeGrid(1.0, 8, mode="log_spaced", t_min=1e-3).scaled(0.5)
        assert g.T == 0.5 and g.t_min == 5e-4

    def test_default_grading(self):
        assert default_grading(0.5, 3.0, 0.0) == 2.0
        assert default_grading(0.5, 3.0, -0.5) == pytest.approx(2 / (1 - 0.375))
        assert default_grading(1.0, 3.0, -0.9) == 4.0


class TestNonlinearity:
    def test_examples(self):
        g = Grid(1, 16)
        assert nonlinearity(Field(g, np.zeros(16)), 3.0).max_abs() == 0.0
        np.testing.assert_array_equal(nonlinearity(Field(g, np.full(16, -2.0)), 3.0).values, -8.0)
        assert nonlinearity(np.array(4.0), 1.5) == pytest.approx(8.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-1e3, 1e3), st.floats(1.01, 5.0))
    def test_odd(self, u, gamma):
        assert nonlinearity(np.array(-u), gamma) == -nonlinearity(np.array(u), gamma)


class TestTrajectory:
    def test_shape_checked(self):
        with pytest.raises(DomainError):
            Trajectory(TimeGrid(1.0, 3), Grid(1, 16), np.zeros((2, 16)))

    def test_non_finite_reports_node(self):
        v = np.zeros((3, 16))
        v[1, 4] = np.inf
        with pytest.raises(DivergenceError) as exc:
            Trajectory(TimeGrid(1.0, 3), Grid(1, 16), v)
        assert exc.value.node == 2

    def test_state_index(self):
        tr = Trajectory(TimeGrid(1.0, 3), Grid(1, 16), np.arange(48.0).reshape(3, 16))
        assert tr.state(3).values[0] == 32.0
        with pytest.raises(IndexError):
            tr.state(0)


class TestNorms:
    def test_single_node(self):
        g = Grid(1, 256)
        prof = gaussian(g, 1.0)
        tr = Trajectory(TimeGrid(0.25, 1), g, prof.values[None])
        expected = 0.25 ** (0.5 * 0.5 / 2) * morrey_norm(prof, MorreyParams(3, 2, local=True))
        assert xt_norm(tr, -0.5, 0.5, 3, 2) == pytest.approx(expected, rel=1e-14)

    def test_weight_cancels(self):
        g = Grid(1, 256)
        prof = gaussian(g, 1.0)
        prof = prof * (1 / morrey_norm(prof, MorreyParams(3, 2, local=True)))
        grid = TimeGrid(1.0, 10)
        s, a = -0.6, 0.7
        vals = np.stack([t ** (s * a / 2) * prof.values for t in grid.nodes[1:]])
        assert xt_norm(Trajectory(grid, g, vals), s, a, 3, 2) == pytest.approx(1.0, rel=1e-12)

    def test_xt_needs_negative_s(self):
        tr = Trajectory(TimeGrid(1.0, 1), Grid(1, 16), np.ones((1, 16)))
        with pytest.raises(DomainError):
            xt_norm(tr, 0.0, 0.5, 2, 1)

    def test_beta(self):
        assert admissible_beta(FracParams(0.8, 3.0), 2.0) == pytest.approx(0.2)

    def test_global_constant_profile(self):
        g = Grid(1, 256)
        prof = gaussian(g, 1.0)
        fp = FracParams(0.8, 3.0)
        beta = admissible_beta(fp, 4.0)
        grid = TimeGrid(10.0, 6)
        vals = np.stack([t**-beta * prof.values for t in grid.nodes[1:]])
        got = global_norm(Trajectory(grid, g, vals), beta, fp, 4, 4)
        assert got == pytest.approx(morrey_norm(prof, MorreyParams(4, 4)), rel=1e-12)

    @pytest.mark.parametrize("beta", [0.9, 0.4])
    def test_global_inadmissible_beta(self, beta):
        tr = Trajectory(TimeGrid(1.0, 1), Grid(1, 16), np.ones((1, 16)))
        with pytest.raises(UsageError):
            global_norm(tr, beta, FracParams(0.8, 3.0), 4, 4)


class TestPicardStep:
    def test_zero_datum_fixed(self):
        g = Grid(1, 64)
        cfg = config(M=4)
        zero = Field(g, np.zeros(64))
        tr = Trajectory(cfg.time, g, np.zeros((4, 64)), zero)
        assert np.all(picard_step(tr, cfg).values == 0.0)

    def test_first_correction_three_nodes(self):
        # one step from u_0 against per-mode adaptive quadrature of the frozen integrand
        g = Grid(1, 32, 4.0)
        alpha, gamma = 0.5, 3.0
        fp = FracParams(alpha, gamma)
        cfg = SolverConfig(fp, SpaceParams(-0.5, 3, 3), TimeGrid(0.3, 3, rho=2.0))
        mu = gaussian(g, 0.01)
        t = cfg.time.nodes
        u0 = np.stack([p_alpha(float(tm), mu, fp).values for tm in t[1:]])
        step = picard_step(Trajectory(cfg.time, g, u0, mu), cfg)

        k = np.fft.fftfreq(g.n, 1.0 / g.n) * math.pi / g.L
        lam = k**2
        frozen = [np.fft.fft(nonlinearity(u0[max(j, 1) - 1], gamma)) for j in range(3)]

        def weight(lm, tm, a, b):
            # u = (tm - tau)^alpha turns the weakly singular integral into (1/alpha) int E_{a,a}(-lm u) du
            def e_aa(u):
                return float(subordinate(alpha, lambda th: np.exp(-lm * u * th), 1))

            val, _ = quad(e_aa, (tm - b) ** alpha, (tm - a) ** alpha, epsabs=1e-15, epsrel=1e-12, limit=200)
            return val / alpha

        for m in (1, 2, 3):
            coef = np.zeros(g.n, dtype=complex)
            for j in range(m):
                lam_u, inv = np.unique(lam, return_inverse=True)
                w = np.array([weight(lm, t[m], t[j], t[j + 1]) for lm in lam_u])
                coef += w[inv] * frozen[j]
            correction = np.fft.ifft(coef).real
            got = step.values[m - 1] - u0[m - 1]
            assert np.abs(correction).max() > 1e-8
            assert np.abs(got - correction).max() <= 1e-6 * np.abs(correction).max()


class TestSolve:
    def test_small_data_converges(self):
        g = Grid(1, 256)
        cfg = config(M=24)
        res = solve(gaussian(g, 0.5), cfg)
        assert res.verdict == "converged"
        assert all(r <= 0.5 for r in res.ratios)
        assert fixed_point_residual(res) <= 2 * cfg.cauchy_tol
        assert res.sup_norm <= res.geometric_bound * (1 + 1e-12)
        assert set(res.as_dict()) >= {"verdict", "iterations", "ratios", "halvings", "T"}

    def test_zero_data(self):
        g = Grid(1, 64)
        res = solve(Field(g, np.zeros(64)), config(M=4))
        assert res.verdict == "converged" and res.iterations == 1
        assert np.all(res.trajectory.values == 0)

    def test_sign_symmetry(self):
        g = Grid(1, 128)
        cfg = config(M=8)
        a = solve(gaussian(g, 0.4), cfg).trajectory.values
        b = solve(gaussian(g, -0.4), cfg).trajectory.values
        np.testing.assert_array_equal(a, -b)

    def test_linear_mode(self):
        g = Grid(1, 128)
        cfg = config(M=6, nonlinear=False)
        mu = gaussian(g, 3.0)
        res = solve(mu, cfg)
        np.testing.assert_allclose(res.trajectory.state(6).values, p_alpha(0.5, mu, cfg.fp).values, atol=1e-15)

    def test_large_data_diverges_and_halves(self):
        g = Grid(1, 128)
        cfg = config(M=8, max_halvings=2)
        res = solve(gaussian(g, 40.0), cfg)
        assert res.verdict == "diverged"
        assert res.halvings == 2 and res.T == pytest.approx(0.125)
        assert any("halving" in w for w in res.warnings)

    def test_inadmissible(self):
        g = Grid(1, 64)
        cfg = config(s=-0.9, M=4)  # below N/p - 2/(gamma-1) = -2/3
        with pytest.raises(UsageError):
            solve(gaussian(g, 0.1), cfg)
        res = solve(gaussian(g, 0.1), cfg, force=True)
        assert any("forced" in w for w in res.warnings)

    def test_dimension_mismatch(self):
        g = Grid(2, 16)
        with pytest.raises(UsageError):
            solve(Field(g, np.zeros(g.shape)), config(M=2))

    def test_evaluate_at_nodes_and_between(self):
        g = Grid(1, 128)
        cfg = config(M=12)
        res = solve(gaussian(g, 0.5), cfg)
        t = cfg.time.nodes
        for m in (3, 12):
            np.testing.assert_allclose(evaluate_at(res, t[m]).values, res.trajectory.state(m).values, atol=1e-8)
        mid = evaluate_at(res, 0.5 * (t[5] + t[6])).values
        lo, hi = res.trajectory.state(5).values, res.trajectory.state(6).values
        assert np.all(mid <= np.maximum(lo, hi) + 1e-6) and np.all(mid >= np.minimum(lo, hi) - 1e-6)
        with pytest.raises(DomainError):
            evaluate_at(res, 0.6)

    def test_alpha_one_against_etd2(self):
        g = Grid(1, 256)
        cfg = SolverConfig(FracParams(1.0, 3.0), SpaceParams(-0.5, 3, 3), TimeGrid(0.1, 64, rho=2.0))
        mu = gaussian(g, 1.0)
        res = solve(mu, cfg)
        assert res.verdict == "converged"
        ref = etd2_solve(mu.values, g.L, 3.0, 0.1, steps=2000)
        final = res.trajectory.state(64).values
        assert np.abs(final - ref).max() <= 0.01 * np.abs(ref).max()

from math import inf, log

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treeshift import (
    chain_from_matrices,
    domain_endpoints,
    find_a0_and_period,
    lln_beta_bounds,
    lln_limit,
    phi,
    pressure,
    rate,
    rate_curve,
    tilted_matrix,
)
from treeshift.errors import ModelValidationError, SupportViolation
from treeshift.rate_function import parse_weighted

ALPHA_STAR_1 = log(2) / 3  # Example-1 limit
ALPHA_HI_1 = 2 * log(2) / 3


@pytest.fixture(scope="module")
def flat_chain():
    """Uniform full 2-shift with unit weights: a degenerate observable."""
    m = np.full((2, 2), 0.5)
    return chain_from_matrices(m, np.ones((2, 2)), d=2)


class TestChainValidation:
    def test_support_mismatch_rejected(self, golden):
        m = np.array([[0.5, 1.0], [0.5, 0.0]])
        w = np.array([[1.0, 0.0], [1.0, 0.0]])  # kills an adjacency edge
        with pytest.raises(ModelValidationError):
            parse_weighted({"M": m.tolist(), "A": w.tolist()}, golden)

    def test_column_sums_checked(self, golden):
        m = np.array([[0.5, 1.0], [0.6, 0.0]])
        with pytest.raises(ModelValidationError) as err:
            parse_weighted({"M": m.tolist()}, golden)
        assert err.value.col == 0


class TestPhi:
    def test_matched_stochastic_is_zero(self):
        p = np.array([[0.25, 0.5], [0.75, 0.5]])
        assert phi(p, p) == pytest.approx([0.0, 0.0], abs=1e-15)

    def test_uniform_against_counting(self):
        p = np.array([[0.5, 1.0], [0.5, 0.0]])
        w = np.array([[1.0, 1.0], [1.0, 0.0]])
        assert phi(p, w)[0] == pytest.approx(log(2), abs=1e-15)

    def test_support_violation(self):
        p = np.array([[0.5, 1.0], [0.5, 0.0]])
        w = np.array([[1.0, 1.0], [0.0, 1.0]])
        with pytest.raises(SupportViolation):
            phi(p, w)

    @given(st.integers(0, 2**36 - 1))
    @settings(max_examples=80, deadline=None)
    def test_gibbs_inequality(self, seed):
        # Phi(P|M) <= 0 for stochastic reference M with shared support
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        m = rng.dirichlet(np.ones(n), size=n).T
        p = rng.dirichlet(np.ones(n), size=n).T
        assert np.all(phi(p, m) <= 1e-12)


class TestTiltedMatrix:
    def test_mu_zero_recovers_m(self, example1):
        log_e = tilted_matrix(example1, 0.0)
        sup = example1.base.adjacency == 1
        assert np.exp(log_e[sup]) == pytest.approx(example1.M[sup], abs=1e-15)

    def test_mu_one_entries(self, example1):
        log_e = tilted_matrix(example1, 1.0)
        assert np.exp(log_e[0, 0]) == pytest.approx(0.5)
        assert np.exp(log_e[1, 0]) == pytest.approx(0.5)
        assert np.exp(log_e[0, 1]) == pytest.approx(2.0)  # M=1 times A=2

    @given(st.floats(-20, 20))
    @settings(max_examples=40, deadline=None)
    def test_support_preserved(self, mu):
        m = np.array([[0.5, 1.0], [0.5, 0.0]])
        chain = chain_from_matrices(m, np.array([[1.0, 2.0], [1.0, 0.0]]))
        log_e = tilted_matrix(chain, mu)
        assert np.array_equal(np.isfinite(log_e), chain.base.adjacency == 1)

    def test_edgewise_tilt_scalar_section(self, example1):
        # the scalar tilt is the mu*logW section of the per-edge tilt family,
        # so pressures agree along that section (spot check; the full
        # vector-valued dual is out of scope)
        sup = example1.base.adjacency == 1
        log_w = np.zeros_like(example1.W)
        log_w[sup] = np.log(example1.W[sup])
        period = find_a0_and_period(example1.base)
        for mu in (-2.0, 0.4, 1.0, 3.5):
            scalar = pressure(example1, mu, 0, period, tol=1e-14)
            section = pressure(example1, mu * log_w, 0, period, tol=1e-14)
            assert section.value == pytest.approx(
                scalar.value, abs=scalar.error_bound + section.error_bound
            )


class TestPressure:
    def test_stochastic_fixed_point(self, flat_chain):
        for mu in (-3.0, 0.0, 1.0, 7.5):
            res = pressure(flat_chain, mu)
            assert res.value == pytest.approx(0.0, abs=1e-12)

    def test_example1_at_zero(self, example1):
        res = pressure(example1, 0.0)
        assert res.value == pytest.approx(0.0, abs=1e-10)
        assert res.error_bound < 1e-10

    def test_error_bound_honored(self, example1):
        period = find_a0_and_period(example1.base)
        for mu in (-2.0, 0.7, 3.0):
            coarse = pressure(example1, mu, 0, period, tol=1e-4)
            fine = pressure(example1, mu, 0, period, tol=1e-13)
            assert abs(coarse.value - fine.value) < coarse.error_bound

    def test_convex_in_mu(self, example1, example2):
        for chain in (example1, example2):
            period = find_a0_and_period(chain.base)
            mus = np.linspace(-4, 4, 33)
            vals = [pressure(chain, m, 0, period).value for m in mus]
            second = np.diff(vals, 2)
            assert second.min() > -1e-8


class TestRate:
    def test_zero_at_limit_value(self, example1):
        assert rate(example1, 0, ALPHA_STAR_1) == pytest.approx(0.0, abs=1e-6)

    def test_infinite_beyond_domain(self, example1):
        assert rate(example1, 0, 0.9) == inf
        assert rate(example1, 0, -0.2) == inf

    def test_degenerate_observable(self, flat_chain):
        assert rate(flat_chain, 0, 0.0) == pytest.approx(0.0, abs=1e-9)
        assert rate(flat_chain, 0, 0.3) == inf
        assert rate(flat_chain, 0, -0.3) == inf

    def test_nonnegative_and_positive_away_from_limit(self, example1, extreme):
        period1 = find_a0_and_period(example1.base)
        assert rate(example1, 0, ALPHA_STAR_1 + 0.05, period1) > 1e-3
        assert rate(example1, 0, ALPHA_STAR_1 - 0.05, period1) > 1e-3
        period2 = find_a0_and_period(extreme.base)
        for j in range(2):
            star = lln_limit(extreme, j, period2)
            assert rate(extreme, j, star, period2) == pytest.approx(0.0, abs=1e-6)
            # domain is a single point here, so nearby values are infinite
            assert rate(extreme, j, star + 0.05, period2) > 1e-3
            assert rate(extreme, j, star - 0.05, period2) > 1e-3

    def test_convex_on_grid(self, example1):
        period = find_a0_and_period(example1.base)
        endpoints = domain_endpoints(example1, 0, period)
        alphas = np.linspace(0.02, ALPHA_HI_1 - 0.02, 25)
        vals = [rate(example1, 0, float(a), period, endpoints) for a in alphas]
        second = np.diff(vals, 2)
        assert second.min() > -1e-8


class TestEndpoints:
    def test_example1(self, example1):
        a1, a2 = domain_endpoints(example1, 0)
        assert a1 == pytest.approx(0.0, abs=1e-4)
        assert a2 == pytest.approx(ALPHA_HI_1, abs=1e-4)

    def test_degenerate(self, flat_chain):
        a1, a2 = domain_endpoints(flat_chain, 0)
        assert a1 == pytest.approx(0.0, abs=1e-9)
        assert a2 == pytest.approx(0.0, abs=1e-9)

    def test_extreme_phases_pin_both_classes(self, extreme):
        period = find_a0_and_period(extreme.base)
        for j in range(2):
            a1, a2 = domain_endpoints(extreme, j, period)
            star = lln_limit(extreme, j, period)
            assert a1 == pytest.approx(star, abs=1e-4)
            assert a2 == pytest.approx(star, abs=1e-4)


class TestLln:
    def test_example1_limit(self, example1):
        assert lln_limit(example1, 0) == pytest.approx(ALPHA_STAR_1, abs=1e-12)

    def test_extreme_phases(self, extreme, extreme_recip):
        period = find_a0_and_period(extreme.base)
        got = {round(lln_limit(extreme, j, period), 12) for j in range(2)}
        assert got == {
            round(-log(2) / 3, 12),
            round(-2 * log(2) / 3, 12),
        }
        got_recip = sorted(lln_limit(extreme_recip, j, period) for j in range(2))
        assert got_recip[0] == pytest.approx(log(2) / 3, abs=1e-12)
        assert got_recip[1] == pytest.approx(2 * log(2) / 3, abs=1e-12)

    def test_extreme_beta_bounds(self, extreme_recip):
        lo, hi = lln_beta_bounds(extreme_recip, np.array([0.5, 0.25, 0.25]))
        assert lo == pytest.approx(log(2) / 2, abs=1e-12)
        assert hi == pytest.approx(log(2) / 2, abs=1e-12)

    def test_rate_vanishes_at_phase_limits(self, extreme):
        # ties the class conventions of the dual recursion and the LLN formula
        period = find_a0_and_period(extreme.base)
        for j in range(2):
            star = lln_limit(extreme, j, period)
            assert rate(extreme, j, star, period) == pytest.approx(0.0, abs=1e-6)


@pytest.fixture(scope="module")
def nine_chain(nine):
    from treeshift import reciprocal_on_support

    m = nine.adjacency.astype(float)
    m = m / m.sum(axis=0, keepdims=True)
    return chain_from_matrices(m, reciprocal_on_support(m), d=3, symbols=nine.symbols)


class TestPeriodThree:
    def test_rate_vanishes_exactly_at_each_phase(self, nine_chain):
        # ties the pressure readout class, the dual, and the LLN phase
        # indexing together at p = 3, where the conventions all differ
        period = find_a0_and_period(nine_chain.base)
        assert period.period == 3
        for j in range(3):
            star = lln_limit(nine_chain, j, period)
            assert rate(nine_chain, j, star, period) == pytest.approx(0.0, abs=1e-8)
            # strictly positive away from the phase limit, though this chain
            # is exceptionally flat there (deviations planted high in the
            # tree propagate down cheaply), hence the small threshold
            assert rate(nine_chain, j, star + 0.08, period) > 1e-8
            assert rate(nine_chain, j, star - 0.08, period) > 1e-8

    def test_phases_are_distinct(self, nine_chain):
        period = find_a0_and_period(nine_chain.base)
        phases = [lln_limit(nine_chain, j, period) for j in range(3)]
        assert len({round(p, 6) for p in phases}) == 3

    def test_pressure_error_bound_honored(self, nine_chain):
        period = find_a0_and_period(nine_chain.base)
        for mu in (-1.5, 0.8):
            coarse = pressure(nine_chain, mu, 1, period, tol=1e-4)
            fine = pressure(nine_chain, mu, 1, period, tol=1e-13)
            assert abs(coarse.value - fine.value) < coarse.error_bound


class TestRateCurve:
    def test_example2_two_curves(self, example2):
        period = find_a0_and_period(example2.base)
        curves = [
            rate_curve(example2, j, n_points=40, period=period) for j in range(2)
        ]
        stars = [c.alpha_star for c in curves]
        assert abs(stars[0] - stars[1]) > 0.1
        for c in curves:
            finite = np.isfinite(c.values)
            i = np.argmin(np.where(finite, c.values, np.inf))
            assert abs(c.alphas[i] - c.alpha_star) < (c.alphas[1] - c.alphas[0]) * 1.5
        # pointwise max gives the unconditional rate; it keeps both zeros
        grid = np.linspace(-0.8, -0.1, 30)
        vals = np.array(
            [
                [rate(example2, j, float(a), period) for a in grid]
                for j in range(2)
            ]
        )
        unconditional = np.maximum(vals[0], vals[1])
        assert unconditional.min() >= 0
        for c in curves:
            finite_vals = c.values[np.isfinite(c.values)]
            assert finite_vals.min() >= -1e-8

    def test_symbol_permutation_invariance(self):
        # relabeling the alphabet leaves the curve unchanged
        m = np.full((2, 2), 0.5)
        w = np.array([[2.0, 3.0], [3.0, 2.0]])
        chain_a = chain_from_matrices(m, w)
        perm = [1, 0]
        chain_b = chain_from_matrices(m[np.ix_(perm, perm)], w[np.ix_(perm, perm)])
        ca = rate_curve(chain_a, 0, n_points=25)
        cb = rate_curve(chain_b, 0, n_points=25)
        assert ca.alphas == pytest.approx(cb.alphas.tolist(), abs=1e-12)
        fa, fb = np.isfinite(ca.values), np.isfinite(cb.values)
        assert np.array_equal(fa, fb)
        assert ca.values[fa] == pytest.approx(cb.values[fb].tolist(), abs=1e-7)

    def test_csv_format(self, tmp_path, flat_chain):
        curve = rate_curve(flat_chain, 0, n_points=10)
        out = tmp_path / "curve.csv"
        with open(out, "w") as fh:
            curve.to_csv(fh)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "alpha,rate,argmax_mu,finite"
        assert any(",inf,," in line for line in lines[1:])

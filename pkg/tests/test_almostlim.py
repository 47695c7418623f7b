import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import THIRD, swap_fn
from helpers import settled_sequence
from iterfe import AlmostLimitParams, DomainError, InsufficientLengthError, Power, WeightedSystem, polynomial
from iterfe.almostlim import almost_limit, almost_limit_of_iterates, almost_limit_rows, cesaro_table

P = AlmostLimitParams()
L = P.m_max
alternating = np.tile([0.0, 1.0], L // 2)


class TestParams:
    def test_budget_invariant(self):
        with pytest.raises(DomainError):
            AlmostLimitParams(n_values=(64, 1024), shift_max=2000, m_max=2048)

    def test_min_length(self):
        assert P.min_length == 512 + 256


class TestCesaroTable:
    def test_constant(self):
        tab = cesaro_table(np.full(L, 2.5), P)
        assert all(np.all(v == 2.5) for v in tab.values())

    def test_alternating_pairs(self):
        tab = cesaro_table(alternating, AlmostLimitParams(n_values=(1, 2, 3)))
        assert np.all(tab[2] == 0.5)
        assert tab[3][0] == pytest.approx(1 / 3)
        assert np.array_equal(tab[1], alternating[:len(tab[1])])

    def test_too_short(self):
        with pytest.raises(InsufficientLengthError):
            cesaro_table(np.zeros(100), P)


class TestAlmostLimit:
    def test_alternating(self):
        res = almost_limit(alternating)
        assert res.status == "almost_convergent"
        assert abs(res.value - 0.5) <= P.tol

    def test_dyadic_partial_sums(self):
        seq = [oracles.dyadic_partial(0.5, m + 1) for m in range(L)]
        res = almost_limit(seq)
        assert res.status == "convergent" and abs(res.value - 0.5) <= P.tol

    @pytest.mark.parametrize("length", [2048, 3000, 4096, 5000])
    def test_doubling_blocks_undecided(self, length):
        params = AlmostLimitParams(m_max=length)
        assert almost_limit(oracles.doubling_blocks(length), params).status == "undecided"

    def test_unbounded(self):
        seq = np.arange(L, dtype=float) * 1e10
        assert almost_limit(seq).status == "unbounded"

    def test_nonfinite(self):
        seq = np.zeros(L)
        seq[5] = np.inf
        assert almost_limit(seq).status == "unbounded"

    def test_half_width_inflates_tolerance(self):
        rng = np.random.default_rng(1)
        seq = 0.3 + 1e-4 * rng.standard_normal(L)
        assert almost_limit(seq).status == "undecided"
        res = almost_limit(seq, half_width=np.full(L, 1e-3))
        assert res.certified and abs(res.value - 0.3) <= res.tol

    def test_rows_match_single(self):
        rows = np.stack([alternating, np.full(L, 1.0), oracles.doubling_blocks(L)])
        batch = almost_limit_rows(rows)
        single = [almost_limit(r) for r in rows]
        assert [b.status for b in batch] == [s.status for s in single]
        np.testing.assert_array_equal([b.value for b in batch], [s.value for s in single])
        assert [b.diagnostics for b in batch] == [s.diagnostics for s in single]

    def test_certified_spread_within_tol(self):
        res = almost_limit(alternating)
        assert res.spread <= res.tol

    def test_random_convergent(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            limit, seq = settled_sequence(rng, L)
            res = almost_limit(seq)
            assert res.certified and abs(res.value - limit) <= P.tol

    @pytest.mark.parametrize("rate", [0.985, 0.995])
    def test_unsettled_geometric_not_certified(self, rate):
        # transient still ~1e-4 after the burn-in prefix: no certificate at tol 1e-6
        res = almost_limit(1.0 + 2.0 * rate ** np.arange(L))
        assert res.status == "undecided"


class TestBanachAxioms:
    """Linear, positive, shift invariant and normalised on certified inputs."""

    @staticmethod
    def periodic_seq(pattern):
        return np.resize(np.asarray(pattern, dtype=float), L + 64)

    patterns = st.lists(st.floats(-10, 10), min_size=1, max_size=8)

    def test_normalised(self):
        assert almost_limit(np.ones(L)).value == 1.0

    @given(patterns, patterns, st.floats(-3, 3), st.floats(-3, 3))
    def test_linear(self, p1, p2, a, b):
        # periods up to 8 divide every window length, so both are certified
        s, t = self.periodic_seq(p1)[:L], self.periodic_seq(p2)[:L]
        rs, rt, rc = almost_limit(s), almost_limit(t), almost_limit(a * s + b * t)
        if rs.certified and rt.certified and rc.certified:
            assert rc.value == pytest.approx(a * rs.value + b * rt.value, abs=2 * P.tol)

    @given(patterns.map(lambda p: [abs(v) for v in p]))
    def test_positive(self, pattern):
        res = almost_limit(self.periodic_seq(pattern)[:L])
        if res.certified:
            assert res.value >= -P.tol

    @given(patterns, st.integers(0, 63))
    def test_shift_invariant(self, pattern, shift):
        seq = self.periodic_seq(pattern)
        r0, r1 = almost_limit(seq[:L]), almost_limit(seq[shift:shift + L])
        if r0.certified and r1.certified:
            assert r1.value == pytest.approx(r0.value, abs=2 * P.tol)


class TestOfIterates:
    def test_square_interior(self, dyadic):
        res = almost_limit_of_iterates(dyadic, polynomial(0.0, 1.0), 0.9)
        assert res.status == "convergent" and res.value == 0.0

    def test_square_fixed_point(self, dyadic):
        assert almost_limit_of_iterates(dyadic, polynomial(0.0, 1.0), 1.0).value == 1.0

    def test_swap(self, swap):
        res = almost_limit_of_iterates(swap, swap_fn(1.0, 0.0), THIRD)
        assert res.certified and res.value == pytest.approx(0.5, abs=1e-15)

    def test_monte_carlo_tolerance(self, martingale):
        params = AlmostLimitParams(n_values=(16, 32), shift_max=16, m_max=96)
        res = almost_limit_of_iterates(martingale, polynomial(0.0, 1.0), 0.4, params,
                                       method="monte_carlo", samples=2000)
        assert res.tol > params.tol
        assert res.certified and abs(res.value - 0.4) <= res.tol

import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amsdec.sources import (
    BudgetError,
    InvalidSourceError,
    MarkovSource,
    absorption_probabilities,
    block_entropy,
    cesaro_constant,
    cesaro_limit_matrix,
    class_source,
    communication_classes,
    cylinder_profile,
    empirical_frequency,
    entropy_rate,
    format_path,
    hidden_entropy_bounds,
    marginal,
    marginal_consistency,
    max_depth_within,
    mixture_marginal_gap,
    recurrent_classes,
    sample_path,
    sample_paths,
    shift_stationarity_gap,
    shifted_cylinder_prob,
    stationary_mean_source,
)

H = F(1, 2)


def three_state():
    return MarkovSource(("a", "b", "c"), [[H, H, 0], [H, H, 0], [0, 0, 1]], [F(1, 4), F(1, 4), H])


def absorbing():
    return MarkovSource(("a", "b", "c"), [[1, 0, 0], [H, 0, H], [0, 0, 1]], [0, 1, 0])


def brute_marginal(src, L, start=None):
    """Sum over every hidden state sequence of length ``L``."""
    init = src.initial if start is None else start
    out = {}
    for seq in itertools.product(range(src.n_states), repeat=L):
        p = F(init[seq[0]])
        for a, b in zip(seq, seq[1:]):
            p *= src.transition[a][b]
        if p:
            key = tuple(src.emit(s) for s in seq)
            out[key] = out.get(key, 0) + p
    return out


@st.composite
def sources(draw, max_states=4, hidden=False):
    n = draw(st.integers(1, max_states))
    rows = []
    for _ in range(n):
        raw = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n).filter(lambda r: sum(r) > 0))
        rows.append([F(v, sum(raw)) for v in raw])
    raw = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n).filter(lambda r: sum(r) > 0))
    emission = None
    if hidden:
        emission = draw(st.lists(st.sampled_from("01"), min_size=n, max_size=n))
    return MarkovSource(tuple(range(n)), rows, [F(v, sum(raw)) for v in raw], emission)


class TestValidation:
    def test_bad_row_named(self):
        with pytest.raises(InvalidSourceError, match="row 1"):
            MarkovSource(("a", "b"), [[1, 0], [F(1, 2), F(2, 5)]], [1, 0])

    def test_bad_initial(self):
        with pytest.raises(InvalidSourceError):
            MarkovSource(("a",), [[1]], [F(1, 2)])

    def test_duplicate_states(self):
        with pytest.raises(InvalidSourceError):
            MarkovSource(("a", "a"), [[1, 0], [0, 1]], [1, 0])


class TestMarginals:
    def test_three_state_depth2(self):
        m = marginal(three_state(), 2)
        assert m.prob("cc") == H
        assert m.prob("ab") == F(1, 8)
        assert m.prob("ac") == 0
        assert m.total() == 1

    @settings(max_examples=40)
    @given(sources(hidden=True), st.integers(1, 4))
    def test_against_brute_force(self, src, L):
        assert marginal(src, L).dist == brute_marginal(src, L)

    def test_shifted_cylinder(self):
        src = MarkovSource(("a", "b"), [[0, 1], [1, 0]], [1, 0])
        assert shifted_cylinder_prob(src, "ab", 0) == 1
        assert shifted_cylinder_prob(src, "ab", 1) == 0
        assert shifted_cylinder_prob(src, "z", 0) == 0
        with pytest.raises(ValueError):
            shifted_cylinder_prob(src, "a", -1)

    @settings(max_examples=30)
    @given(sources(), st.integers(0, 5))
    def test_shift_against_brute(self, src, i):
        mat = np.array(src.transition, dtype=object)
        v = np.array(src.initial, dtype=object)
        for _ in range(i):
            v = v.dot(mat)
        expected = brute_marginal(src, 2, start=list(v))
        for pat, p in expected.items():
            assert shifted_cylinder_prob(src, pat, i) == p

    @settings(max_examples=40)
    @given(sources(hidden=True), st.integers(1, 4))
    def test_consistency(self, src, L):
        assert marginal_consistency(src, L) == 0

    def test_budget(self):
        with pytest.raises(BudgetError) as exc:
            marginal(three_state(), 13, budget=2**20)
        assert exc.value.fits == 12
        assert max_depth_within(2, 1000) == 9
        assert max_depth_within(1, 5) == 5


class TestClasses:
    def test_three_state(self):
        d = recurrent_classes(three_state())
        assert [c.states for c in d.classes] == [(0, 1), (2,)]
        assert d.weights == [H, H]
        assert d.classes[0].stationary == (H, H)
        assert d.transient == ()

    def test_absorbing(self):
        src = absorbing()
        d = recurrent_classes(src)
        assert d.weights == [H, H]
        assert d.transient == (1,)
        assert stationary_mean_source(src).initial == (H, 0, H)
        assert cesaro_limit_matrix(src)[1] == [H, 0, H]

    @settings(max_examples=40)
    @given(sources())
    def test_cesaro_limit_oracle(self, src):
        # oracle: long float Cesaro average of matrix powers
        P = np.array(src.transition, dtype=float)
        n = 4000
        acc, cur = np.zeros_like(P), np.eye(len(P))
        for _ in range(n):
            acc += cur
            cur = cur @ P
        Pi = np.array(cesaro_limit_matrix(src), dtype=float)
        assert np.allclose(acc / n, Pi, atol=5 * len(P) / n + 1e-9)
        assert np.allclose(Pi @ P, Pi)
        assert sum(recurrent_classes(src).weights) == 1

    def test_absorption_rows_sum_to_one(self):
        src = absorbing()
        closed, transient = communication_classes(src)
        a = absorption_probabilities(src, closed, transient)
        assert all(sum(r) == 1 for r in a)


class TestStationarity:
    @settings(max_examples=30, deadline=None)
    @given(sources(hidden=True))
    def test_mean_is_shift_invariant(self, src):
        mean = stationary_mean_source(src)
        for L in range(1, 5):
            assert shift_stationarity_gap(mean, L, shifts=3) == 0

    def test_mean_depth8(self):
        mean = stationary_mean_source(absorbing())
        for L in range(1, 9):
            assert shift_stationarity_gap(mean, L, shifts=2) == 0

    @settings(max_examples=30, deadline=None)
    @given(sources(hidden=True))
    def test_mixture(self, src):
        assert mixture_marginal_gap(src, 3) == 0

    def test_cylinder_profile_bounded(self):
        src = absorbing()
        k = cesaro_constant(src)
        for n, dev in cylinder_profile(src, 3, [1, 2, 5, 40, 200]):
            assert n * dev <= k + 1e-12
        # exact value: only time 0 sits on state b, so P_n overweights it by 1/n
        assert cylinder_profile(src, 1, [4])[0][1] == F(1, 4)


class TestEntropy:
    def test_three_state(self):
        src = three_state()
        rates = entropy_rate(src)
        assert rates.per_class == (1.0, 0.0)
        assert rates.jacobs_average == 0.5
        assert not rates.is_bound

    def test_block_formula(self):
        src = three_state()
        for L in range(1, 11):
            assert block_entropy(src, L) / L == pytest.approx((L + 2) / (2 * L), abs=1e-12)

    def test_deterministic_cycle(self):
        src = MarkovSource(("a", "b", "c"), [[0, 1, 0], [0, 0, 1], [1, 0, 0]], [F(1, 3)] * 3)
        assert entropy_rate(src).per_class == (0.0,)

    def test_symmetric_chain(self):
        src = MarkovSource(("0", "1"), [[H, H], [H, H]], [1, 0])
        assert entropy_rate(src).jacobs_average == pytest.approx(1.0)

    @settings(max_examples=25, deadline=None)
    @given(sources(max_states=3, hidden=True))
    def test_hmm_bounds_ordered(self, src):
        d = recurrent_classes(src)
        for c in d.classes:
            cs = class_source(src, c)
            prev_lo, prev_hi = -1.0, math.inf
            for L in range(1, 6):
                lo, hi = hidden_entropy_bounds(cs, L)
                assert lo <= hi + 1e-9
                assert lo >= prev_lo - 1e-9 and hi <= prev_hi + 1e-9
                prev_lo, prev_hi = lo, hi

    def test_bounds_bracket_known_rate(self):
        # unhidden chain written as an HMM with distinct symbols: bounds equal the rate
        src = MarkovSource(("x", "y"), [[H, H], [F(1, 4), F(3, 4)]], [F(1, 3), F(2, 3)], ["0", "1"])
        exact = -(F(1, 3) * 2 * 0.5 * math.log2(0.5) * 1) - float(F(2, 3)) * (
            0.25 * math.log2(0.25) + 0.75 * math.log2(0.75)
        )
        lo, hi = hidden_entropy_bounds(src, 4)
        assert lo == pytest.approx(exact) and hi == pytest.approx(exact)


class TestSampling:
    def test_deterministic(self):
        src = three_state()
        assert sample_path(src, 500, 7, 2) == sample_path(src, 500, 7, 2)
        assert sample_path(src, 500, 7, 2) != sample_path(src, 500, 7, 3)

    def test_cycle_frequency(self):
        src = MarkovSource(("a", "b"), [[0, 1], [1, 0]], [H, H])
        paths = sample_paths(src, 1001, 1, 3)
        assert empirical_frequency(paths, "a") == pytest.approx(0.5, abs=1e-3)
        assert empirical_frequency(paths, "aa") == 0

    def test_symmetric_frequency(self):
        src = MarkovSource(("0", "1"), [[H, H], [H, H]], [1, 0])
        path = sample_path(src, 100_000, 0)
        assert abs(empirical_frequency([path], "0") - 0.5) < 4 * 0.5 / math.sqrt(1e5)

    def test_format(self):
        assert format_path(["a", "b"]) == "ab"
        assert format_path(["ab", "c"]) == "ab c"

    def test_length(self):
        with pytest.raises(ValueError):
            sample_path(three_state(), 0, 1)

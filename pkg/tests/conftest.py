import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from amsdec.dynamics import EndoMap, preimage
from amsdec.measure import FiniteSpace, SignedMeasure


@pytest.fixture
def s1():
    space = FiniteSpace.of_size(4)
    return space, EndoMap(space, (1, 0, 3, 3)), SignedMeasure.uniform(space)


def random_system(rng, max_size=10):
    """Random map and rational probability on at most ``max_size`` points."""
    n = int(rng.integers(1, max_size + 1))
    space = FiniteSpace.of_size(n)
    t = EndoMap(space, tuple(int(v) for v in rng.integers(0, n, size=n)))
    raw = rng.integers(0, 6, size=n)
    if raw.sum() == 0:
        raw[int(rng.integers(0, n))] = 1
    total = int(raw.sum())
    p = SignedMeasure(space, [Fraction(int(v), total) for v in raw])
    return space, t, p


def random_systems(count, seed=2024, max_size=10):
    rng = np.random.default_rng(seed)
    return [random_system(rng, max_size) for _ in range(count)]


# -- independent oracles ----------------------------------------------------


def naive_pushforward(p, t, n):
    """``B -> p(T^-n B)`` evaluated point by point through iterated preimages."""
    space = p.space
    weights = []
    for y in range(space.size):
        ev = 1 << y
        for _ in range(n):
            ev = preimage(t, ev)
        weights.append(p.mass(ev))
    return SignedMeasure(space, weights)


def naive_cesaro(p, t, n):
    total = SignedMeasure.zero(p.space)
    for k in range(n):
        total = total + naive_pushforward(p, t, k)
    return total * Fraction(1, n)


def cycle_lengths_oracle(t):
    lengths = []
    n = t.space.size
    for x in range(n):
        y = t.next[x]
        for k in range(1, n + 1):
            if y == x:
                lengths.append(k)
                break
            y = t.next[y]
    return lengths


def stationary_mean_oracle(p, t):
    """Average of ``p∘T^-k`` over one common period after every tail has drained."""
    n = t.space.size
    period = math.lcm(*cycle_lengths_oracle(t)) if cycle_lengths_oracle(t) else 1
    total = SignedMeasure.zero(p.space)
    for k in range(n, n + period):
        total = total + naive_pushforward(p, t, k)
    return total * Fraction(1, period)


def truncated_q(p, t, terms=60):
    out = stationary_mean_oracle(p, t) * Fraction(1, 2)
    for k in range(terms):
        out = out + Fraction(1, 2 ** (k + 2)) * naive_pushforward(p, t, k)
    return out


# -- hypothesis strategies --------------------------------------------------


@st.composite
def signed_measures(draw, max_size=8):
    n = draw(st.integers(1, max_size))
    ws = draw(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=12), min_size=n, max_size=n))
    return SignedMeasure(FiniteSpace.of_size(n), ws)


@st.composite
def measure_and_map(draw, max_size=8):
    m = draw(signed_measures(max_size))
    n = m.space.size
    nxt = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    return m, EndoMap(m.space, tuple(nxt))


@st.composite
def probability_and_map(draw, max_size=10):
    n = draw(st.integers(1, max_size))
    raw = draw(st.lists(st.integers(0, 9), min_size=n, max_size=n).filter(lambda xs: sum(xs) > 0))
    space = FiniteSpace.of_size(n)
    p = SignedMeasure(space, [Fraction(v, sum(raw)) for v in raw])
    nxt = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    return p, EndoMap(space, tuple(nxt))

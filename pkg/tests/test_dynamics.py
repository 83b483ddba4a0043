from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from amsdec.dynamics import (
    EndoMap,
    ams_horizon,
    cesaro_average,
    invariant_atoms,
    invariant_events_brute_force,
    invariant_integral_identity,
    is_ams,
    is_invariant_event,
    is_stationary,
    orbit_constant,
    orbit_structure,
    preimage,
    pushforward,
    stationary_mean,
)
from amsdec.krengel import build_dominating
from amsdec.measure import FiniteSpace, SignedMeasure, all_events, brute_force_sup_deviation, event_sup_deviation

from conftest import naive_cesaro, naive_pushforward, probability_and_map, random_systems, stationary_mean_oracle

Q = F(1, 4)


class TestPreimage:
    def test_s1(self, s1):
        space, t, _ = s1
        assert preimage(t, space.event([3])) == space.event([2, 3])
        assert preimage(t, space.event([2])) == 0
        assert preimage(t, space.full) == space.full


class TestPushforward:
    def test_identity(self, s1):
        _, t, p = s1
        assert pushforward(p, t, 0) == p

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_s1(self, s1, n):
        space, t, p = s1
        out = pushforward(p, t, n)
        assert out.weights == (Q, Q, 0, F(1, 2))
        # oracle: enumerate preimages over every event
        for ev in all_events(space):
            assert out.mass(ev) == naive_pushforward(p, t, n).mass(ev)

    def test_negative_n(self, s1):
        _, t, p = s1
        with pytest.raises(ValueError):
            pushforward(p, t, -1)


class TestCesaro:
    def test_single_term(self, s1):
        _, t, p = s1
        assert cesaro_average(p, t, 1) == p

    def test_s1(self, s1):
        _, t, p = s1
        assert cesaro_average(p, t, 2).weights == (Q, Q, F(1, 8), F(3, 8))
        assert cesaro_average(p, t, 4).weights == (Q, Q, F(1, 16), F(7, 16))

    def test_rejects_zero(self, s1):
        _, t, p = s1
        with pytest.raises(ValueError):
            cesaro_average(p, t, 0)

    @settings(max_examples=50)
    @given(probability_and_map(max_size=8))
    def test_matches_naive_sum(self, pt):
        p, t = pt
        for n in (1, 2, 3, 7, 13):
            assert cesaro_average(p, t, n) == naive_cesaro(p, t, n)


class TestStationaryMean:
    def test_stationary_input(self, s1):
        _, t, p = s1
        mean = stationary_mean(p, t)
        assert stationary_mean(mean, t) == mean

    def test_s1(self, s1):
        space, t, p = s1
        assert stationary_mean(p, t).weights == (Q, Q, 0, F(1, 2))
        assert stationary_mean(SignedMeasure.dirac(space, 2), t).weights == (0, 0, 0, 1)

    @settings(max_examples=100)
    @given(probability_and_map())
    def test_against_period_average_oracle(self, pt):
        p, t = pt
        mean = stationary_mean(p, t)
        assert mean == stationary_mean_oracle(p, t)
        assert pushforward(mean, t, 1) == mean

    def test_float_mode(self, s1):
        _, t, p = s1
        mean = stationary_mean(p.to_float(), t)
        assert is_stationary(mean, t)
        assert mean.isclose(stationary_mean(p, t).to_float())


class TestAtoms:
    def test_identity_map(self):
        space = FiniteSpace.of_size(3)
        atoms = invariant_atoms(EndoMap(space, (0, 1, 2))).atoms
        assert sorted(atoms) == [1, 2, 4]

    def test_s1(self, s1):
        space, t, _ = s1
        assert set(invariant_atoms(t).atoms) == {space.event([0, 1]), space.event([2, 3])}

    def test_single_cycle(self):
        space = FiniteSpace.of_size(5)
        assert invariant_atoms(EndoMap(space, (1, 2, 3, 4, 0))).atoms == (space.full,)

    @settings(max_examples=100)
    @given(probability_and_map(max_size=12))
    def test_invariant_events_are_unions_of_atoms(self, pt):
        _, t = pt
        part = invariant_atoms(t)
        assert sorted(part.unions()) == sorted(invariant_events_brute_force(t))
        for atom in part.atoms:
            assert is_invariant_event(t, atom)

    @given(probability_and_map())
    def test_orbit_structure_contract(self, pt):
        _, t = pt
        orb = orbit_structure(t)
        for x in range(t.space.size):
            y = t.iterate(x, orb.tail_length[x])
            assert orb.cycle_of[y] == orb.cycle_of[x]
            assert y in orb.cycles[orb.cycle_of[x]]
        seen = [c for cyc in orb.cycles for c in cyc]
        assert len(seen) == len(set(seen))


class TestPredicates:
    def test_s1(self, s1):
        space, t, p = s1
        assert is_stationary(stationary_mean(p, t), t)
        assert not is_stationary(p, t)
        assert is_ams(p, t, 1e-3, 512)
        assert not is_stationary(SignedMeasure.dirac(space, 2), t)

    def test_s1_deviation_is_one_over_4n(self, s1):
        _, t, p = s1
        mean = stationary_mean(p, t)
        for n in (1, 2, 4, 8, 16, 512):
            assert event_sup_deviation(cesaro_average(p, t, n), mean) == F(1, 4 * n)

    def test_horizon_certifies(self, s1):
        _, t, p = s1
        h = ams_horizon(p, t, 1e-6)
        assert is_ams(p, t, 1e-6, h)

    def test_bad_arguments(self, s1):
        _, t, p = s1
        with pytest.raises(ValueError):
            is_ams(p, t, 0, 10)


def test_orbit_bound_on_random_systems():
    for _, t, p in random_systems(40, seed=11):
        k = orbit_constant(p, t)
        mean = stationary_mean(p, t)
        for n in range(1, 200):
            assert n * event_sup_deviation(cesaro_average(p, t, n), mean) <= k


def test_orbit_bound_brute_force_small():
    for _, t, p in random_systems(15, seed=5, max_size=6):
        k = orbit_constant(p, t)
        mean = stationary_mean(p, t)
        for n in (1, 2, 3, 5, 8):
            assert n * brute_force_sup_deviation(naive_cesaro(p, t, n), mean) <= k


@settings(max_examples=60)
@given(probability_and_map())
def test_invariant_integrals_coincide(pt):
    p, t = pt
    part = invariant_atoms(t)
    q = build_dominating(p, t)
    for k, atom in enumerate(part.atoms):
        g = [F(k + 1, 3) if atom >> i & 1 else 0 for i in range(p.space.size)]
        for n in (0, 1, 4):
            ok, dev = invariant_integral_identity(g, p, t, n, q)
            assert ok and dev == 0


def test_endomap_validation():
    space = FiniteSpace.of_size(2)
    with pytest.raises(ValueError):
        EndoMap(space, (0, 2))
    with pytest.raises(ValueError):
        EndoMap(space, (0,))
    t = EndoMap.from_labels(FiniteSpace(("a", "b")), {"a": "b", "b": "b"})
    assert t.next == (1, 1)

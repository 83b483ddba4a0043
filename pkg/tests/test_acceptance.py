"""Acceptance criteria 1-9, one test each.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line (visible with
``pytest -s`` and in the verbose log) before asserting.
"""

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from amsdec.decomposition import (
    appendix_identity_suite,
    decompose,
    theorem4_profile,
    uniform_convergence_profile,
    verify_theorem1,
    zero_one_law,
)
from amsdec.dynamics import EndoMap, ams_horizon, invariant_atoms, is_ams, orbit_constant, preimage, pushforward
from amsdec.krengel import (
    ContractionState,
    apply_U,
    build_dominating,
    contraction_state,
    krengel_average,
    liminf_identity_check,
    power_U,
)
from amsdec.measure import (
    Density,
    FiniteSpace,
    SignedMeasure,
    all_events,
    event_sup_deviation,
    jordan_decompose,
    phi_isometry_check,
    radon_nikodym,
    tv_norm,
)
from amsdec.sources import (
    MarkovSource,
    block_entropy,
    empirical_frequency,
    entropy_rate,
    recurrent_classes,
    sample_path,
)

from conftest import naive_pushforward, random_systems, stationary_mean_oracle

SYSTEMS = random_systems(100, seed=2024, max_size=10)
H = F(1, 2)


@pytest.fixture
def announce(capsys):
    def _announce(k, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")

    return _announce


def s1():
    space = FiniteSpace.of_size(4)
    return space, EndoMap(space, (1, 0, 3, 3)), SignedMeasure.uniform(space)


def test_criterion_1_mixture_exactness(announce):
    start = time.perf_counter()
    failures = 0
    for _, t, p in SYSTEMS:
        rep = decompose(p, t)
        mix = SignedMeasure.zero(p.space)
        for c in rep.components:
            mix = mix + c.weight * c.p_omega
        events_ok = all(p.mass(ev) == mix.mass(ev) for ev in all_events(p.space))
        basis_ok = all(
            p.weights[i] == sum(c.weight * c.p_omega.weights[i] for c in rep.components)
            for i in range(p.space.size)
        )
        lib = verify_theorem1(rep, p, t)
        exact = all(r.max_deviation == 0 for r in lib.values())
        failures += not (events_ok and basis_ok and lib.all_passed and exact)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 30
    announce(1, ok, f"{100 - failures}/100 systems exact, {elapsed:.1f}s")
    assert failures == 0
    assert elapsed < 30


def test_criterion_2_components_ergodic_and_ams(announce):
    bad = 0
    n_components = 0
    for _, t, p in SYSTEMS:
        rep = decompose(p, t)
        part = invariant_atoms(t)
        for c in rep.components:
            n_components += 1
            law_ok = zero_one_law(c.p_bar_omega, part)[0] and zero_one_law(c.p_omega, part)[0]
            # brute force over every invariant event
            inv = [ev for ev in all_events(p.space) if preimage(t, ev) == ev]
            law_ok &= all(c.p_bar_omega.mass(ev) in (0, 1) for ev in inv)
            horizon = ams_horizon(c.p_omega, t, 1e-6)
            ams_ok = is_ams(c.p_omega, t, 1e-6, horizon)
            bad += not (law_ok and ams_ok and c.ergodic)
    announce(2, bad == 0, f"{n_components - bad}/{n_components} components ergodic and AMS at 1e-6")
    assert bad == 0


def test_criterion_3_convergence_profile(announce):
    _, t, p = s1()
    prof = uniform_convergence_profile(p, t, (1, 2, 4, 8, 16))
    s1_ok = prof == [(n, F(1, 4 * n)) for n in (1, 2, 4, 8, 16)]
    worst_ratio = 0
    bound_ok = True
    for _, t, p in SYSTEMS:
        k = orbit_constant(p, t)
        for n, dev in uniform_convergence_profile(p, t, range(1, 1025)):
            if n * dev > k:
                bound_ok = False
            if k:
                worst_ratio = max(worst_ratio, n * dev / k)
    ok = s1_ok and bound_ok
    announce(3, ok, f"S1 deviation 1/(4n) exact: {s1_ok}; max n*dev/K = {float(worst_ratio):.4f}")
    assert s1_ok and bound_ok


def hopf_cycle_oracle(q, t):
    """Points on a cycle of T whose whole cycle carries positive Q-mass."""
    ev = 0
    on_cycle = []
    for x in range(t.space.size):
        y, k = t.next[x], 1
        while y != x and k <= t.space.size:
            y, k = t.next[y], k + 1
        on_cycle.append(y == x)
    for x in range(t.space.size):
        if not on_cycle[x]:
            continue
        y, good = x, True
        while True:
            good &= q.weights[y] > 0
            y = t.next[y]
            if y == x:
                break
        if good:
            ev |= 1 << x
    return ev


def test_criterion_4_krengel_engine(announce):
    rng = np.random.default_rng(44)
    op_ok = True
    for _ in range(100):
        n = int(rng.integers(1, 11))
        space = FiniteSpace.of_size(n)
        t = EndoMap(space, tuple(int(v) for v in rng.integers(0, n, size=n)))
        raw = rng.integers(0, 5, size=n)
        raw[int(rng.integers(0, n))] += 1
        q = SignedMeasure(space, [F(int(v), int(raw.sum())) for v in raw])
        state = ContractionState.build(q, t)
        vals = [F(int(v), 3) if q.weights[i] else F(0) for i, v in enumerate(rng.integers(-9, 10, size=n))]
        f = Density(q, vals)
        g = Density(q, [abs(v) for v in vals])
        op_ok &= apply_U(g, state).is_nonnegative()
        op_ok &= apply_U(f, state).l1_norm() <= f.l1_norm()
        op_ok &= state.hopf_C == hopf_cycle_oracle(q, t)

    power_ok = mean_ok = liminf_ok = hopf_ok = True
    for _, t, p in SYSTEMS:
        state = contraction_state(p, t)
        f1 = radon_nikodym(p, state.q)
        f = f1
        for k in range(65):
            if k:
                f = apply_U(f, state)
            power_ok &= f == radon_nikodym(naive_pushforward(p, t, k), state.q)
        power_ok &= power_U(f1, state, 64) == f
        trace = krengel_average(f1, state)
        f_bar = radon_nikodym(stationary_mean_oracle(p, t), state.q)
        supp = state.q.support()
        mean_ok &= all(trace.limit.values[i] == f_bar.values[i] for i in range(p.space.size) if supp >> i & 1)
        liminf_ok &= liminf_identity_check(trace, state)
        hopf_ok &= state.hopf_C == hopf_cycle_oracle(state.q, t)

    space, t, p = s1()
    st1 = contraction_state(p, t)
    s1_ok = st1.hopf_C == space.event([0, 1, 3]) and st1.hopf_D == space.event([2])
    ok = op_ok and power_ok and mean_ok and liminf_ok and hopf_ok and s1_ok
    announce(
        4, ok,
        f"operator {op_ok}, U^n identity n<=64 {power_ok}, f*=fbar {mean_ok}, liminf {liminf_ok}, "
        f"Hopf oracle {hopf_ok}, S1 C={{0,1,3}} D={{2}} {s1_ok}",
    )
    assert ok


def test_criterion_5_measure_core(announce):
    rng = np.random.default_rng(55)
    bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 9))
        space = FiniteSpace.of_size(n)
        m1 = SignedMeasure(space, [F(int(v), 7) for v in rng.integers(0, 15, size=n)])
        m2 = SignedMeasure(space, [F(int(v), 5) for v in rng.integers(0, 15, size=n)])
        mu = m1 - m2
        q = SignedMeasure(space, [F(int(v) + 1, 3 * n) for v in rng.integers(0, 3, size=n)])
        dens = Density(q, [F(int(v), 4) for v in rng.integers(-8, 9, size=n)])
        iso = phi_isometry_check(dens)
        ok = iso[0] == iso[1] == sum(abs(v) * w for v, w in zip(dens.values, q.weights))
        parts = jordan_decompose(mu)
        d1, d2 = m1 - parts.positive, m2 - parts.negative
        ok &= d1 == d2 and d1.is_nonnegative()
        t = EndoMap(space, tuple(int(v) for v in rng.integers(0, n, size=n)))
        pushed = jordan_decompose(pushforward(mu, t, 1)).total_variation
        var = parts.total_variation
        ok &= all(pushed.mass(ev) <= var.mass(preimage(t, ev)) for ev in all_events(space))
        ok &= tv_norm(pushforward(mu, t, 1)) <= tv_norm(mu)
        bad += not ok
    announce(5, bad == 0, f"{200 - bad}/200 signed measures satisfy isometry, Jordan uniqueness, pushforward inequality")
    assert bad == 0


def test_criterion_6_conditioning_identities(announce):
    failing = []
    for idx, (_, t, p) in enumerate(SYSTEMS):
        checks = appendix_identity_suite(p, t)
        if not (len(checks) == 4 and checks.all_passed and all(c.max_deviation == 0 for c in checks.values())):
            failing.append(idx)
    space, t, p = s1()
    q = build_dominating(p, t)
    atom = space.event([2, 3])
    q_cond = q.restrict(atom) / q.mass(atom)
    comp = next(c for c in decompose(p, t).components if c.atom == atom)
    s1_ok = q_cond.weights == (0, 0, F(1, 8), F(7, 8)) and comp.q_omega == q_cond
    ok = not failing and s1_ok
    announce(6, ok, f"{100 - len(failing)}/100 systems pass (i)-(iv); S1 Q(.|{{2,3}}) = (0,0,1/8,7/8): {s1_ok}")
    assert ok, failing


def test_criterion_7_sources(announce):
    three = MarkovSource(("a", "b", "c"), [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]], [0.25, 0.25, 0.5])
    rates = entropy_rate(three)
    jacobs_ok = abs(rates.jacobs_average - 0.5) <= 1e-9
    worst = max(abs(block_entropy(three, L) / L - (L + 2) / (2 * L)) for L in range(1, 13))
    absorbing = MarkovSource(("a", "b", "c"), [[1, 0, 0], [H, 0, H], [0, 0, 1]], [0, 1, 0])
    weights = recurrent_classes(absorbing).weights
    ok = jacobs_ok and worst <= 1e-9 and weights == [H, H]
    announce(7, ok, f"Jacobs average {rates.jacobs_average:.12g}; max |H_L/L - (L+2)/(2L)| = {worst:.2e}; weights {[str(w) for w in weights]}")
    assert ok


def test_criterion_8_monte_carlo(announce):
    sym = MarkovSource(("0", "1"), [[0.5, 0.5], [0.5, 0.5]], [1.0, 0.0])
    path = sample_path(sym, 100_000, seed=12345)
    freq = empirical_frequency([path], ["0"])
    tol = 4 * (0.5 / math.sqrt(1e5))
    again = sample_path(sym, 100_000, seed=12345)
    ok = abs(freq - 0.5) <= tol and again == path
    announce(8, ok, f"frequency {freq:.5f}, |error| {abs(freq - 0.5):.5f} <= {tol:.5f}; rerun identical: {again == path}")
    assert ok


def test_criterion_9_distance_equivalence(announce):
    schedule = tuple(2**k for k in range(11))
    bad = 0
    rows_checked = 0
    for _, t, p in SYSTEMS + [s1()]:
        for r in theorem4_profile(p, t, schedule, 1e-3):
            rows_checked += 1
            bad += not (r["l1_density_distance"] == r["tv_distance"] == 2 * r["sup_deviation"])
    announce(9, bad == 0, f"{rows_checked - bad}/{rows_checked} scheduled rows with L1 = TV = 2*sup exactly")
    assert bad == 0

"""Ergodic decomposition of a measure under a self-map of a finite space.

The invariant sigma-algebra is generated by the atoms of
:func:`~amsdec.dynamics.invariant_atoms`; conditioning on it amounts to
normalising the restriction of the measure to each atom.  The
decomposition runs the dominating-measure / transfer-operator machinery
per atom and records every identity it verifies in a check map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    EndoMap,
    InvariantPartition,
    ams_horizon,
    atom_cycles,
    cesaro_average,
    invariant_atoms,
    invariant_integral_identity,
    is_ams,
    is_stationary,
    orbit_constant,
    pushforward,
    pushforward_orbit,
    stationary_mean,
)
from .krengel import (
    DEFAULT_SCHEDULE,
    ContractionState,
    build_dominating,
    krengel_average,
    liminf_identity_check,
)
from .measure import (
    Event,
    SignedMeasure,
    event_sup_deviation,
    members,
    radon_nikodym,
    tv_norm,
)
from .numeric import FLOAT_TOL, Scalar, close, fsum_exact, is_zero

AMS_EPSILON = 1e-6
N_RANDOM_FUNCTIONS = 20


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_deviation: Scalar = 0

    def __bool__(self):
        return self.passed


class CheckMap(dict):
    """Ordered ``name -> CheckResult``; each name may be recorded once."""

    def record(self, name: str, passed: bool, deviation: Scalar = 0) -> CheckResult:
        if name in self:
            raise KeyError(f"check {name!r} recorded twice")
        res = CheckResult(name, bool(passed), deviation)
        self[name] = res
        return res

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.values())


@dataclass(frozen=True)
class ErgodicComponent:
    atom: Event
    weight: Scalar
    p_omega: SignedMeasure
    p_bar_omega: SignedMeasure
    q_omega: SignedMeasure
    ergodic: bool


@dataclass
class DecompositionReport:
    p: SignedMeasure
    t: EndoMap
    q: SignedMeasure
    partition: InvariantPartition
    components: list
    E: Event
    residual: Event
    checks: CheckMap = field(default_factory=CheckMap)

    def component_of(self, i: int) -> ErgodicComponent | None:
        for c in self.components:
            if c.atom >> i & 1:
                return c
        return None


def _zero(m: SignedMeasure):
    return Fraction(0) if m.exact else 0.0


def conditional_measures(
    p: SignedMeasure, partition: InvariantPartition, tol: float = FLOAT_TOL
) -> tuple[list[tuple[Event, SignedMeasure]], list[Event]]:
    """``p(. | A)`` for each atom of positive mass; null atoms go to the residual list."""
    out, residual = [], []
    for atom in partition.atoms:
        w = p.mass(atom)
        if is_zero(w, tol):
            residual.append(atom)
        else:
            out.append((atom, p.restrict(atom) / w))
    return out, residual


def conditional_of_measure_given_atom(m: SignedMeasure, atom: Event) -> SignedMeasure:
    return m.restrict(atom) / m.mass(atom)


def zero_one_law(m: SignedMeasure, partition: InvariantPartition, max_atoms: int = 16) -> tuple[bool, Scalar]:
    """Whether ``m`` gives every invariant event mass 0 or 1.

    Enumerates all unions of atoms when there are at most ``max_atoms`` of
    them; otherwise checks atoms only (sufficient since masses add up).
    """
    events = partition.unions() if len(partition.atoms) <= max_atoms else partition.atoms
    worst = 0
    ok = True
    for ev in events:
        v = m.mass(ev)
        dev = min(abs(v), abs(v - 1))
        worst = max(worst, dev)
        if not (close(v, 0) or close(v, 1)):
            ok = False
    return ok, worst


def _structurally_ergodic(atom_cyc: list, p_bar: SignedMeasure) -> bool:
    if len(atom_cyc) != 1:
        return False
    cyc = atom_cyc[0]
    share = p_bar.weights[cyc[0]]
    on_cycle = sum(1 << c for c in cyc)
    return all(close(p_bar.weights[c], share) for c in cyc) and close(p_bar.mass(on_cycle), 1)


def decompose(
    p: SignedMeasure,
    t: EndoMap,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    ams_epsilon: float = AMS_EPSILON,
) -> DecompositionReport:
    """Split ``p`` into ergodic AMS components, one per invariant atom of positive mass.

    Per component the conditional dominating measure is built from the
    conditional measure, the transfer-operator averages are run against it,
    and their limit is compared with the density of the component's
    stationary mean.  Results land in ``report.checks``.
    """
    partition = invariant_atoms(t)
    q = build_dominating(p, t)
    conds, residual_atoms = conditional_measures(p, partition)
    cycles_by_atom = dict(zip(partition.atoms, atom_cycles(t, partition)))
    checks = CheckMap()

    components = []
    krengel_ok, krengel_dev = True, 0
    liminf_ok = True
    ams_ok, erg01_ok, erg01_dev, struct_ok = True, True, 0, True
    stationary_ok = True
    for atom, p_omega in conds:
        weight = p.mass(atom)
        p_bar = stationary_mean(p_omega, t)
        q_omega = build_dominating(p_omega, t)

        state = ContractionState.build(q_omega, t)
        f1 = radon_nikodym(p_omega, q_omega)
        trace = krengel_average(f1, state, schedule)
        f_bar = radon_nikodym(p_bar, q_omega)
        supp = q_omega.support()
        for i in members(supp):
            d = abs(trace.limit.values[i] - f_bar.values[i])
            krengel_dev = max(krengel_dev, d)
            if not close(trace.limit.values[i], f_bar.values[i]):
                krengel_ok = False
        liminf_ok &= liminf_identity_check(trace, state)

        stationary_ok &= is_stationary(p_bar, t)
        struct = _structurally_ergodic(cycles_by_atom[atom], p_bar)
        law_ok, law_dev = zero_one_law(p_bar, partition)
        struct_ok &= struct
        erg01_ok &= law_ok
        erg01_dev = max(erg01_dev, law_dev)
        horizon = ams_horizon(p_omega, t, ams_epsilon)
        ams_ok &= is_ams(p_omega, t, ams_epsilon, horizon)

        components.append(
            ErgodicComponent(atom, weight, p_omega, p_bar, q_omega, struct and law_ok)
        )

    E = 0
    for c in components:
        E |= c.atom
    residual = 0
    for a in residual_atoms:
        residual |= a

    total_w = fsum_exact(c.weight for c in components)
    checks.record("E_has_full_mass", close(p.mass(E), 1), abs(p.mass(E) - 1))
    checks.record("weights_sum_to_one", close(total_w, 1), abs(total_w - 1))
    checks.record("component_stationary_means", stationary_ok)
    checks.record("ergodic_structural", struct_ok)
    checks.record("ergodic_zero_one_law", erg01_ok, erg01_dev)
    checks.record("component_ams", ams_ok)
    checks.record("component_krengel_limit", krengel_ok, krengel_dev)
    checks.record("component_liminf_identity", liminf_ok)
    return DecompositionReport(p, t, q, partition, components, E, residual, checks)


def _random_functions(n_points: int, count: int, exact: bool, seed: int) -> list[list[Scalar]]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        raw = rng.integers(-50, 51, size=n_points)
        if exact:
            out.append([Fraction(int(v), 7) for v in raw])
        else:
            out.append([float(v) / 7 for v in raw])
    return out


def _integral(f: Sequence[Scalar], m: SignedMeasure) -> Scalar:
    return fsum_exact(a * b for a, b in zip(f, m.weights))


def verify_theorem1(
    report: DecompositionReport,
    p: SignedMeasure,
    t: EndoMap,
    n_random: int = N_RANDOM_FUNCTIONS,
    seed: int = 0,
) -> CheckMap:
    """Orbit constancy (a), event-wise mixture reconstruction (b), integral reconstruction (c)."""
    if report.p != p or report.t != t:
        raise ValueError("report was produced from a different system")
    checks = CheckMap()

    orbit_ok = True
    for x in range(t.space.size):
        if report.component_of(x) is not report.component_of(t.next[x]):
            orbit_ok = False
    checks.record("thm1a_orbit_constancy", orbit_ok)

    mix = SignedMeasure.zero(p.space)
    for c in report.components:
        mix = mix + c.weight * c.p_omega
    if p.space.size <= 20:
        lhs, rhs = p.event_masses(), mix.event_masses()
        dev = max(abs(a - b) for a, b in zip(lhs, rhs))
        ok = all(close(a, b) for a, b in zip(lhs, rhs))
    else:
        dev = p.max_abs_diff(mix)
        ok = p.isclose(mix)
    checks.record("thm1b_event_mixture", ok, dev)

    n = p.space.size
    basis = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    funcs = basis + _random_functions(n, n_random, p.exact, seed)
    worst, ok = 0, True
    for f in funcs:
        lhs = _integral(f, p)
        rhs = fsum_exact(c.weight * _integral(f, c.p_omega) for c in report.components)
        worst = max(worst, abs(lhs - rhs))
        ok &= close(lhs, rhs)
    checks.record("thm1c_integral_mixture", ok, worst)
    return checks


def uniform_convergence_profile(
    p: SignedMeasure, t: EndoMap, schedule: Sequence[int]
) -> list[tuple[int, Scalar]]:
    """``(n, sup_B |P_n(B) - Pbar(B)|)`` along an increasing schedule."""
    schedule = list(schedule)
    if not schedule:
        raise ValueError("schedule must be nonempty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be increasing")
    p_bar = stationary_mean(p, t)
    return [(n, event_sup_deviation(cesaro_average(p, t, n), p_bar)) for n in schedule]


@dataclass(frozen=True)
class AtomFunction:
    """A function constant on invariant atoms; ``residual`` marks points where it was set to 0 by convention."""

    values: tuple
    residual: Event


def conditional_expectation(
    f: Sequence[Scalar], p: SignedMeasure, partition: InvariantPartition
) -> AtomFunction:
    f = list(f)
    if len(f) != p.space.size:
        raise ValueError("function length does not match the space")
    conds, residual_atoms = conditional_measures(p, partition)
    vals = [_zero(p)] * p.space.size
    for atom, m in conds:
        e = _integral(f, m)
        for i in members(atom):
            vals[i] = e
    residual = 0
    for a in residual_atoms:
        residual |= a
    return AtomFunction(tuple(vals), residual)


def conditional_expectation_property(
    f: Sequence[Scalar], cond: AtomFunction, p: SignedMeasure, partition: InvariantPartition
) -> tuple[bool, Scalar]:
    """``int_G f dp == int_G E(f|I) dp`` for every invariant ``G``."""
    worst, ok = 0, True
    for g in partition.unions():
        lhs = fsum_exact(f[i] * p.weights[i] for i in members(g))
        rhs = fsum_exact(cond.values[i] * p.weights[i] for i in members(g))
        worst = max(worst, abs(lhs - rhs))
        ok &= close(lhs, rhs)
    return ok, worst


def _atom_constant_functions(partition: InvariantPartition, n: int, exact: bool, seed: int, count: int):
    rng = np.random.default_rng(seed)
    funcs = []
    for atom in partition.atoms:
        funcs.append([Fraction(int(atom >> i & 1)) for i in range(n)])
    for _ in range(count):
        vals = rng.integers(-20, 21, size=len(partition.atoms))
        g = [Fraction(0)] * n
        for v, atom in zip(vals, partition.atoms):
            for i in members(atom):
                g[i] = Fraction(int(v), 3) if exact else float(v) / 3
        funcs.append(g)
    return funcs


def appendix_identity_suite(
    p: SignedMeasure,
    t: EndoMap,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    seed: int = 0,
) -> CheckMap:
    """Conditioning commutes with the constructions used in the decomposition.

    (i) conditioning ``p∘T^-n`` on an atom gives ``P_omega∘T^-n``;
    (ii) conditioning ``Q`` on an atom gives the dominating measure built
    from ``P_omega``; (iii) the densities ``f_n`` and the limit density
    agree with their per-atom counterparts where ``Q_omega > 0``; (iv)
    atom-constant functions integrate identically against ``p``, its
    pushforwards, the Cesaro averages, the stationary mean and ``Q``.
    """
    checks = CheckMap()
    partition = invariant_atoms(t)
    q = build_dominating(p, t)
    conds, _ = conditional_measures(p, partition)
    head, cycle = pushforward_orbit(p, t)
    n_distinct = len(head) + len(cycle)

    ok_i, dev_i = True, 0
    ok_ii, dev_ii = True, 0
    ok_iii, dev_iii = True, 0
    p_bar = stationary_mean(p, t)
    f_bar = radon_nikodym(p_bar, q)
    for atom, p_omega in conds:
        m = p
        m_omega = p_omega
        for _ in range(n_distinct + 1):
            lhs = conditional_of_measure_given_atom(m, atom)
            dev_i = max(dev_i, lhs.max_abs_diff(m_omega))
            ok_i &= lhs.isclose(m_omega)
            m = pushforward(m, t, 1)
            m_omega = pushforward(m_omega, t, 1)

        q_cond = conditional_of_measure_given_atom(q, atom)
        q_omega = build_dominating(p_omega, t)
        dev_ii = max(dev_ii, q_cond.max_abs_diff(q_omega))
        ok_ii &= q_cond.isclose(q_omega)

        supp = q_omega.support()
        f_bar_omega = radon_nikodym(stationary_mean(p_omega, t), q_omega)
        pairs = [(f_bar, f_bar_omega)]
        for n in schedule:
            f_n = radon_nikodym(cesaro_average(p, t, n), q)
            f_n_omega = radon_nikodym(cesaro_average(p_omega, t, n), q_omega)
            pairs.append((f_n, f_n_omega))
        for a, b in pairs:
            for i in members(supp & atom):
                dev_iii = max(dev_iii, abs(a.values[i] - b.values[i]))
                ok_iii &= close(a.values[i], b.values[i])

    checks.record("appendix_i_conditional_pushforward", ok_i, dev_i)
    checks.record("appendix_ii_conditional_dominating", ok_ii, dev_ii)
    checks.record("appendix_iii_conditional_densities", ok_iii, dev_iii)

    ok_iv, dev_iv = True, 0
    funcs = _atom_constant_functions(partition, p.space.size, p.exact, seed, 5)
    for g in funcs:
        for n in sorted({0, 1, 2, n_distinct, schedule[-1]}):
            ok, dev = invariant_integral_identity(g, p, t, n, q)
            ok_iv &= ok
            dev_iv = max(dev_iv, dev)
    checks.record("appendix_iv_invariant_integrals", ok_iv, dev_iv)
    return checks


def theorem4_profile(
    p: SignedMeasure, t: EndoMap, schedule: Sequence[int], eps: float
) -> list[dict]:
    """Per scheduled ``n``: event-sup deviation, L1 density distance, TV distance and exceedance mass."""
    q = build_dominating(p, t)
    p_bar = stationary_mean(p, t)
    f_bar = radon_nikodym(p_bar, q)
    rows = []
    for n in schedule:
        p_n = cesaro_average(p, t, n)
        f_n = radon_nikodym(p_n, q)
        diff = f_n - f_bar
        exceed = fsum_exact(
            [q.weights[i] for i, v in enumerate(diff.values) if abs(v) > eps] or [_zero(q)]
        )
        rows.append(
            {
                "n": n,
                "sup_deviation": event_sup_deviation(p_n, p_bar),
                "l1_density_distance": diff.l1_norm(),
                "tv_distance": tv_norm(p_n - p_bar),
                "exceedance_mass": exceed,
            }
        )
    return rows


def first_certified(profile: Sequence[tuple[int, Scalar]], eps: float) -> int | None:
    """Smallest scheduled ``n`` from which every later deviation is ``<= eps``."""
    n_eps = None
    for n, dev in reversed(list(profile)):
        if dev <= eps:
            n_eps = n
        else:
            break
    return n_eps


def orbit_bound_check(p: SignedMeasure, t: EndoMap, schedule: Sequence[int]) -> tuple[bool, Scalar]:
    """``n * deviation(n) <= orbit_constant`` along the schedule; returns worst ``n * deviation``."""
    k = orbit_constant(p, t)
    worst = 0
    ok = True
    for n, dev in uniform_convergence_profile(p, t, schedule):
        v = n * dev
        worst = max(worst, v)
        ok &= v <= k or close(v, k)
    return ok, worst


__all__ = [
    "CheckResult",
    "CheckMap",
    "ErgodicComponent",
    "DecompositionReport",
    "AtomFunction",
    "conditional_measures",
    "decompose",
    "verify_theorem1",
    "uniform_convergence_profile",
    "conditional_expectation",
    "conditional_expectation_property",
    "appendix_identity_suite",
    "zero_one_law",
    "theorem4_profile",
    "first_certified",
    "orbit_bound_check",
]

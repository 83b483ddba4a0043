"""The transfer operator induced by a map relative to a dominating measure.

Given a probability ``q`` and a map ``T`` the operator ``U`` sends a density
``f`` to the density of ``phi(f)∘T^-1`` against ``q``:

    (Uf)(y) = sum_{x: T(x) = y} f(x) q(x) / q(y)      (q(y) > 0)

and 0 on ``q``-null points.  When ``q`` comes from :func:`build_dominating`
nothing is lost on null points and ``U^n (dP/dQ) = d(P∘T^-n)/dQ``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dynamics import (
    EndoMap,
    orbit_structure,
    pushforward,
    pushforward_orbit,
    stationary_mean,
)
from .measure import (
    Density,
    Event,
    SignedMeasure,
    SpaceMismatchError,
    geometric_tail,
    members,
    radon_nikodym,
    tv_norm,
)
from .numeric import FLOAT_TOL, Scalar, close, eventually_periodic, is_zero, periodic_sum

DEFAULT_SCHEDULE = tuple(2**k for k in range(11))
EPSILON_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def build_dominating(p: SignedMeasure, t: EndoMap) -> SignedMeasure:
    """``Q = (Pbar + sum_{n>=0} 2^(-n-1) p∘T^-n) / 2`` with the series summed in closed form."""
    head, cycle = pushforward_orbit(p, t)
    series = geometric_tail(head, cycle)
    return (stationary_mean(p, t) + series) * Fraction(1, 2)


@dataclass(frozen=True)
class ContractionState:
    q: SignedMeasure
    t: EndoMap
    hopf_C: Event
    hopf_D: Event
    _preimages: tuple = field(repr=False, compare=False, default=())

    @classmethod
    def build(cls, q: SignedMeasure, t: EndoMap) -> "ContractionState":
        if q.space != t.space:
            raise SpaceMismatchError("dominating measure and map live on different spaces")
        c = _conservative_part(q, t)
        return cls(q, t, c, q.space.full & ~c, tuple(map(tuple, t.preimages())))

    def transfer_matrix(self) -> np.ndarray:
        """Matrix ``M`` with ``Uf = M @ f``; row ``y`` collects the preimages of ``y``."""
        n = self.q.space.size
        dtype = object if self.q.exact else float
        m = np.zeros((n, n), dtype=dtype)
        if self.q.exact:
            m[:] = Fraction(0)
        for y in range(n):
            qy = self.q.weights[y]
            if is_zero(qy):
                continue
            for x in self._preimages[y]:
                m[y, x] = m[y, x] + self.q.weights[x] / qy
        return m


def _conservative_part(q: SignedMeasure, t: EndoMap) -> Event:
    """Union of the cycles lying entirely inside ``supp q``."""
    supp = q.support()
    ev = 0
    for cyc in orbit_structure(t).cycles:
        if all(supp >> c & 1 for c in cyc):
            for c in cyc:
                ev |= 1 << c
    return ev


def contraction_state(p: SignedMeasure, t: EndoMap) -> ContractionState:
    """State for the dominating measure built from ``p``."""
    return ContractionState.build(build_dominating(p, t), t)


def apply_U(f: Density, state: ContractionState) -> Density:
    if f.base != state.q:
        raise SpaceMismatchError("density is not based on the state's dominating measure")
    q = state.q.weights
    zero = Fraction(0) if (state.q.exact and all(isinstance(v, Fraction) for v in f.values)) else 0.0
    out = []
    for y, pre in enumerate(state._preimages):
        if is_zero(q[y]):
            out.append(zero)
            continue
        acc = zero
        for x in pre:
            acc = acc + f.values[x] * q[x]
        out.append(acc / q[y])
    return Density(state.q, out)


def power_U(f: Density, state: ContractionState, n: int) -> Density:
    for _ in range(n):
        f = apply_U(f, state)
    return f


def apply_kernel(f: Sequence[Scalar], q: Sequence[Scalar], kernel) -> list[Scalar]:
    """Transfer operator of a sub-Markov kernel ``K`` relative to ``q``.

    ``(Uf)(y) = sum_x f(x) q(x) K[x, y] / q(y)``.  Used only to exercise
    positivity and contraction on operators not induced by a point map.
    """
    n = len(q)
    out = []
    for y in range(n):
        if is_zero(q[y]):
            out.append(0 * q[y])
            continue
        out.append(sum(f[x] * q[x] * kernel[x][y] for x in range(n)) / q[y])
    return out


def iterate_orbit(f: Density, state: ContractionState) -> tuple[list[Density], list[Density]]:
    """``f, Uf, U^2 f, ...`` split into head and periodic part.

    Iterates on the induced measures (push forward, then drop mass on
    ``q``-null points) so float orbits close exactly: that step only moves
    mass, it never rescales it.
    """
    supp = state.q.support()

    def step(m: SignedMeasure) -> SignedMeasure:
        return pushforward(m, state.t, 1).restrict(supp)

    head, cycle = eventually_periodic(f.measure().restrict(supp), step)
    to_density = lambda m: radon_nikodym(m, state.q)  # noqa: E731
    return [to_density(m) for m in head], [to_density(m) for m in cycle]


def cesaro_density(head: list[Density], cycle: list[Density], n: int) -> Density:
    base = (head or cycle)[0].base
    zero = Density(base, [Fraction(0)] * base.space.size)
    total = periodic_sum(head, cycle, n, zero)
    exact = all(isinstance(v, Fraction) for v in total.values)
    return total * Fraction(1, n) if exact else total / n


@dataclass(frozen=True)
class AverageTrace:
    f1: Density
    schedule: tuple
    averages: tuple
    limit: Density

    def at(self, n: int) -> Density:
        return self.averages[self.schedule.index(n)]


def krengel_average(
    f1: Density, state: ContractionState, schedule: Sequence[int] = DEFAULT_SCHEDULE
) -> AverageTrace:
    """Cesaro averages ``A_n f1`` along ``schedule`` plus the exact limit.

    The limit is computed from the cycle structure of the map: it is the
    density of the stationary mean of ``phi(f1)``.
    """
    if not f1.is_nonnegative():
        raise ValueError("krengel_average expects a nonnegative density")
    schedule = tuple(int(n) for n in schedule)
    if not schedule or any(n < 1 for n in schedule):
        raise ValueError("schedule entries must be positive")
    head, cycle = iterate_orbit(f1, state)
    averages = tuple(cesaro_density(head, cycle, n) for n in schedule)
    limit = radon_nikodym(stationary_mean(f1.measure(), state.t), state.q)
    return AverageTrace(f1, schedule, averages, limit)


def hopf_decompose(state: ContractionState) -> tuple[Event, Event]:
    return state.hopf_C, state.hopf_D


def hopf_witness(state: ContractionState) -> Density:
    """A ``U``-invariant density that is positive exactly on the conservative part."""
    q = state.q
    vals = [Fraction(0) if q.exact else 0.0] * q.space.size
    for cyc in orbit_structure(state.t).cycles:
        if not state.hopf_C >> cyc[0] & 1:
            continue
        for c in cyc:
            vals[c] = (Fraction(1, len(cyc)) if q.exact else 1.0 / len(cyc)) / q.weights[c]
    return Density(q, vals)


@dataclass
class ConvergenceReport:
    schedule: tuple
    l1_on_C: list
    exceedance_on_D: list
    exceedance_total: list
    l1_total: list
    epsilon: float
    l1_decreasing: bool
    certificates: dict

    @property
    def first_below(self):
        for n, v in zip(self.schedule, self.l1_on_C):
            if v < self.epsilon:
                return n
        return None


def _exceedance(values: Sequence[Scalar], q: SignedMeasure, eps: float, event: Event) -> Scalar:
    zero = Fraction(0) if q.exact else 0.0
    total = zero
    for i in members(event):
        if abs(values[i]) > eps:
            total = total + q.weights[i]
    return total


def certify_stochastic(schedule: Sequence[int], exceedances: dict, grid=EPSILON_GRID) -> dict:
    """For each ``eps`` the first scheduled ``N`` after which the exceedance mass stays below ``eps``.

    ``None`` means the schedule is too short to certify that ``eps``.
    """
    out = {}
    for eps in grid:
        series = exceedances[eps]
        n_eps = None
        for k in range(len(schedule) - 1, -1, -1):
            if series[k] < eps:
                n_eps = schedule[k]
            else:
                break
        out[eps] = n_eps
    return out


def classify_convergence(trace: AverageTrace, state: ContractionState, eps: float = 1e-3) -> ConvergenceReport:
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = state.q
    C, D = state.hopf_C, state.hopf_D
    l1_C, exc_D, exc_all, l1_all = [], [], [], []
    for avg in trace.averages:
        diff = avg - trace.limit
        l1_C.append(diff.l1_norm(C))
        l1_all.append(diff.l1_norm())
        exc_D.append(_exceedance(avg.values, q, eps, D))
        exc_all.append(_exceedance(diff.values, q, eps, q.space.full))
    grid = {
        g: [_exceedance((a - trace.limit).values, q, g, q.space.full) for a in trace.averages]
        for g in EPSILON_GRID
    }
    decreasing = all(b <= a for a, b in zip(l1_C, l1_C[1:]))
    return ConvergenceReport(
        trace.schedule,
        l1_C,
        exc_D,
        exc_all,
        l1_all,
        eps,
        decreasing,
        certify_stochastic(trace.schedule, grid),
    )


def periodic_liminf(head: list[Density], cycle: list[Density]) -> Density:
    """Pointwise ``liminf_n A_n f`` from one full period after the preperiod.

    The head contributes ``O(1/n)`` and the cycle sum grows linearly, so the
    averages converge to the mean over one period; liminf equals that limit.
    """
    base = cycle[0].base
    zero = Density(base, [Fraction(0)] * base.space.size)
    total = zero
    for d in cycle:
        total = total + d
    exact = all(isinstance(v, Fraction) for v in total.values)
    return total * Fraction(1, len(cycle)) if exact else total / len(cycle)


def liminf_identity_check(trace: AverageTrace, state: ContractionState, tol: float = FLOAT_TOL) -> bool:
    """Periodic-tail liminf of ``A_n f1`` agrees with ``trace.limit`` on ``supp q``."""
    head, cycle = iterate_orbit(trace.f1, state)
    lim = periodic_liminf(head, cycle)
    supp = state.q.support()
    return all(close(lim.values[i], trace.limit.values[i], tol) for i in members(supp))


def u_power_identity(p: SignedMeasure, state: ContractionState, n_max: int = 64) -> tuple[bool, int | None]:
    """Check ``U^n (dp/dq) = d(p∘T^-n)/dq`` for ``n <= n_max``; returns first failing ``n``."""
    f = radon_nikodym(p, state.q)
    m = p
    for n in range(n_max + 1):
        if not f.isclose(radon_nikodym(m, state.q)):
            return False, n
        f = apply_U(f, state)
        m = pushforward(m, state.t, 1)
    return True, None


def contraction_gap(f: Density, state: ContractionState) -> Scalar:
    """``||f||_1 - ||Uf||_1`` (nonnegative for a contraction)."""
    return f.l1_norm() - apply_U(f, state).l1_norm()


__all__ = [
    "DEFAULT_SCHEDULE",
    "EPSILON_GRID",
    "build_dominating",
    "ContractionState",
    "contraction_state",
    "apply_U",
    "power_U",
    "apply_kernel",
    "AverageTrace",
    "krengel_average",
    "hopf_decompose",
    "hopf_witness",
    "ConvergenceReport",
    "classify_convergence",
    "certify_stochastic",
    "liminf_identity_check",
    "periodic_liminf",
    "u_power_identity",
    "contraction_gap",
    "tv_norm",
]

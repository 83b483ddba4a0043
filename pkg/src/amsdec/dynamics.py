"""Deterministic self-maps of a finite space and their Cesaro averages."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

from .measure import (
    Event,
    FiniteSpace,
    SignedMeasure,
    all_events,
    event_sup_deviation,
    members,
)
from .numeric import FLOAT_TOL, Scalar, close, eventually_periodic, fsum_exact, periodic_sum


@dataclass(frozen=True)
class EndoMap:
    """A total map ``T`` of ``space`` into itself, stored as index images."""

    space: FiniteSpace
    next: tuple

    def __post_init__(self):
        nxt = tuple(int(j) for j in self.next)
        object.__setattr__(self, "next", nxt)
        if len(nxt) != self.space.size:
            raise ValueError("map must assign an image to every point")
        if any(not 0 <= j < self.space.size for j in nxt):
            raise ValueError("map sends a point outside the space")

    @classmethod
    def from_labels(cls, space: FiniteSpace, images: Sequence[Hashable] | Mapping) -> "EndoMap":
        if isinstance(images, Mapping):
            images = [images[p] for p in space.points]
        return cls(space, tuple(space.index(y) for y in images))

    def __call__(self, i: int) -> int:
        return self.next[i]

    def iterate(self, i: int, n: int) -> int:
        for _ in range(n):
            i = self.next[i]
        return i

    def preimages(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.space.size)]
        for x, y in enumerate(self.next):
            out[y].append(x)
        return out


@dataclass(frozen=True)
class OrbitStructure:
    tail_length: tuple
    cycle_of: tuple
    cycles: tuple
    entry_point: tuple

    def cycle_length(self, i: int) -> int:
        return len(self.cycles[self.cycle_of[i]])

    @property
    def cyclic_points(self) -> Event:
        ev = 0
        for cyc in self.cycles:
            for i in cyc:
                ev |= 1 << i
        return ev


@dataclass(frozen=True)
class InvariantPartition:
    atoms: tuple

    def atom_of(self, i: int) -> int:
        for k, atom in enumerate(self.atoms):
            if atom >> i & 1:
                return k
        raise KeyError(i)

    def unions(self):
        """Every invariant event, as unions of atoms."""
        k = len(self.atoms)
        for mask in range(1 << k):
            ev = 0
            for j in range(k):
                if mask >> j & 1:
                    ev |= self.atoms[j]
            yield ev


def preimage(t: EndoMap, event: Event) -> Event:
    out = 0
    for x, y in enumerate(t.next):
        if event >> y & 1:
            out |= 1 << x
    return out


def _push_once(m: SignedMeasure, t: EndoMap) -> SignedMeasure:
    zero = Fraction(0) if m.exact else 0.0
    w = [zero] * m.space.size
    for x, y in enumerate(t.next):
        w[y] = w[y] + m.weights[x]
    return SignedMeasure(m.space, w)


def pushforward(m: SignedMeasure, t: EndoMap, n: int = 1) -> SignedMeasure:
    """The measure ``B -> m(T^-n B)``."""
    if m.space != t.space:
        raise ValueError("measure and map live on different spaces")
    if n < 0:
        raise ValueError("n must be nonnegative")
    for _ in range(n):
        m = _push_once(m, t)
    return m


def pushforward_orbit(m: SignedMeasure, t: EndoMap) -> tuple[list[SignedMeasure], list[SignedMeasure]]:
    """``m, m∘T^-1, m∘T^-2, ...`` split into its head and periodic part."""
    return eventually_periodic(m, lambda x: _push_once(x, t))


def orbit_structure(t: EndoMap) -> OrbitStructure:
    n = t.space.size
    cycle_id = [-1] * n
    cycles: list[tuple[int, ...]] = []
    state = [0] * n  # 0 unvisited, 1 on current walk, 2 done
    for s in range(n):
        if state[s]:
            continue
        path = []
        x = s
        while state[x] == 0:
            state[x] = 1
            path.append(x)
            x = t.next[x]
        if state[x] == 1:
            k = path.index(x)
            cyc = tuple(path[k:])
            for c in cyc:
                cycle_id[c] = len(cycles)
            cycles.append(cyc)
        for p in path:
            state[p] = 2
    tail = [0] * n
    cyc_of = [0] * n
    entry = [0] * n
    for s in range(n):
        x, k = s, 0
        while cycle_id[x] < 0:
            x = t.next[x]
            k += 1
        tail[s], cyc_of[s], entry[s] = k, cycle_id[x], x
    return OrbitStructure(tuple(tail), tuple(cyc_of), tuple(cycles), tuple(entry))


def invariant_atoms(t: EndoMap) -> InvariantPartition:
    """Weakly connected components of the functional graph ``x -> T(x)``."""
    n = t.space.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for x, y in enumerate(t.next):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)
    groups: dict[int, Event] = {}
    for i in range(n):
        r = find(i)
        groups[r] = groups.get(r, 0) | (1 << i)
    return InvariantPartition(tuple(groups[r] for r in sorted(groups)))


def is_invariant_event(t: EndoMap, event: Event) -> bool:
    return preimage(t, event) == event


def cesaro_average(p: SignedMeasure, t: EndoMap, n: int) -> SignedMeasure:
    """``(1/n) sum_{k<n} p∘T^-k``, exact via the periodic structure of the orbit."""
    if n < 1:
        raise ValueError("n must be at least 1")
    head, cycle = pushforward_orbit(p, t)
    total = periodic_sum(head, cycle, n, SignedMeasure.zero(p.space))
    return total / n if not p.exact else total * Fraction(1, n)


def stationary_mean(p: SignedMeasure, t: EndoMap) -> SignedMeasure:
    """Closed-form Cesaro limit: each point's mass spreads uniformly over its cycle."""
    orbits = orbit_structure(t)
    exact = p.exact
    zero = Fraction(0) if exact else 0.0
    w = [zero] * p.space.size
    for x, mass in enumerate(p.weights):
        cyc = orbits.cycles[orbits.cycle_of[x]]
        share = mass * Fraction(1, len(cyc)) if exact else mass / len(cyc)
        for c in cyc:
            w[c] = w[c] + share
    return SignedMeasure(p.space, w)


def is_stationary(p: SignedMeasure, t: EndoMap, tol: float = FLOAT_TOL) -> bool:
    return p.isclose(_push_once(p, t), tol)


def is_ams(p: SignedMeasure, t: EndoMap, eps: float, horizon: int) -> bool:
    """Whether the Cesaro average at ``horizon`` is ``eps``-close to the mean uniformly over events."""
    if eps <= 0 or horizon < 1:
        raise ValueError("need eps > 0 and horizon >= 1")
    dev = event_sup_deviation(cesaro_average(p, t, horizon), stationary_mean(p, t))
    return dev < eps


def orbit_constant(p: SignedMeasure, t: EndoMap) -> Scalar:
    """Bound ``K`` with ``n * sup_B |P_n(B) - Pbar(B)| <= K`` for every ``n >= 1``.

    A point with tail length ``tau`` feeding a cycle of length ``l``
    contributes at most ``tau + l/2``, weighted by its mass.
    """
    orbits = orbit_structure(t)
    return fsum_exact(
        abs(w) * (orbits.tail_length[x] + Fraction(orbits.cycle_length(x), 2))
        for x, w in enumerate(p.weights)
    )


def ams_horizon(p: SignedMeasure, t: EndoMap, eps: float) -> int:
    """Smallest ``n`` for which :func:`orbit_constant` guarantees deviation below ``eps``."""
    k = orbit_constant(p, t)
    return max(1, math.floor(Fraction(k) / Fraction(eps)) + 1)


def invariant_integrals(
    g: Sequence[Scalar], p: SignedMeasure, t: EndoMap, n: int, q: SignedMeasure | None = None
) -> dict[str, Scalar]:
    """Integrals of ``g`` against ``p``, ``p∘T^-n``, ``P_n``, the stationary mean and ``q``.

    For ``g`` constant on invariant atoms all values coincide.
    """

    def integral(m: SignedMeasure) -> Scalar:
        return fsum_exact(gi * wi for gi, wi in zip(g, m.weights))

    out = {
        "p": integral(p),
        "pushforward": integral(pushforward(p, t, n)),
        "cesaro": integral(cesaro_average(p, t, max(n, 1))),
        "stationary_mean": integral(stationary_mean(p, t)),
    }
    if q is not None:
        out["dominating"] = integral(q)
    return out


def invariant_integral_identity(
    g: Sequence[Scalar], p: SignedMeasure, t: EndoMap, n: int, q: SignedMeasure | None = None
) -> tuple[bool, Scalar]:
    vals = list(invariant_integrals(g, p, t, n, q).values())
    dev = max(abs(v - vals[0]) for v in vals)
    return all(close(v, vals[0]) for v in vals), dev


def invariant_events_brute_force(t: EndoMap) -> list[Event]:
    """All events with ``T^-1 B = B`` by enumeration (oracle, small spaces only)."""
    return [ev for ev in all_events(t.space) if preimage(t, ev) == ev]


def atom_cycles(t: EndoMap, partition: InvariantPartition | None = None) -> list[list[tuple[int, ...]]]:
    """Cycles contained in each atom; a functional-graph component holds exactly one."""
    partition = partition or invariant_atoms(t)
    orbits = orbit_structure(t)
    return [
        [cyc for cyc in orbits.cycles if atom >> cyc[0] & 1] for atom in partition.atoms
    ]


__all__ = [
    "EndoMap",
    "OrbitStructure",
    "InvariantPartition",
    "preimage",
    "pushforward",
    "pushforward_orbit",
    "orbit_structure",
    "invariant_atoms",
    "is_invariant_event",
    "cesaro_average",
    "stationary_mean",
    "is_stationary",
    "is_ams",
    "orbit_constant",
    "ams_horizon",
    "invariant_integrals",
    "invariant_integral_identity",
    "invariant_events_brute_force",
    "atom_cycles",
    "members",
]

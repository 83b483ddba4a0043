"""Finite signed measures, densities and the total-variation toolkit.

Everything lives on a :class:`FiniteSpace` whose event algebra is the full
power set.  Events are integer bitsets over point indices: bit ``i`` set
means point ``i`` belongs to the event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Iterator, Sequence

from .numeric import FLOAT_TOL, Scalar, close, fsum_exact, is_exact, is_zero

Event = int

MAX_ENUMERATION = 20


class AmsdecError(Exception):
    """Base class for library errors."""


class InvalidMeasureError(AmsdecError, ValueError):
    pass


class SpaceMismatchError(AmsdecError, ValueError):
    pass


class NoDensityError(AmsdecError, ValueError):
    """Raised when the would-be density has mass on a null point of the base."""

    def __init__(self, point, message: str | None = None):
        self.point = point
        super().__init__(message or f"measure charges point {point!r} which has zero base mass")


@dataclass(frozen=True)
class FiniteSpace:
    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("a finite space needs at least one point")
        if len(set(pts)) != len(pts):
            raise ValueError("point labels must be unique")

    @classmethod
    def of_size(cls, n: int) -> "FiniteSpace":
        return cls(tuple(range(n)))

    @property
    def size(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def index(self, label: Hashable) -> int:
        try:
            return self.points.index(label)
        except ValueError:
            raise KeyError(f"{label!r} is not a point of this space") from None

    @property
    def full(self) -> Event:
        return (1 << self.size) - 1

    def event(self, labels: Iterable[Hashable]) -> Event:
        """Bitset of the given point labels."""
        ev = 0
        for label in labels:
            ev |= 1 << self.index(label)
        return ev

    def labels(self, event: Event) -> list:
        return [self.points[i] for i in members(event)]


def members(event: Event) -> list[int]:
    """Indices set in a bitset, ascending."""
    out = []
    i = 0
    while event:
        if event & 1:
            out.append(i)
        event >>= 1
        i += 1
    return out


def all_events(space: FiniteSpace) -> range:
    """Every event of ``space`` as a bitset; gated to ``|space| <= 20``."""
    if space.size > MAX_ENUMERATION:
        raise ValueError(
            f"brute-force event enumeration is limited to {MAX_ENUMERATION} points"
        )
    return range(1 << space.size)


def _check_scalar(x) -> Scalar:
    if isinstance(x, bool):
        raise InvalidMeasureError("boolean weight")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    try:
        xf = float(x)
    except (TypeError, ValueError):
        raise InvalidMeasureError(f"weight {x!r} is not numeric") from None
    if not math.isfinite(xf):
        raise InvalidMeasureError(f"non-finite weight {x!r}")
    return xf


class SignedMeasure:
    """A finite signed measure given by its point weights.

    Weights are either all exact (:class:`~fractions.Fraction`) or contain
    floats; integers are promoted to fractions.  Instances are immutable
    and support ``+``, ``-`` and multiplication by scalars.
    """

    __slots__ = ("space", "weights")

    def __init__(self, space: FiniteSpace, weights: Sequence[Scalar]):
        weights = tuple(_check_scalar(w) for w in weights)
        if len(weights) != space.size:
            raise InvalidMeasureError(
                f"expected {space.size} weights, got {len(weights)}"
            )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "weights", weights)

    def __setattr__(self, name, value):
        raise AttributeError("SignedMeasure is immutable")

    @classmethod
    def zero(cls, space: FiniteSpace) -> "SignedMeasure":
        return cls(space, [Fraction(0)] * space.size)

    @classmethod
    def dirac(cls, space: FiniteSpace, label: Hashable) -> "SignedMeasure":
        w = [Fraction(0)] * space.size
        w[space.index(label)] = Fraction(1)
        return cls(space, w)

    @classmethod
    def uniform(cls, space: FiniteSpace) -> "SignedMeasure":
        return cls(space, [Fraction(1, space.size)] * space.size)

    @property
    def exact(self) -> bool:
        return is_exact(*self.weights)

    def __getitem__(self, label: Hashable) -> Scalar:
        return self.weights[self.space.index(label)]

    def __call__(self, event: Event) -> Scalar:
        return self.mass(event)

    def mass(self, event: Event) -> Scalar:
        return fsum_exact(self.weights[i] for i in members(event))

    def total_mass(self) -> Scalar:
        return fsum_exact(self.weights)

    def event_masses(self) -> list[Scalar]:
        """Mass of every event, indexed by bitset (subset-sum recursion)."""
        n = self.space.size
        if n > MAX_ENUMERATION:
            raise ValueError("event enumeration is limited to 20 points")
        out = [Fraction(0) if self.exact else 0.0] * (1 << n)
        for ev in range(1, 1 << n):
            low = (ev & -ev).bit_length() - 1
            out[ev] = out[ev & (ev - 1)] + self.weights[low]
        return out

    def support(self, tol: float = FLOAT_TOL) -> Event:
        ev = 0
        for i, w in enumerate(self.weights):
            if not is_zero(w, tol):
                ev |= 1 << i
        return ev

    def restrict(self, event: Event) -> "SignedMeasure":
        zero = Fraction(0) if self.exact else 0.0
        return SignedMeasure(
            self.space,
            [w if event >> i & 1 else zero for i, w in enumerate(self.weights)],
        )

    def is_nonnegative(self, tol: float = FLOAT_TOL) -> bool:
        return all(w >= 0 or close(w, 0, tol) for w in self.weights)

    def is_probability(self, tol: float = FLOAT_TOL) -> bool:
        return self.is_nonnegative(tol) and close(self.total_mass(), 1, tol)

    def _same_space(self, other: "SignedMeasure"):
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError("measures live on different spaces")

    def __add__(self, other):
        if self._same_space(other) is NotImplemented:
            return NotImplemented
        return SignedMeasure(self.space, [a + b for a, b in zip(self.weights, other.weights)])

    def __sub__(self, other):
        if self._same_space(other) is NotImplemented:
            return NotImplemented
        return SignedMeasure(self.space, [a - b for a, b in zip(self.weights, other.weights)])

    def __neg__(self):
        return SignedMeasure(self.space, [-w for w in self.weights])

    def __mul__(self, c):
        if isinstance(c, SignedMeasure):
            return NotImplemented
        return SignedMeasure(self.space, [c * w for w in self.weights])

    __rmul__ = __mul__

    def __truediv__(self, c):
        return SignedMeasure(self.space, [w / c for w in self.weights])

    def __eq__(self, other):
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return self.space == other.space and self.weights == other.weights

    def __hash__(self):
        return hash((self.space, self.weights))

    def isclose(self, other: "SignedMeasure", tol: float = FLOAT_TOL) -> bool:
        self._same_space(other)
        return all(close(a, b, tol) for a, b in zip(self.weights, other.weights))

    def max_abs_diff(self, other: "SignedMeasure") -> Scalar:
        self._same_space(other)
        return max(abs(a - b) for a, b in zip(self.weights, other.weights))

    def to_float(self) -> "SignedMeasure":
        return SignedMeasure(self.space, [float(w) for w in self.weights])

    def __repr__(self):
        from .numeric import format_scalar

        body = ", ".join(format_scalar(w) for w in self.weights)
        return f"SignedMeasure({body})"


# A probability measure is a SignedMeasure satisfying is_probability(); the
# alias documents intent in signatures.
ProbabilityMeasure = SignedMeasure


def probability(space: FiniteSpace, weights: Sequence[Scalar], tol: float = FLOAT_TOL) -> SignedMeasure:
    """Build a measure and insist that it is a probability measure."""
    m = SignedMeasure(space, weights)
    if not m.is_probability(tol):
        raise InvalidMeasureError(
            f"weights {list(map(str, m.weights))} do not form a probability vector"
        )
    return m


@dataclass(frozen=True)
class JordanParts:
    positive: SignedMeasure
    negative: SignedMeasure
    total_variation: SignedMeasure


def jordan_decompose(m: SignedMeasure) -> JordanParts:
    """Split ``m`` into disjointly supported nonnegative parts."""
    zero = Fraction(0) if m.exact else 0.0
    pos = [w if w > 0 else zero for w in m.weights]
    neg = [-w if w < 0 else zero for w in m.weights]
    return JordanParts(
        SignedMeasure(m.space, pos),
        SignedMeasure(m.space, neg),
        SignedMeasure(m.space, [a + b for a, b in zip(pos, neg)]),
    )


def tv_norm(m: SignedMeasure) -> Scalar:
    return fsum_exact(abs(w) for w in m.weights)


def event_sup_deviation(a: SignedMeasure, b: SignedMeasure) -> Scalar:
    """``sup_B |a(B) - b(B)|``, attained at the set where ``a > b``."""
    if a.space != b.space:
        raise SpaceMismatchError("measures live on different spaces")
    up = fsum_exact(max(x - y, 0) for x, y in zip(a.weights, b.weights))
    down = fsum_exact(max(y - x, 0) for x, y in zip(a.weights, b.weights))
    return max(up, down)


def dominates(q: SignedMeasure, m: SignedMeasure, tol: float = FLOAT_TOL) -> bool:
    if q.space != m.space:
        raise SpaceMismatchError("measures live on different spaces")
    return all(
        not (is_zero(wq, tol) and not is_zero(wm, tol))
        for wq, wm in zip(q.weights, m.weights)
    )


class Density:
    """A function on the space, read as a density against ``base``.

    The canonical version vanishes on base-null points.
    """

    __slots__ = ("base", "values")

    def __init__(self, base: SignedMeasure, values: Sequence[Scalar]):
        values = tuple(_check_scalar(v) for v in values)
        if len(values) != base.space.size:
            raise InvalidMeasureError("density length does not match its space")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("Density is immutable")

    @property
    def space(self) -> FiniteSpace:
        return self.base.space

    def __getitem__(self, label):
        return self.values[self.space.index(label)]

    def measure(self) -> SignedMeasure:
        """The induced signed measure ``B -> integral of the density over B``."""
        return SignedMeasure(
            self.space, [v * q for v, q in zip(self.values, self.base.weights)]
        )

    def integrate(self, event: Event | None = None) -> Scalar:
        m = self.measure()
        return m.total_mass() if event is None else m.mass(event)

    def l1_norm(self, event: Event | None = None) -> Scalar:
        ev = self.space.full if event is None else event
        return fsum_exact(
            abs(self.values[i]) * self.base.weights[i] for i in members(ev)
        )

    def _check(self, other: "Density"):
        if other.base != self.base:
            raise SpaceMismatchError("densities have different base measures")

    def __add__(self, other: "Density"):
        self._check(other)
        return Density(self.base, [a + b for a, b in zip(self.values, other.values)])

    def __sub__(self, other: "Density"):
        self._check(other)
        return Density(self.base, [a - b for a, b in zip(self.values, other.values)])

    def __mul__(self, c):
        return Density(self.base, [c * v for v in self.values])

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Density(self.base, [v / c for v in self.values])

    def __eq__(self, other):
        if not isinstance(other, Density):
            return NotImplemented
        return self.base == other.base and self.values == other.values

    def __hash__(self):
        return hash((self.base, self.values))

    def isclose(self, other: "Density", tol: float = FLOAT_TOL) -> bool:
        self._check(other)
        return all(close(a, b, tol) for a, b in zip(self.values, other.values))

    def is_nonnegative(self, tol: float = FLOAT_TOL) -> bool:
        return all(v >= 0 or close(v, 0, tol) for v in self.values)

    def __repr__(self):
        from .numeric import format_scalar

        return "Density(" + ", ".join(format_scalar(v) for v in self.values) + ")"


def radon_nikodym(m: SignedMeasure, q: SignedMeasure, tol: float = FLOAT_TOL) -> Density:
    """Pointwise density ``dm/dq``, zero on ``q``-null points."""
    if m.space != q.space:
        raise SpaceMismatchError("measures live on different spaces")
    zero = Fraction(0) if (m.exact and q.exact) else 0.0
    values = []
    for label, wm, wq in zip(m.space.points, m.weights, q.weights):
        if is_zero(wq, tol):
            if not is_zero(wm, tol):
                raise NoDensityError(label)
            values.append(zero)
        else:
            values.append(wm / wq)
    return Density(q, values)


def phi(f: Density) -> SignedMeasure:
    """The isometry sending a density to the signed measure it induces."""
    return f.measure()


def phi_isometry_check(f: Density) -> tuple[Scalar, Scalar]:
    """Return ``(||f||_1, ||phi(f)||_TV)``; the two agree for every density."""
    return f.l1_norm(), tv_norm(phi(f))


def mixture(terms: Iterable[tuple[Scalar, SignedMeasure]], tol: float = FLOAT_TOL) -> SignedMeasure:
    """Convex combination of probability measures on one space."""
    terms = list(terms)
    if not terms:
        raise InvalidMeasureError("empty mixture")
    space = terms[0][1].space
    for _, m in terms:
        if m.space != space:
            raise SpaceMismatchError("mixture terms live on different spaces")
    weights = [w for w, _ in terms]
    if any(w < 0 and not is_zero(w, tol) for w in weights):
        raise InvalidMeasureError("negative mixture weight")
    if not close(fsum_exact(weights), 1, tol):
        raise InvalidMeasureError(f"mixture weights sum to {fsum_exact(weights)}, not 1")
    out = SignedMeasure.zero(space)
    for w, m in terms:
        out = out + w * m
    return out


def brute_force_sup_deviation(a: SignedMeasure, b: SignedMeasure) -> Scalar:
    """Enumerate every event; the verification oracle for small spaces."""
    ma, mb = a.event_masses(), b.event_masses()
    return max(abs(x - y) for x, y in zip(ma, mb))


def geometric_tail(head: Sequence[SignedMeasure], cycle: Sequence[SignedMeasure]) -> SignedMeasure:
    """``sum_{n>=0} 2^(-n-1) x_n`` for an eventually periodic sequence ``x``.

    The periodic tail is summed in closed form, so the result is exact when
    the terms are.
    """
    space = (head or cycle)[0].space
    out = SignedMeasure.zero(space)
    for n, m in enumerate(head):
        out = out + Fraction(1, 2 ** (n + 1)) * m
    h, p = len(head), len(cycle)
    ratio = Fraction(2**p, 2**p - 1)
    for j, m in enumerate(cycle):
        out = out + (Fraction(1, 2 ** (h + j + 1)) * ratio) * m
    return out


def truncated_geometric(terms: Iterator[SignedMeasure], n_terms: int) -> tuple[SignedMeasure, float]:
    """Fallback: first ``n_terms`` of the geometric series plus its error bound ``2^-N``."""
    out = None
    for n, m in zip(range(n_terms), terms):
        out = (Fraction(1, 2 ** (n + 1)) * m) if out is None else out + Fraction(1, 2 ** (n + 1)) * m
    if out is None:
        raise ValueError("need at least one term")
    return out, 2.0**-n_terms

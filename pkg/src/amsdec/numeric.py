"""Scalar handling shared by every module.

Two numeric modes coexist: exact rationals (:class:`fractions.Fraction`)
and float64.  Arithmetic is plain Python arithmetic, so a value stays
exact as long as every operand is exact; comparisons fall back to an
absolute tolerance as soon as a float is involved.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Callable, Hashable, Iterable, Sequence, TypeVar, Union

import numpy as np

Scalar = Union[Fraction, int, float]

FLOAT_TOL = 1e-9

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

T = TypeVar("T", bound=Hashable)


def is_exact(*values: Scalar) -> bool:
    return all(isinstance(v, Rational) for v in values)


def close(a: Scalar, b: Scalar, tol: float = FLOAT_TOL) -> bool:
    """Exact equality for rationals, absolute tolerance otherwise."""
    if is_exact(a, b):
        return a == b
    return abs(float(a) - float(b)) <= tol


def is_zero(a: Scalar, tol: float = FLOAT_TOL) -> bool:
    return close(a, 0, tol)


def parse_scalar(value, mode: str = RATIONAL) -> Scalar:
    """Convert a document value (number or ``"p/q"`` string) to a scalar.

    In rational mode floats are converted through their decimal
    representation, so ``0.1`` becomes ``1/10`` rather than the binary
    expansion of the double.
    """
    if mode not in MODES:
        raise ValueError(f"unknown numeric mode {mode!r}")
    if isinstance(value, bool):
        raise TypeError("booleans are not numeric weights")
    if mode == FLOAT:
        if isinstance(value, str):
            return float(Fraction(value.strip()))
        return float(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


def to_mode(value: Scalar, mode: str) -> Scalar:
    if mode == FLOAT:
        return float(value)
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


def format_scalar(value: Scalar) -> str:
    """Exact fractions print as ``p/q``; floats with 12 significant digits."""
    if isinstance(value, Rational):
        value = Fraction(value)
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return f"{float(value):.12g}"


def eventually_periodic(
    start: T, step: Callable[[T], T], max_steps: int = 1_000_000
) -> tuple[list[T], list[T]]:
    """Split the orbit ``start, step(start), ...`` into head and cycle.

    Returns ``(head, cycle)`` such that the orbit is ``head`` followed by
    ``cycle`` repeated forever.  Elements must be hashable and the orbit
    must revisit a value within ``max_steps``.
    """
    seen: dict[T, int] = {}
    orbit: list[T] = []
    x = start
    while x not in seen:
        if len(orbit) >= max_steps:
            raise RuntimeError("orbit did not close within max_steps")
        seen[x] = len(orbit)
        orbit.append(x)
        x = step(x)
    k = seen[x]
    return orbit[:k], orbit[k:]


def periodic_sum(head: Sequence, cycle: Sequence, n: int, zero, add=None):
    """Sum of the first ``n`` terms of an eventually periodic sequence.

    Runs in ``O(len(head) + len(cycle))`` regardless of ``n``.  ``add``
    defaults to ``+``; ``zero`` is the additive identity and ``scale``
    for repeated cycles is done through integer multiplication.
    """
    if add is None:
        add = lambda a, b: a + b  # noqa: E731
    total = zero
    h = min(n, len(head))
    for term in head[:h]:
        total = add(total, term)
    rest = n - h
    if rest <= 0:
        return total
    p = len(cycle)
    reps, partial = divmod(rest, p)
    if reps:
        cyc = zero
        for term in cycle:
            cyc = add(cyc, term)
        total = add(total, reps * cyc)
    for term in cycle[:partial]:
        total = add(total, term)
    return total


def solve_linear(a: Sequence[Sequence[Scalar]], b: Sequence[Sequence[Scalar]]):
    """Solve ``a @ x = b`` (``b`` may have several columns).

    Exact Gauss-Jordan elimination when every entry is rational,
    :func:`numpy.linalg.solve` otherwise.  Returns a list of rows.
    """
    n = len(a)
    if n == 0:
        return []
    exact = all(is_exact(*row) for row in a) and all(is_exact(*row) for row in b)
    if not exact:
        x = np.linalg.solve(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        return [list(map(float, row)) for row in x]
    m = len(b[0])
    aug = [
        [Fraction(v) for v in a[i]] + [Fraction(v) for v in b[i]] for i in range(n)
    ]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise np.linalg.LinAlgError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        piv = aug[col][col]
        aug[col] = [v / piv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [vr - factor * vc for vr, vc in zip(aug[r], aug[col])]
    return [row[n : n + m] for row in aug]


def fsum_exact(values: Iterable[Scalar]) -> Scalar:
    """Sum that stays exact for rationals and uses :func:`math.fsum` for floats."""
    values = list(values)
    if is_exact(*values):
        return sum(values, Fraction(0))
    return math.fsum(float(v) for v in values)

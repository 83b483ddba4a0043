"""Finite-alphabet one-sided shift sources driven by a Markov chain.

A :class:`MarkovSource` emits ``emission[state]`` at every step (the state
itself when no emission map is given).  Its recurrent classes are the
ergodic components of the shift measure; the Cesaro limit of the chain
gives the stationary mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .measure import AmsdecError
from .numeric import FLOAT_TOL, Scalar, close, fsum_exact, is_exact, is_zero, solve_linear

DEFAULT_BUDGET = 2**20
DEFAULT_ENTROPY_DEPTH = 8


class InvalidSourceError(AmsdecError, ValueError):
    pass


class BudgetError(AmsdecError):
    """Raised when ``|A|^L`` exceeds the cylinder budget."""

    def __init__(self, depth: int, alphabet_size: int, budget: int):
        self.depth = depth
        self.budget = budget
        self.fits = max_depth_within(alphabet_size, budget)
        super().__init__(
            f"depth {depth} needs {alphabet_size}^{depth} cylinders, over the budget of {budget}; "
            f"largest depth that fits is {self.fits}"
        )


def max_depth_within(alphabet_size: int, budget: int) -> int:
    if alphabet_size <= 1:
        return budget
    L = 0
    while alphabet_size ** (L + 1) <= budget:
        L += 1
    return L


def _vec(values, exact: bool) -> np.ndarray:
    if exact:
        return np.array([Fraction(v) for v in values], dtype=object)
    return np.array([float(v) for v in values], dtype=float)


@dataclass(frozen=True)
class MarkovSource:
    states: tuple
    transition: tuple
    initial: tuple
    emission: tuple | None = None

    def __post_init__(self):
        states = tuple(self.states)
        n = len(states)
        if n == 0 or len(set(states)) != n:
            raise InvalidSourceError("states must be a nonempty list of unique labels")
        trans = tuple(tuple(row) for row in self.transition)
        init = tuple(self.initial)
        if len(trans) != n or any(len(r) != n for r in trans):
            raise InvalidSourceError(f"transition must be {n}x{n}")
        for i, row in enumerate(trans):
            if any(v < 0 and not is_zero(v) for v in row):
                raise InvalidSourceError(f"transition row {i} ({states[i]!r}) has a negative entry")
            s = fsum_exact(row)
            if not close(s, 1):
                raise InvalidSourceError(
                    f"transition row {i} ({states[i]!r}) sums to {float(s):g}, not 1"
                )
        if len(init) != n:
            raise InvalidSourceError(f"initial must have {n} entries")
        if any(v < 0 and not is_zero(v) for v in init) or not close(fsum_exact(init), 1):
            raise InvalidSourceError(f"initial distribution sums to {float(fsum_exact(init)):g}, not 1")
        emission = self.emission
        if emission is not None:
            emission = tuple(emission)
            if len(emission) != n:
                raise InvalidSourceError("emission must give a symbol for every state")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transition", trans)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "emission", emission)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def exact(self) -> bool:
        return all(is_exact(*r) for r in self.transition) and is_exact(*self.initial)

    def emit(self, i: int) -> Hashable:
        return self.states[i] if self.emission is None else self.emission[i]

    @property
    def alphabet(self) -> tuple:
        seen = []
        for i in range(self.n_states):
            s = self.emit(i)
            if s not in seen:
                seen.append(s)
        return tuple(seen)

    @property
    def hidden(self) -> bool:
        """True when distinct states share an output symbol."""
        return len(self.alphabet) < self.n_states

    def matrix(self) -> np.ndarray:
        if self.exact:
            return np.array([[Fraction(v) for v in r] for r in self.transition], dtype=object)
        return np.array(self.transition, dtype=float)

    def initial_vector(self) -> np.ndarray:
        return _vec(self.initial, self.exact)

    def with_initial(self, initial: Sequence[Scalar]) -> "MarkovSource":
        return replace(self, initial=tuple(initial))

    def symbol_masks(self) -> dict:
        masks = {}
        for a in self.alphabet:
            masks[a] = np.array([self.emit(i) == a for i in range(self.n_states)])
        return masks


@dataclass(frozen=True)
class CylinderMarginal:
    depth: int
    dist: dict

    def prob(self, pattern: Sequence) -> Scalar:
        return self.dist.get(tuple(pattern), 0)

    def total(self) -> Scalar:
        return fsum_exact(self.dist.values())


def _check_budget(src: MarkovSource, L: int, budget: int):
    if L < 1:
        raise ValueError("depth must be at least 1")
    k = len(src.alphabet)
    if k**L > budget:
        raise BudgetError(L, k, budget)


def _forward_strings(src: MarkovSource, start: np.ndarray, L: int):
    """Yield ``(string, alpha)`` for every output string of length ``L`` with nonzero probability."""
    P = src.matrix()
    masks = src.symbol_masks()
    zero = Fraction(0) if src.exact else 0.0

    def extend(prefix, alpha, depth):
        if depth == L:
            yield prefix, alpha
            return
        nxt = alpha.dot(P) if depth else alpha
        for a, mask in masks.items():
            beta = np.where(mask, nxt, zero)
            if all(is_zero(v, 0.0) for v in beta):
                continue
            yield from extend(prefix + (a,), beta, depth + 1)

    yield from extend((), start, 0)


def marginal(src: MarkovSource, L: int, budget: int = DEFAULT_BUDGET, start=None) -> CylinderMarginal:
    """Exact joint law of the first ``L`` output symbols."""
    _check_budget(src, L, budget)
    start = src.initial_vector() if start is None else start
    dist = {}
    for s, alpha in _forward_strings(src, start, L):
        dist[s] = fsum_exact(alpha)
    return CylinderMarginal(L, dist)


def propagate(src: MarkovSource, i: int, start=None) -> np.ndarray:
    """Distribution of the hidden state at time ``i``."""
    v = src.initial_vector() if start is None else start
    P = src.matrix()
    for _ in range(i):
        v = v.dot(P)
    return v


def shifted_cylinder_prob(src: MarkovSource, pattern: Sequence, i: int, budget: int = DEFAULT_BUDGET) -> Scalar:
    """``P(X_i ... X_{i+L-1} = pattern)``."""
    if i < 0:
        raise ValueError("shift must be nonnegative")
    pattern = tuple(pattern)
    _check_budget(src, len(pattern), budget)
    v = propagate(src, i)
    P = src.matrix()
    masks = src.symbol_masks()
    zero = Fraction(0) if src.exact else 0.0
    for k, a in enumerate(pattern):
        if a not in masks:
            return zero
        if k:
            v = v.dot(P)
        v = np.where(masks[a], v, zero)
    return fsum_exact(v)


@dataclass(frozen=True)
class RecurrentClass:
    states: tuple
    weight: Scalar
    stationary: tuple
    entropy_rate: float | None = None


@dataclass(frozen=True)
class SourceDecomposition:
    classes: tuple
    transient: tuple
    absorption: tuple

    @property
    def weights(self) -> list:
        return [c.weight for c in self.classes]


def communication_classes(src: MarkovSource) -> tuple[list[tuple[int, ...]], list[int]]:
    """Closed communicating classes and transient states (indices)."""
    adj = np.array([[0 if is_zero(v, 0.0) else 1 for v in r] for r in src.transition])
    _, labels = connected_components(adj, directed=True, connection="strong")
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    closed, transient = [], []
    for members_ in sorted(groups.values()):
        inside = set(members_)
        leaves = any(adj[i, j] and j not in inside for i in members_ for j in range(src.n_states))
        if leaves:
            transient.extend(members_)
        else:
            closed.append(tuple(members_))
    return closed, sorted(transient)


def class_stationary(src: MarkovSource, cls: Sequence[int]) -> list[Scalar]:
    """Unique stationary law of the chain restricted to an irreducible closed class."""
    k = len(cls)
    P = [[src.transition[i][j] for j in cls] for i in cls]
    one = Fraction(1) if src.exact else 1.0
    zero = one - one
    # pi (P - I) = 0 with one equation replaced by normalisation
    a = [[P[j][i] - (one if i == j else zero) for j in range(k)] for i in range(k)]
    a[-1] = [one] * k
    b = [[zero] for _ in range(k - 1)] + [[one]]
    sol = solve_linear(a, b)
    return [row[0] for row in sol]


def absorption_probabilities(src: MarkovSource, closed: list, transient: list) -> list[list[Scalar]]:
    """``A[s][c]`` = probability of ending in class ``c`` from state ``s``."""
    n = src.n_states
    one = Fraction(1) if src.exact else 1.0
    zero = one - one
    A = [[zero] * len(closed) for _ in range(n)]
    for c, cls in enumerate(closed):
        for s in cls:
            A[s][c] = one
    if transient and closed:
        idx = {s: k for k, s in enumerate(transient)}
        m = len(transient)
        lhs = [[(one if i == j else zero) - src.transition[transient[i]][transient[j]] for j in range(m)] for i in range(m)]
        rhs = [
            [fsum_exact([src.transition[s][r] for r in cls] or [zero]) for cls in closed]
            for s in transient
        ]
        sol = solve_linear(lhs, rhs)
        for s in transient:
            A[s] = list(sol[idx[s]])
    return A


def markov_entropy_rate(src: MarkovSource, cls: Sequence[int], pi: Sequence[Scalar]) -> float:
    """``-sum_s pi(s) sum_s' p(s,s') log2 p(s,s')`` over the class, in bits."""
    h = 0.0
    for s, w in zip(cls, pi):
        row = src.transition[s]
        h -= float(w) * math.fsum(float(p) * math.log2(float(p)) for p in row if float(p) > 0)
    return h + 0.0


def recurrent_classes(src: MarkovSource) -> SourceDecomposition:
    closed, transient = communication_classes(src)
    A = absorption_probabilities(src, closed, transient)
    classes = []
    for c, cls in enumerate(closed):
        w = fsum_exact(src.initial[s] * A[s][c] for s in range(src.n_states))
        pi = class_stationary(src, cls)
        rate = None if src.hidden else markov_entropy_rate(src, cls, pi)
        classes.append(RecurrentClass(tuple(cls), w, tuple(pi), rate))
    return SourceDecomposition(tuple(classes), tuple(transient), tuple(tuple(r) for r in A))


def cesaro_limit_matrix(src: MarkovSource, decomp: SourceDecomposition | None = None) -> list[list[Scalar]]:
    """``Pi[s, :] = sum_c A[s, c] * pi_c``, the Cesaro limit of the powers of the transition matrix."""
    decomp = decomp or recurrent_classes(src)
    n = src.n_states
    zero = Fraction(0) if src.exact else 0.0
    Pi = [[zero] * n for _ in range(n)]
    for s in range(n):
        for c, cls in enumerate(decomp.classes):
            a = decomp.absorption[s][c]
            if is_zero(a, 0.0):
                continue
            for j, pj in zip(cls.states, cls.stationary):
                Pi[s][j] = Pi[s][j] + a * pj
    return Pi


def stationary_mean_source(src: MarkovSource, decomp: SourceDecomposition | None = None) -> MarkovSource:
    Pi = cesaro_limit_matrix(src, decomp)
    n = src.n_states
    init = [fsum_exact(src.initial[s] * Pi[s][j] for s in range(n)) for j in range(n)]
    return src.with_initial(init)


def class_source(src: MarkovSource, cls: RecurrentClass) -> MarkovSource:
    """The source started in the stationary law of one recurrent class."""
    zero = Fraction(0) if src.exact else 0.0
    init = [zero] * src.n_states
    for s, p in zip(cls.states, cls.stationary):
        init[s] = p
    return src.with_initial(init)


def conditioned_source(src: MarkovSource, cls: RecurrentClass) -> MarkovSource:
    """The source conditioned on starting inside ``cls`` (initial restricted and renormalised)."""
    zero = Fraction(0) if src.exact else 0.0
    mass = fsum_exact(src.initial[s] for s in cls.states)
    init = [src.initial[s] / mass if s in cls.states else zero for s in range(src.n_states)]
    return src.with_initial(init)


def _entropy_bits(probs: Iterable[Scalar]) -> float:
    return -math.fsum(float(p) * math.log2(float(p)) for p in probs if float(p) > 0) + 0.0


def block_entropy(src: MarkovSource, L: int, budget: int = DEFAULT_BUDGET) -> float:
    """``H(X_0 ... X_{L-1})`` in bits."""
    return _entropy_bits(marginal(src, L, budget).dist.values())


def _conditional_block_entropy(src: MarkovSource, L: int, budget: int) -> float:
    """``H(X_1 ... X_L | S_1)`` for the source's initial law."""
    h = 0.0
    zero = Fraction(0) if src.exact else 0.0
    for s, w in enumerate(src.initial):
        if is_zero(w, 0.0):
            continue
        start = np.array([zero] * src.n_states, dtype=object if src.exact else float)
        start[s] = Fraction(1) if src.exact else 1.0
        h += float(w) * _entropy_bits(marginal(src, L, budget, start=start).dist.values())
    return h


def hidden_entropy_bounds(src: MarkovSource, L: int, budget: int = DEFAULT_BUDGET) -> tuple[float, float]:
    """Bracket the entropy rate of a stationary function-of-Markov source.

    Lower: ``H(Y_L | Y_1..Y_{L-1}, S_1)``; upper: ``H(Y_L | Y_1..Y_{L-1})``.
    Both are monotone in ``L`` and meet in the limit.
    """
    _check_budget(src, L, budget)
    upper = block_entropy(src, L, budget) - (block_entropy(src, L - 1, budget) if L > 1 else 0.0)
    lower = _conditional_block_entropy(src, L, budget) - (
        _conditional_block_entropy(src, L - 1, budget) if L > 1 else 0.0
    )
    return max(lower, 0.0), max(upper, 0.0)


@dataclass(frozen=True)
class EntropyRates:
    per_class: tuple
    jacobs_average: float
    bounds: tuple | None = None
    depth: int | None = None

    @property
    def is_bound(self) -> bool:
        return self.bounds is not None


def entropy_rate(
    src: MarkovSource,
    decomp: SourceDecomposition | None = None,
    depth: int = DEFAULT_ENTROPY_DEPTH,
    budget: int = DEFAULT_BUDGET,
) -> EntropyRates:
    """Per-class entropy rates and their weight average.

    For hidden sources each class rate is a ``(lower, upper)`` bracket at
    ``depth`` and the average is reported as a bracket as well.
    """
    decomp = decomp or recurrent_classes(src)
    if not src.hidden:
        rates = tuple(
            c.entropy_rate if c.entropy_rate is not None else markov_entropy_rate(src, c.states, c.stationary)
            for c in decomp.classes
        )
        avg = math.fsum(float(c.weight) * r for c, r in zip(decomp.classes, rates))
        return EntropyRates(rates, avg)
    brackets = tuple(hidden_entropy_bounds(class_source(src, c), depth, budget) for c in decomp.classes)
    lo = math.fsum(float(c.weight) * b[0] for c, b in zip(decomp.classes, brackets))
    hi = math.fsum(float(c.weight) * b[1] for c, b in zip(decomp.classes, brackets))
    return EntropyRates(brackets, (lo + hi) / 2, (lo, hi), depth)


def cesaro_initial(src: MarkovSource, n: int) -> np.ndarray:
    """``(1/n) sum_{t<n} initial P^t``."""
    P = src.matrix()
    v = src.initial_vector()
    total = v.copy()
    for _ in range(n - 1):
        v = v.dot(P)
        total = total + v
    return total * Fraction(1, n) if src.exact else total / n


def _half_l1(a: CylinderMarginal, b: CylinderMarginal) -> Scalar:
    keys = set(a.dist) | set(b.dist)
    return fsum_exact(abs(a.prob(k) - b.prob(k)) for k in keys) / 2


def cylinder_profile(
    src: MarkovSource, L: int, schedule: Sequence[int], budget: int = DEFAULT_BUDGET
) -> list[tuple[int, Scalar]]:
    """``sup`` over depth-``L`` cylinder events of ``|P_n(B) - Pbar(B)|`` along ``schedule``."""
    mean = marginal(stationary_mean_source(src), L, budget)
    P = src.matrix()
    v = src.initial_vector()
    total = v * 0
    out = []
    t = 0
    for n in sorted(schedule):
        while t < n:
            total = total + v
            v = v.dot(P)
            t += 1
        avg = total * Fraction(1, n) if src.exact else total / n
        out.append((n, _half_l1(marginal(src, L, budget, start=avg), mean)))
    return out


def cesaro_constant(src: MarkovSource) -> float:
    """Bound ``K`` with ``n * sup_B |P_n(B) - Pbar(B)| <= K`` at every cylinder depth.

    ``sum_{t<n} (P^t - Pi) = (I - (P - Pi)^n) Z - Pi`` with
    ``Z = (I - P + Pi)^-1``, so ``K = (3 ||Z||_inf + 1) / 2``.
    """
    P = np.array(src.transition, dtype=float)
    Pi = np.array(cesaro_limit_matrix(src), dtype=float)
    Z = np.linalg.inv(np.eye(src.n_states) - P + Pi)
    return (3 * np.abs(Z).sum(axis=1).max() + 1) / 2


def marginal_consistency(src: MarkovSource, L: int, budget: int = DEFAULT_BUDGET) -> Scalar:
    """Largest gap between the depth-``L`` marginal and the depth-``L+1`` marginal summed over its last symbol."""
    lo, hi = marginal(src, L, budget), marginal(src, L + 1, budget)
    summed: dict = {}
    for s, p in hi.dist.items():
        summed[s[:-1]] = summed.get(s[:-1], 0) + p
    keys = set(summed) | set(lo.dist)
    return max(abs(summed.get(k, 0) - lo.prob(k)) for k in keys)


def shift_stationarity_gap(src: MarkovSource, L: int, shifts: int = 4, budget: int = DEFAULT_BUDGET) -> Scalar:
    """Largest change in any depth-``L`` cylinder probability over start offsets ``0..shifts``."""
    base = marginal(src, L, budget)
    worst = 0
    P = src.matrix()
    v = src.initial_vector()
    for _ in range(shifts):
        v = v.dot(P)
        m = marginal(src, L, budget, start=v)
        keys = set(m.dist) | set(base.dist)
        worst = max([worst] + [abs(m.prob(k) - base.prob(k)) for k in keys])
    return worst


def mixture_marginal_gap(src: MarkovSource, L: int, decomp: SourceDecomposition | None = None, budget: int = DEFAULT_BUDGET) -> Scalar:
    """Gap between the mean's depth-``L`` marginal and the weighted class marginals."""
    decomp = decomp or recurrent_classes(src)
    mean = marginal(stationary_mean_source(src, decomp), L, budget)
    mix: dict = {}
    for c in decomp.classes:
        for s, p in marginal(class_source(src, c), L, budget).dist.items():
            mix[s] = mix.get(s, 0) + c.weight * p
    keys = set(mix) | set(mean.dist)
    return max(abs(mix.get(k, 0) - mean.prob(k)) for k in keys)


def _rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def sample_path(src: MarkovSource, length: int, seed: int, trial: int = 0) -> list:
    """One trajectory of output symbols; bit-reproducible for a given ``(seed, trial)``."""
    if length < 1:
        raise ValueError("length must be positive")
    rng = _rng(seed, trial)
    cum = np.cumsum(np.array(src.transition, dtype=float), axis=1)
    cum[:, -1] = 1.0
    init_cum = np.cumsum(np.array(src.initial, dtype=float))
    init_cum[-1] = 1.0
    u = rng.random(length)
    s = int(np.searchsorted(init_cum, u[0], side="right"))
    path = [src.emit(s)]
    for k in range(1, length):
        s = int(np.searchsorted(cum[s], u[k], side="right"))
        path.append(src.emit(s))
    return path


def sample_paths(src: MarkovSource, length: int, seed: int, trials: int = 1) -> list[list]:
    return [sample_path(src, length, seed, k) for k in range(trials)]


def empirical_frequency(paths: Sequence[Sequence], pattern: Sequence) -> float:
    """Sliding-window frequency of ``pattern`` pooled over all paths."""
    pattern = tuple(pattern)
    L = len(pattern)
    hits = windows = 0
    for path in paths:
        path = tuple(path)
        if len(path) < L:
            raise ValueError("path shorter than pattern")
        for i in range(len(path) - L + 1):
            windows += 1
            if path[i : i + L] == pattern:
                hits += 1
    return hits / windows


def format_path(path: Sequence) -> str:
    """Symbols joined without separator when all are single characters, else by spaces."""
    syms = [str(s) for s in path]
    sep = "" if all(len(s) == 1 for s in syms) else " "
    return sep.join(syms)

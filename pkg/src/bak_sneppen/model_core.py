"""Configurations, the one-step kernel, zero spans and potentials.

A configuration is a ring of ``n`` bits (1 = fit, 0 = unfit).  At every step
a zero is picked uniformly at random (any site if there are none) and it and
its two neighbours are overwritten by independent Bernoulli(p) bits.

The *span* of a configuration is the shortest circular arc ``l, l+1, ..., r``
containing every zero.  Its length is the diameter ``D``.  When several arcs
are equally short the choice is made by :func:`zero_span` (see its docstring).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "RingConfig",
    "StepOutcome",
    "ZeroSpan",
    "PotentialParams",
    "RefinedParams",
    "make_rng",
    "apply_move",
    "step",
    "minimal_arcs",
    "zero_span",
    "detect_flip",
    "potential",
    "refined_potential",
    "POTENTIAL_MIN_DIAMETER",
    "REFINED_MIN_DIAMETER",
]

POTENTIAL_MIN_DIAMETER = 6
REFINED_MIN_DIAMETER = 8


@dataclass(frozen=True)
class RingConfig:
    """A configuration on the ring ``Z_n``."""

    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) < 3:
            raise ValueError(f"ring length must be at least 3, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i % len(self.bits)]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    @classmethod
    def from_string(cls, s: str) -> "RingConfig":
        return cls(tuple(int(c) for c in s.strip()))

    @classmethod
    def from_int(cls, state: int, n: int) -> "RingConfig":
        """Decode ``state`` with bit ``i`` holding ``x_i``."""
        return cls(tuple((state >> i) & 1 for i in range(n)))

    @classmethod
    def all_ones(cls, n: int) -> "RingConfig":
        return cls((1,) * n)

    @classmethod
    def all_zeros(cls, n: int) -> "RingConfig":
        return cls((0,) * n)

    def to_int(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def zeros(self) -> list:
        return [i for i, b in enumerate(self.bits) if b == 0]

    @property
    def zero_count(self) -> int:
        return self.bits.count(0)


@dataclass(frozen=True)
class StepOutcome:
    chosen_index: int
    draws: tuple
    all_ones_fallback: bool


@dataclass(frozen=True)
class ZeroSpan:
    """The arc ``l..r`` covering all zeros, with its bookkeeping.

    For the all-ones ring ``l = r = 0`` and ``D = 0``; for the all-zeros ring
    ``D = n`` and ``r = l - 1``.
    """

    n: int
    l: int
    r: int
    diameter: int
    zero_count: int
    all_zero: bool = False
    all_one: bool = False

    @property
    def members(self) -> tuple:
        return tuple((self.l + k) % self.n for k in range(self.diameter))

    @property
    def end_set(self) -> frozenset:
        """The three leftmost and three rightmost indices of the arc."""
        if self.all_one:
            return frozenset()
        n, l, r = self.n, self.l, self.r
        return frozenset({l % n, (l + 1) % n, (l + 2) % n,
                          r % n, (r - 1) % n, (r - 2) % n})

    def offset(self, i: int) -> int:
        """Position of index ``i`` inside the arc, counted from ``l``."""
        return (i - self.l) % self.n

    def contains(self, i: int) -> bool:
        return not self.all_one and self.offset(i) < self.diameter

    def in_end_set(self, i: int) -> bool:
        if self.all_one:
            return True
        k = self.offset(i)
        return k < self.diameter and (k <= 2 or k >= self.diameter - 3)


@dataclass(frozen=True)
class PotentialParams:
    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta must lie in (0, 1/2), got {self.beta}")


@dataclass(frozen=True)
class RefinedParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    def as_tuple(self) -> tuple:
        return (self.alpha, self.beta, self.gamma)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream named by ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def apply_move(config: RingConfig, i: int, draws: Sequence[int]) -> RingConfig:
    """Overwrite sites ``i-1, i, i+1`` with ``draws``."""
    n = config.n
    bits = list(config.bits)
    for off, v in zip((-1, 0, 1), draws):
        bits[(i + off) % n] = int(v)
    return RingConfig(tuple(bits))


def step(config: RingConfig, p: float, rng: np.random.Generator):
    """One transition of the chain; returns ``(new_config, outcome)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    zeros = config.zeros()
    fallback = not zeros
    if fallback:
        i = int(rng.integers(config.n))
    else:
        i = zeros[int(rng.integers(len(zeros)))]
    draws = tuple(int(v) for v in (rng.random(3) < p))
    return apply_move(config, i, draws), StepOutcome(i, draws, fallback)


def minimal_arcs(config: RingConfig) -> list:
    """All shortest arcs ``(l, r)`` covering the zeros, sorted by ``l``.

    Every rotation qualifies for the all-zeros ring; the all-ones ring has
    none.
    """
    n = config.n
    bits = config.bits
    x = bits.count(0)
    if x == 0:
        return []
    if x == n:
        return [(l, (l - 1) % n) for l in range(n)]
    runs = []
    start = bits.index(0)
    run = 0
    for k in range(1, n + 1):
        j = (start + k) % n
        if bits[j] == 1:
            run += 1
        else:
            if run:
                runs.append((run, j))
            run = 0
    best = max(length for length, _ in runs)
    return sorted((j, (j - best - 1) % n) for length, j in runs if length == best)


def zero_span(config: RingConfig, previous: Optional[ZeroSpan] = None) -> ZeroSpan:
    """The span of ``config``.

    Ties between equally short arcs are broken as follows: with no previous
    span the arc with the smallest ``l`` is taken.  Otherwise an arc equal to
    the previous one is kept, else one sharing ``l`` or ``r`` with it (the
    smallest such ``l``), else the smallest ``l``; in the last case the ends
    have flipped.  For the all-zeros ring every rotation is a shortest arc, so
    the same rule keeps ``l`` fixed when there is a previous span.
    """
    n = config.n
    x = config.zero_count
    if x == 0:
        return ZeroSpan(n, 0, 0, 0, 0, all_one=True)
    arcs = minimal_arcs(config)
    if x == n:
        d = n
    else:
        l0, r0 = arcs[0]
        d = (r0 - l0) % n + 1
    l, r = arcs[0]
    if previous is not None and not previous.all_one and x == n:
        l, r = previous.l, (previous.l - 1) % n
    elif previous is not None and not previous.all_one:
        sharing = [a for a in arcs if a[0] == previous.l or a[1] == previous.r]
        if (previous.l, previous.r) in arcs:
            l, r = previous.l, previous.r
        elif sharing:
            l, r = sharing[0]
    return ZeroSpan(n, l, r, d, x, all_zero=(x == n))


def detect_flip(previous: ZeroSpan, current: ZeroSpan) -> bool:
    """True when neither end of the span survived the transition."""
    if previous.all_one or current.all_one:
        return False
    return previous.l != current.l and previous.r != current.r


def potential(config: RingConfig, span: ZeroSpan, params: PotentialParams) -> float:
    """Diameter minus ``beta`` for each end whose neighbour inside is a zero.

    Zero when ``D < 6``; ``n - 2 beta`` on the all-zeros ring.
    """
    if span.all_zero:
        return config.n - 2.0 * params.beta
    if span.diameter < POTENTIAL_MIN_DIAMETER:
        return 0.0
    m = float(span.diameter)
    if config[span.l + 1] == 0:
        m -= params.beta
    if config[span.r - 1] == 0:
        m -= params.beta
    return m


_LEFT_WEIGHT = {(0, 0): "alpha", (1, 0): "beta", (0, 1): "gamma"}
# Right-end labels as printed: (x_{r-1}, x_{r-2}) = (0,1) carries beta.
_RIGHT_WEIGHT = {(0, 0): "alpha", (0, 1): "beta", (1, 0): "gamma"}
_RIGHT_WEIGHT_MIRRORED = {(0, 0): "alpha", (1, 0): "beta", (0, 1): "gamma"}


def refined_potential(config: RingConfig, span: ZeroSpan, params: RefinedParams,
                      mirrored: bool = False) -> float:
    """Diameter minus a weight chosen by the two sites inside each end.

    The left pattern is ``(x_{l+1}, x_{l+2})`` and the right pattern is
    ``(x_{r-1}, x_{r-2})``.  With ``mirrored=False`` the right-end weights
    for ``(0, 1)`` and ``(1, 0)`` are the opposite of the left-end ones;
    ``mirrored=True`` applies the left-end table to both ends.  Zero when
    ``D < 8``; ``n - 2 alpha`` on the all-zeros ring.
    """
    if span.all_zero:
        return config.n - 2.0 * params.alpha
    if span.diameter < REFINED_MIN_DIAMETER:
        return 0.0
    right = _RIGHT_WEIGHT_MIRRORED if mirrored else _RIGHT_WEIGHT
    m = float(span.diameter)
    left_pat = (config[span.l + 1], config[span.l + 2])
    right_pat = (config[span.r - 1], config[span.r - 2])
    if left_pat in _LEFT_WEIGHT:
        m -= getattr(params, _LEFT_WEIGHT[left_pat])
    if right_pat in right:
        m -= getattr(params, right[right_pat])
    return m

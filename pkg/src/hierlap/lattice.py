"""The countable homogeneous ultrametric lattice {0, 1, 2, ...}.

Points are plain non-negative integers.  For a branching factor p >= 2 the
lattice is partitioned, at every rank r >= 0, into the intervals
[k*p^r, (k+1)*p^r); a ball is addressed by its (rank, index) pair.  The
hierarchical distance between two distinct points is the counting measure of
the minimal interval containing both.  All quantities here are exact
integers; nothing is converted to floating point before kernel evaluation.
"""

from dataclasses import dataclass

import numpy as np

# p**depth must stay addressable as a signed 64-bit index.
_MAX_INDEX = 2**62


@dataclass(frozen=True)
class BallAddress:
    """Ball of rank ``rank``: the interval [index*p^rank, (index+1)*p^rank)."""

    rank: int
    index: int

    def __post_init__(self):
        if self.rank < 0 or self.index < 0:
            raise ValueError(f"invalid ball address ({self.rank}, {self.index})")

    def parent(self, p: int) -> "BallAddress":
        return BallAddress(self.rank + 1, self.index // p)


@dataclass(frozen=True)
class LatticeConfig:
    """Branching factor, truncation depth and eigenvalue multiplier.

    Finite computations happen on the block {0, ..., p**depth - 1}; the
    infinite lattice is represented implicitly through analytic tail
    formulas attached to each series evaluation.
    """

    p: int
    depth: int
    multiplier: object  # PowerLaw or TabulatedMultiplier, see laplacian.py

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"branching factor must be >= 2, got {self.p}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.p**self.depth > _MAX_INDEX:
            raise ValueError(f"p**depth = {self.p}**{self.depth} exceeds the index range")

    @property
    def n_points(self) -> int:
        return self.p**self.depth


def ball_of(p: int, x: int, r: int) -> BallAddress:
    """Rank-r ball containing the point x."""
    if r < 0:
        raise ValueError(f"rank must be >= 0, got {r}")
    return BallAddress(r, x // p**r)


def common_rank(p: int, x: int, y: int) -> int:
    """Smallest r with x and y in the same rank-r ball (0 when x == y)."""
    r = 0
    while x != y:
        x //= p
        y //= p
        r += 1
    return r


def common_ball(p: int, x: int, y: int) -> BallAddress:
    """Minimal ball containing both x and y."""
    r = common_rank(p, x, y)
    return BallAddress(r, x // p**r)


def distance(p: int, x: int, y: int) -> int:
    """Hierarchical distance: measure of the minimal common ball, 0 iff x == y."""
    if x == y:
        return 0
    return p ** common_rank(p, x, y)


def measure(p: int, b: BallAddress) -> int:
    """Counting measure of a ball: p**rank points (singletons have measure 1)."""
    return p**b.rank


def geodesic_to_root(p: int, x: int, max_rank: int) -> list[BallAddress]:
    """Nested balls containing x, from the singleton up to rank max_rank."""
    if max_rank < 0:
        raise ValueError(f"max_rank must be >= 0, got {max_rank}")
    out = []
    k = x
    for r in range(max_rank + 1):
        out.append(BallAddress(r, k))
        k //= p
    return out


def block_points(cfg: LatticeConfig) -> range:
    """The depth-n truncation block {0, ..., p**depth - 1}."""
    return range(cfg.n_points)


def common_rank_profile(p: int, a: int, block_size: int) -> np.ndarray:
    """Vector of common ranks of every block point with the point a."""
    cur = np.arange(block_size)
    ranks = np.zeros(block_size, dtype=np.int64)
    ca = a
    active = cur != ca
    while active.any():
        cur, ca = cur // p, ca // p
        ranks[active] += 1
        active &= cur != ca
    return ranks

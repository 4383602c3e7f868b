"""
Paintboxes: points of the simplex Delta and the mergers they drive.

A paintbox ``y`` splits ``[0, 1)`` into consecutive buckets of lengths
``y_1 >= y_2 >= ...`` and a leftover interval of length ``1 - |y|_1``. Every
block draws a uniform position; blocks sharing a bucket merge, blocks in the
leftover interval stay put.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from .formatting import format_weights
from .partitions import Partition, block_groups

__all__ = [
    "Paintbox",
    "MergerOutcome",
    "phi",
    "paintbox_prob",
    "sample_merger",
    "merger_groups",
    "sample_nontrivial_merger",
    "g_nc",
    "non_coalescence_prob",
]

_tol = 1e-12


class Paintbox:
    """
    Finite-support point of Delta.

    Parameters
    ----------
    weights : iterable of float
        Bucket sizes. Zeros are dropped and the rest sorted nonincreasing.
    """

    __slots__ = ("_weights", "_l1", "_l2sq", "_cum")

    def __init__(self, weights: Iterable[float] = ()) -> None:
        w = np.asarray(list(weights), dtype=float).ravel()
        if np.any(w < -_tol) or np.any(w > 1 + _tol):
            raise ValueError("paintbox weights must lie in [0, 1]")
        w = np.clip(w, 0.0, 1.0)
        w = np.sort(w[w > 0])[::-1]
        l1 = float(w.sum())
        if l1 > 1 + _tol:
            raise ValueError(f"paintbox mass {l1} exceeds 1")
        w.setflags(write=False)
        self._weights = w
        self._l1 = min(l1, 1.0)
        self._l2sq = float(np.dot(w, w))
        self._cum = None

    @property
    def weights(self) -> npt.NDArray[np.float64]:
        return self._weights

    @property
    def l1(self) -> float:
        return self._l1

    @property
    def l2sq(self) -> float:
        return self._l2sq

    @property
    def norm(self) -> float:
        return math.sqrt(self._l2sq)

    @property
    def leftover(self) -> float:
        """Mass of the interval J where blocks do not merge."""
        return max(0.0, 1.0 - self._l1)

    @property
    def cumulative(self) -> npt.NDArray[np.float64]:
        """Right end points of the buckets."""
        if self._cum is None:
            self._cum = np.cumsum(self._weights)
        return self._cum

    def __len__(self) -> int:
        return len(self._weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Paintbox):
            return NotImplemented
        return np.array_equal(self._weights, other._weights)

    def __hash__(self) -> int:
        return hash(self._weights.tobytes())

    def __str__(self) -> str:
        return format_weights(self._weights)

    def __repr__(self) -> str:
        return f"Paintbox([{', '.join(f'{w:g}' for w in self._weights)}])"


@dataclass(frozen=True)
class MergerOutcome:
    """Partition of the current block indices produced by one merger."""

    alpha: Partition

    @property
    def is_trivial(self) -> bool:
        return len(self.alpha) == self.alpha.n


def phi(x: Paintbox) -> Paintbox:
    """Split every bucket into the two chromosomes of a diploid parent."""
    return Paintbox(np.repeat(x.weights / 2.0, 2))


def _merger_mass(
    weights: Sequence[float], group_sizes: Sequence[int], s: int, leftover: float
) -> float:
    """
    Probability that the groups land in pairwise distinct buckets and the
    ``s`` remaining blocks avoid those and each other, or fall into J.

    Dynamic programme over the buckets. A state records how many groups of
    each size and how many lone blocks are already placed. Placing one of
    ``m`` still unplaced, distinguishable groups contributes a factor ``m``,
    so the final sum runs over injective assignments.
    """
    kinds = sorted(Counter(group_sizes).items())
    sizes = [k for k, _ in kinds]
    need = tuple(c for _, c in kinds)
    start = (0,) * (len(sizes) + 1)
    states: dict[tuple[int, ...], float] = {start: 1.0}
    for w in weights:
        powers = [w**k for k in sizes]
        new: dict[tuple[int, ...], float] = defaultdict(float)
        for state, mass in states.items():
            new[state] += mass
            for pos, power in enumerate(powers):
                remaining = need[pos] - state[pos]
                if remaining:
                    nxt = list(state)
                    nxt[pos] += 1
                    new[tuple(nxt)] += mass * remaining * power
            remaining = s - state[-1]
            if remaining:
                nxt = list(state)
                nxt[-1] += 1
                new[tuple(nxt)] += mass * remaining * w
        states = new
    total = 0.0
    for state, mass in states.items():
        if state[:-1] == need:
            total += mass * leftover ** (s - state[-1])
    return total


def paintbox_prob(y: Paintbox, xi: Partition, eta: Partition) -> float:
    """
    Probability that a ``y``-merger turns ``xi`` into ``eta``.

    Groups of merged blocks of size ``k >= 2`` must occupy pairwise distinct
    buckets; the ``s`` untouched blocks either sit alone in further distinct
    buckets or fall into the leftover interval. A group of size one is the
    same thing as an untouched block. Returns 0 if ``eta`` is not a
    coarsening of ``xi``.
    """
    groups = block_groups(xi, eta)
    if groups is None:
        return 0.0
    sizes = [len(g) for g in groups if len(g) > 1]
    s = sum(1 for g in groups if len(g) == 1)
    if sizes and len(y) == 0:
        return 0.0
    return min(1.0, max(0.0, _merger_mass(y.weights, sizes, s, y.leftover)))


def _bucket_labels(y: Paintbox, u: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
    # bucket index for each uniform; J gets a distinct negative label per draw
    idx = np.searchsorted(y.cumulative, u, side="right")
    lone = idx >= len(y)
    if np.any(lone):
        shape = u.shape
        idx = idx.copy()
        idx[lone] = -1 - np.arange(u.size).reshape(shape)[lone]
    return idx


def merger_groups(y: Paintbox, b: int, rng: np.random.Generator) -> list[list[int]]:
    """0-based index groups (size >= 2) merged by one ``y``-merger on ``b`` blocks."""
    if b < 2 or len(y) == 0:
        return []
    labels = _bucket_labels(y, rng.random(b))
    return _groups_from_labels(labels)


def _groups_from_labels(labels) -> list[list[int]]:
    buckets: dict[int, list[int]] = {}
    for i, label in enumerate(labels.tolist()):
        buckets.setdefault(label, []).append(i)
    return [g for g in buckets.values() if len(g) > 1]


def sample_merger(y: Paintbox, b: int, rng: np.random.Generator) -> MergerOutcome:
    """
    Draw the partition of ``[b]`` induced by one ``y``-merger.

    Blocks in the same bucket share a class; blocks in J are singletons.
    """
    if b < 1:
        raise ValueError("b must be at least 1")
    groups = merger_groups(y, b, rng)
    return MergerOutcome(Partition.singletons(b).merge(groups))


def sample_nontrivial_merger(
    y: Paintbox, b: int, rng: np.random.Generator, q: float | None = None
) -> list[list[int]]:
    """
    Draw merger groups conditioned on at least one merge.

    Rejection sampling in batches sized from the merge probability ``q``
    (computed if not given).
    """
    if b < 2 or len(y) == 0:
        raise ValueError("no merger is possible")
    if q is None:
        q = -math.expm1(-g_nc(b, y))
    if q <= 0:
        raise ValueError("no merger is possible")
    batch = int(min(max(8, math.ceil(2.0 / q)), max(8, 2_000_000 // b)))
    while True:
        labels = _bucket_labels(y, rng.random((batch, b)))
        ordered = np.sort(labels, axis=1)
        hits = np.flatnonzero(np.any(ordered[:, 1:] == ordered[:, :-1], axis=1))
        if hits.size:
            return _groups_from_labels(labels[hits[0]])


def non_coalescence_prob(n: int, x: Paintbox) -> float:
    """Probability that an ``x``-merger leaves ``n`` singletons untouched."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1 or len(x) == 0:
        return 1.0
    # elementary symmetric sums weighted by the number of ways to pick blocks
    e = np.zeros(n + 1)
    e[0] = 1.0
    remaining = n - np.arange(n)
    for w in x.weights:
        e[1:] = e[1:] + remaining * w * e[:-1]
    powers = x.leftover ** (n - np.arange(n + 1))
    return float(min(1.0, max(0.0, np.dot(e, powers))))


def g_nc(n: int, x: Paintbox) -> float:
    """Non-coalescence functional ``-log p(x; singletons, singletons)``."""
    p = non_coalescence_prob(n, x)
    if p <= 0.0:
        return math.inf
    return max(0.0, -math.log(p))

"""
Partitions of the sample and the coagulation operators acting on them.

A :class:`Partition` is an element of E_n: disjoint blocks of the leaf labels
``1..n``. A :class:`GroupedPartition` is an element of S_n: a partition plus
pairs of blocks whose ancestral genes sit in the same diploid individual.

Blocks are kept in canonical order, sorted by least element, with the
elements of each block ascending. Block *indices* used by the coagulators
are 1-based over that order, as in the coagulator definition; the pair
indices of a grouped partition are 0-based positions into ``blocks``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, Iterator, Sequence

from .formatting import format_partition, parse_partition

__all__ = [
    "Partition",
    "GroupedPartition",
    "canonicalize",
    "complete_dispersion",
    "coagulate",
    "is_pair_coalescence",
    "restrict",
    "set_partitions",
    "coarsenings",
    "block_groups",
]

Blocks = tuple[tuple[int, ...], ...]


def canonicalize(blocks: Iterable[Iterable[int]]) -> Blocks:
    """Sort elements within blocks and blocks by least element; drop empties."""
    return tuple(sorted(tuple(sorted(set(block))) for block in blocks if block))


class Partition:
    """
    Partition of ``{1, ..., n}`` in canonical block order.

    Parameters
    ----------
    blocks : iterable of iterables of int
        Disjoint nonempty blocks covering ``1..n``.
    n : int, optional
        Size of the ground set; inferred from the blocks if omitted.
    """

    __slots__ = ("_blocks", "_n", "_masks")

    def __init__(self, blocks: Iterable[Iterable[int]], n: int | None = None) -> None:
        canon = canonicalize(blocks)
        elements = sorted(chain.from_iterable(canon))
        if n is None:
            n = len(elements)
        if elements != list(range(1, n + 1)):
            raise ValueError(f"blocks {canon} are not a partition of [1..{n}]")
        self._blocks = canon
        self._n = n
        self._masks = None

    @classmethod
    def _from_canonical(cls, blocks: Blocks, n: int) -> "Partition":
        # Internal constructor for blocks already known to be canonical.
        obj = cls.__new__(cls)
        obj._blocks = blocks
        obj._n = n
        obj._masks = None
        return obj

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        """The complete dispersion ``{{1},...,{n}}``."""
        return cls._from_canonical(tuple((i,) for i in range(1, n + 1)), n)

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        """The one-block partition ``{{1,...,n}}``."""
        return cls._from_canonical((tuple(range(1, n + 1)),) if n else (), n)

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """Leaf ``k+1`` and leaf ``j+1`` share a block iff ``labels[k] == labels[j]``."""
        classes: dict = {}
        for leaf, label in enumerate(labels, start=1):
            classes.setdefault(label, []).append(leaf)
        # insertion order already sorts classes by least element
        return cls._from_canonical(tuple(tuple(c) for c in classes.values()), len(labels))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        return cls(parse_partition(text))

    @property
    def n(self) -> int:
        return self._n

    @property
    def blocks(self) -> Blocks:
        return self._blocks

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(block) for block in self._blocks)

    @property
    def masks(self) -> tuple[int, ...]:
        """Blocks as integer bitsets (bit ``i-1`` set for leaf ``i``)."""
        if self._masks is None:
            self._masks = tuple(sum(1 << (i - 1) for i in block) for block in self._blocks)
        return self._masks

    def merge(self, groups: Iterable[Sequence[int]]) -> "Partition":
        """
        Merge blocks by 0-based index groups.

        Groups must be disjoint; blocks not mentioned stay as they are.
        """
        merged = []
        used = set()
        for group in groups:
            used.update(group)
            merged.append(tuple(chain.from_iterable(self._blocks[i] for i in group)))
        merged.extend(block for i, block in enumerate(self._blocks) if i not in used)
        return Partition._from_canonical(canonicalize(merged), self._n)

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self._blocks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self._n == other._n and self._blocks == other._blocks

    def __hash__(self) -> int:
        return hash((self._n, self._blocks))

    def __str__(self) -> str:
        return format_partition(self._blocks)

    def __repr__(self) -> str:
        return f"Partition({format_partition(self._blocks)!r})"


@dataclass(frozen=True)
class GroupedPartition:
    """
    Element of S_n: a partition with pairs of co-resident blocks.

    Attributes
    ----------
    partition : Partition
        The blocks, in canonical order.
    pairs : frozenset of tuple of int
        Unordered pairs ``(i, j)``, ``i < j``, of 0-based block indices.
    """

    partition: Partition
    pairs: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        normalized = frozenset(tuple(sorted(p)) for p in self.pairs)
        b = len(self.partition)
        seen: set[int] = set()
        for i, j in normalized:
            if i == j or not (0 <= i < b and 0 <= j < b):
                raise ValueError(f"invalid block pair ({i}, {j}) for {b} blocks")
            if i in seen or j in seen:
                raise ValueError(f"block index paired twice in {sorted(normalized)}")
            seen.update((i, j))
        object.__setattr__(self, "pairs", normalized)

    @classmethod
    def from_partition(cls, xi: Partition) -> "GroupedPartition":
        """Embed E_n into S_n (no pairs)."""
        return cls(xi, frozenset())

    @property
    def blocks(self) -> Blocks:
        return self.partition.blocks

    @property
    def b(self) -> int:
        return len(self.partition)

    @property
    def x(self) -> int:
        """Number of pairs."""
        return len(self.pairs)

    def __str__(self) -> str:
        text = str(self.partition)
        if self.pairs:
            text += " " + " ".join(f"({i + 1},{j + 1})" for i, j in sorted(self.pairs))
        return text


def complete_dispersion(g: GroupedPartition) -> Partition:
    """Forget which blocks share an individual."""
    return g.partition


def coagulate(xi: Partition, alpha: Partition) -> Partition:
    """
    Apply the alpha-coagulator to ``xi``.

    For each block ``A`` of ``alpha`` the blocks of ``xi`` whose 1-based
    indices lie in ``A`` are merged; indices beyond the block count of ``xi``
    are ignored.
    """
    b = len(xi)
    groups = []
    for block in alpha.blocks:
        group = [i - 1 for i in block if i <= b]
        if len(group) > 1:
            groups.append(group)
    if not groups:
        return xi
    return xi.merge(groups)


def is_pair_coalescence(xi: Partition, eta: Partition) -> bool:
    """True iff ``eta`` is ``xi`` with exactly two blocks merged."""
    if xi.n != eta.n or len(eta) != len(xi) - 1:
        return False
    old = set(xi.blocks)
    new = [block for block in eta.blocks if block not in old]
    if len(new) != 1:
        return False
    gone = old.difference(eta.blocks)
    return len(gone) == 2 and set(chain.from_iterable(gone)) == set(new[0])


def restrict(xi: Partition, m: int) -> Partition:
    """Partition of ``[m]`` induced on the first ``m`` labels."""
    if not 1 <= m <= xi.n:
        raise ValueError(f"cannot restrict a partition of [{xi.n}] to [{m}]")
    return Partition._from_canonical(
        canonicalize(tuple(i for i in block if i <= m) for block in xi.blocks), m
    )


def set_partitions(b: int) -> Iterator[list[list[int]]]:
    """All set partitions of ``{0, ..., b-1}`` (restricted growth strings)."""
    if b == 0:
        yield []
        return
    codes = [0] * b
    maxima = [0] * b

    while True:
        groups: list[list[int]] = [[] for _ in range(max(codes) + 1)]
        for i, c in enumerate(codes):
            groups[c].append(i)
        yield groups
        # next restricted growth string
        i = b - 1
        while i > 0 and codes[i] == maxima[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        codes[i] += 1
        maxima[i] = max(maxima[i - 1], codes[i])
        for j in range(i + 1, b):
            codes[j] = 0
            maxima[j] = maxima[i]


def coarsenings(xi: Partition) -> Iterator[Partition]:
    """Every partition obtained from ``xi`` by grouping its blocks."""
    for groups in set_partitions(len(xi)):
        yield xi.merge(g for g in groups if len(g) > 1)


def block_groups(xi: Partition, eta: Partition) -> list[tuple[int, ...]] | None:
    """
    Express ``eta`` as groups of 0-based block indices of ``xi``.

    Returns ``None`` if ``eta`` is not a coarsening of ``xi``.
    """
    if xi.n != eta.n:
        return None
    owner = {}
    for index, block in enumerate(xi.blocks):
        for leaf in block:
            owner[leaf] = index
    groups = []
    claimed: set[int] = set()
    for block in eta.blocks:
        indices = sorted({owner[leaf] for leaf in block})
        if sum(len(xi.blocks[i]) for i in indices) != len(block):
            return None
        if claimed.intersection(indices):
            return None
        claimed.update(indices)
        groups.append(tuple(indices))
    return groups

"""
Gene genealogies conditional on a fixed pedigree.

Sampled genes are coalescing random walks on ``{0, 1} x [N]``: a gene on
chromosome ``c`` of individual ``k`` moves to the parent of record
``p_c[k]`` and to the chromosome picked by a fair Mendelian coin. Genes at
the same position move together. Positions are encoded as
``2 * individual + chromosome`` with 0-based individuals.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import daiquiri
import numpy as np
import numpy.typing as npt
from joblib import Parallel, delayed

from . import streams
from .cannings_pedigree import OffspringMatrix, Pedigree, PedigreeSlice
from .formatting import format_event
from .partitions import GroupedPartition, Partition, block_groups, complete_dispersion

__all__ = [
    "GenePosition",
    "LineageSet",
    "GenealogyTree",
    "LocusResult",
    "init_sample",
    "step",
    "state_of",
    "run_locus",
    "run_loci",
    "aggregated_transition_prob",
    "exact_step_law",
]

logger = daiquiri.getLogger(__name__)


class GenePosition(NamedTuple):
    chromosome: int
    individual: int


@dataclass(frozen=True, eq=False)
class LineageSet:
    """Positions of the ``n`` sampled genes at generation ``generation``."""

    codes: npt.NDArray[np.int64]
    generation: int = 0

    @property
    def n(self) -> int:
        return len(self.codes)

    @property
    def positions(self) -> list[GenePosition]:
        return [GenePosition(c % 2, c // 2) for c in self.codes.tolist()]

    def distinct(self) -> int:
        return int(np.unique(self.codes).size)


@dataclass
class GenealogyTree:
    """
    Jump history of the completely dispersed process.

    ``states[0]`` is the initial partition at generation 0; each further
    entry is the partition right after a coalescence.
    """

    n: int
    generations: list[int]
    times: list[float]
    states: list[Partition]
    censored: bool = False
    end_generation: int = 0
    c_N: float = 1.0

    @property
    def end_time(self) -> float:
        return self.end_generation * self.c_N

    @property
    def mrca_time(self) -> float | None:
        if self.states and len(self.states[-1]) == 1:
            return self.times[-1]
        return None

    def to_text(self) -> str:
        return "\n".join(format_event(t, s.blocks) for t, s in zip(self.times, self.states))


@dataclass
class LocusResult:
    trajectory: list[tuple[int, GroupedPartition]]
    tree: GenealogyTree
    censored: bool = False


def init_sample(xi0: GroupedPartition, N: int) -> LineageSet:
    """
    Place the initial sample.

    The ``k``-th pair of co-resident blocks occupies both chromosomes of
    individual ``k``. Unpaired blocks follow in canonical order; the block
    listed at position ``i`` (counting pair members first) sits on
    chromosome 0 of individual ``i``.
    """
    b = xi0.b
    n = xi0.partition.n
    if b > N:
        raise ValueError(f"{b} initial blocks need {b} individuals, population has N={N}")
    paired = sorted(xi0.pairs)
    codes = np.empty(n, dtype=np.int64)
    listed: list[tuple[int, ...]] = []
    for k, (i, j) in enumerate(paired):
        for c, index in enumerate((i, j)):
            block = xi0.blocks[index]
            codes[np.asarray(block) - 1] = 2 * k + c
            listed.append(block)
    in_pairs = {i for pair in paired for i in pair}
    position = len(listed)
    for index, block in enumerate(xi0.blocks):
        if index in in_pairs:
            continue
        codes[np.asarray(block) - 1] = 2 * position
        position += 1
    return LineageSet(codes, 0)


def step(lineages: LineageSet, slice_: PedigreeSlice, rng) -> LineageSet:
    """Move every distinct position one generation back, one coin each."""
    if lineages.n == 0:
        return LineageSet(lineages.codes, lineages.generation + 1)
    distinct, inverse = np.unique(lineages.codes, return_inverse=True)
    individual = distinct // 2
    chromosome = distinct % 2
    parent = np.where(chromosome == 0, slice_.p0[individual], slice_.p1[individual])
    coins = rng.integers(0, 2, size=len(distinct))
    moved = 2 * parent + coins
    return LineageSet(moved[inverse].astype(np.int64), lineages.generation + 1)


def state_of(lineages: LineageSet) -> GroupedPartition:
    """Blocks are classes of equal position; pairs share an individual."""
    partition = Partition.from_labels(lineages.codes.tolist())
    by_individual: dict[int, list[int]] = defaultdict(list)
    for index, block in enumerate(partition.blocks):
        by_individual[int(lineages.codes[block[0] - 1]) // 2].append(index)
    pairs = frozenset(tuple(v) for v in by_individual.values() if len(v) == 2)
    return GroupedPartition(partition, pairs)


def run_locus(
    pedigree: Pedigree,
    xi0: GroupedPartition,
    horizon: int | None,
    rng: np.random.Generator,
    c_N: float = 1.0,
    sample_generations: Iterable[int] = (),
    to_mrca: bool = True,
) -> LocusResult:
    """
    Trace one locus back through ``pedigree``.

    Parameters
    ----------
    horizon : int or None
        Maximal number of generations; ``None`` means ``ceil(50 / c_N)``.
    c_N : float
        Rescaling constant; jump times are reported as ``g * c_N``.
    sample_generations : iterable of int
        Generations at which the grouped state is recorded.
    to_mrca : bool
        Stop at the most recent common ancestor; otherwise run to the
        horizon. Either way a run that ends with more than one lineage is
        flagged as censored.
    """
    if horizon is None:
        horizon = int(math.ceil(50.0 / c_N))
    if horizon < 1:
        raise ValueError("horizon must be at least one generation")
    wanted = sorted(set(int(g) for g in sample_generations))
    lineages = init_sample(xi0, pedigree.N)
    current = complete_dispersion(state_of(lineages))
    tree = GenealogyTree(xi0.partition.n, [0], [0.0], [current], c_N=c_N)
    trajectory: list[tuple[int, GroupedPartition]] = []
    cursor = 0
    if wanted and wanted[0] == 0:
        trajectory.append((0, state_of(lineages)))
        cursor = 1
    distinct = lineages.distinct()
    g = 0
    while g < horizon:
        if to_mrca and distinct <= 1 and cursor == len(wanted):
            break
        lineages = step(lineages, pedigree.slice(g), rng)
        g += 1
        now = lineages.distinct()
        if now < distinct:
            distinct = now
            current = Partition.from_labels(lineages.codes.tolist())
            tree.generations.append(g)
            tree.times.append(g * c_N)
            tree.states.append(current)
        while cursor < len(wanted) and wanted[cursor] == g:
            trajectory.append((g, state_of(lineages)))
            cursor += 1
    tree.end_generation = g
    censored = distinct > 1
    tree.censored = censored
    return LocusResult(trajectory, tree, censored)


def _run_chunk(pedigree, n, indices, seed, c_N, horizon):
    xi0 = GroupedPartition.from_partition(Partition.singletons(n))
    return [
        run_locus(pedigree, xi0, horizon, streams.stream(seed, streams.LOCUS, i), c_N=c_N)
        for i in indices
    ]


def run_loci(
    pedigree: Pedigree,
    n: int,
    loci: int,
    seed: int,
    c_N: float,
    horizon: int | None = None,
    n_jobs: int = 1,
    chunk: int = 16,
) -> list[LocusResult]:
    """
    Independent loci on one shared pedigree, singletons at the start.

    Locus ``i`` draws its coins from the stream ``(seed, "locus", i)``,
    so the result does not depend on ``n_jobs``.
    """
    chunks = [range(i, min(i + chunk, loci)) for i in range(0, loci, chunk)]
    if n_jobs == 1:
        parts = [_run_chunk(pedigree, n, c, seed, c_N, horizon) for c in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_run_chunk)(pedigree, n, c, seed, c_N, horizon) for c in chunks
        )
    results = [r for part in parts for r in part]
    censored = sum(r.censored for r in results)
    if censored:
        logger.warning("%d of %d loci censored before reaching the MRCA", censored, loci)
    return results


def _role_splits(V: OffspringMatrix):
    # joint law of the 0-parent counts: each pair's children split Binomial(V_ij, 1/2)
    pairs = V.pairs.tolist()
    counts = V.counts.tolist()
    options = [range(c + 1) for c in counts]
    for split in itertools.product(*options):
        weight = Fraction(1)
        hat = [0] * V.N
        for (i, j), c, h in zip(pairs, counts, split):
            weight *= Fraction(math.comb(c, h), 2**c)
            hat[i] += h
            hat[j] += c - h
        yield weight, hat


def _falling(x: int, k: int) -> int:
    return math.perm(x, k) if 0 <= k <= x else 0


def aggregated_transition_prob(V: OffspringMatrix, xi: Partition, eta: Partition) -> Fraction:
    """
    One-generation probability, given ``V``, that genes at ``(0, 1..b)`` in
    the completely dispersed state ``xi`` end up in state ``eta`` after
    complete dispersion.

    Sums over pairwise distinct ancestral genes, one per group of ``eta``;
    groups landing in the same individual share that parent's falling
    factorial of 0-parent counts.
    """
    groups = block_groups(xi, eta)
    if groups is None:
        return Fraction(0)
    sizes = [len(g) for g in groups]
    b = len(xi)
    splits = list(_role_splits(V))
    memo: dict[tuple, Fraction] = {}

    def expectation(load: tuple) -> Fraction:
        if load not in memo:
            memo[load] = sum(
                (w * math.prod(_falling(hat[i], m) for i, m in load) for w, hat in splits),
                Fraction(0),
            )
        return memo[load]

    genes = [(c, i) for i in range(V.N) for c in (0, 1)]
    total = Fraction(0)
    for chosen in itertools.permutations(genes, len(sizes)):
        load: dict[int, int] = defaultdict(int)
        for (_, i), k in zip(chosen, sizes):
            load[i] += k
        total += expectation(tuple(sorted(load.items())))
    return total / (2**b * _falling(V.N, b))


class _FixedCoins:
    """Stands in for a generator when the coins are being enumerated."""

    def __init__(self, coins: Sequence[int]):
        self._coins = np.asarray(coins, dtype=np.int64)

    def integers(self, low, high=None, size=None):
        return self._coins[:size]


def exact_step_law(V: OffspringMatrix, lineages: LineageSet) -> dict[Partition, Fraction]:
    """
    Law of the completely dispersed state after one :func:`step`, given ``V``.

    Enumerates every assignment of boxes to the children that carry
    lineages (a uniform matching restricted to those children), their role
    coins and the Mendelian coins, and runs :func:`step` on each outcome.
    """
    boxes = [tuple(p) for p, c in zip(V.pairs.tolist(), V.counts.tolist()) for _ in range(c)]
    hosts = sorted(set((lineages.codes // 2).tolist()))
    distinct = int(np.unique(lineages.codes).size)
    law: dict[Partition, Fraction] = defaultdict(Fraction)
    slots = list(itertools.permutations(range(V.N), len(hosts)))
    weight = Fraction(1, len(slots) * 2 ** len(hosts) * 2**distinct)
    for chosen in slots:
        rest = [s for s in range(V.N) if s not in chosen]
        order = [0] * V.N
        free = iter(rest)
        host_slot = dict(zip(hosts, chosen))
        for child in range(V.N):
            order[child] = host_slot[child] if child in host_slot else next(free)
        for roles in itertools.product((0, 1), repeat=len(hosts)):
            flip = dict(zip(hosts, roles))
            p0 = np.empty(V.N, dtype=np.int64)
            p1 = np.empty(V.N, dtype=np.int64)
            for child, slot in enumerate(order):
                a, b = boxes[slot]
                if flip.get(child, 0):
                    a, b = b, a
                p0[child], p1[child] = a, b
            slice_ = PedigreeSlice(V.N, p0, p1, "")
            for coins in itertools.product((0, 1), repeat=distinct):
                moved = step(lineages, slice_, _FixedCoins(coins))
                law[complete_dispersion(state_of(moved))] += weight
    return dict(law)

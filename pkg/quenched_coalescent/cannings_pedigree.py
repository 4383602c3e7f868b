"""
Diploid Cannings models and the pedigrees they generate.

One generation is described by the symmetric offspring matrix ``V``:
``V[i, j]`` children have parents ``i`` and ``j``. It is stored sparsely as
parent pairs ``i < j`` (0-based) with their counts. A pedigree slice assigns
the children to these parent-pair boxes by a uniform matching and flips a
fair coin per child to decide which parent is the 0-parent.
"""

from __future__ import annotations

import csv
import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol

import daiquiri
import numpy as np
import numpy.typing as npt
from scipy import special

from . import streams
from .exceptions import ConfigurationError, ModelError
from .paintbox import Paintbox

__all__ = [
    "OffspringMatrix",
    "PedigreeSlice",
    "Pedigree",
    "CanningsModel",
    "WrightFisher",
    "RandomFitness",
    "GWCouples",
    "LargeFamilyCouple",
    "LargeFamilyIndividual",
    "TwoSexStar",
    "TwoSex",
    "CoalescenceEstimate",
    "sample_offspring_matrix",
    "realize_slice",
    "pair_coalescence_prob",
    "generation_paintbox",
    "two_sex_wrap",
    "build_model",
]

logger = daiquiri.getLogger(__name__)

IntArray = npt.NDArray[np.int64]


@dataclass(frozen=True, eq=False)
class OffspringMatrix:
    """
    Sparse offspring matrix of one generation.

    Attributes
    ----------
    N : int
        Population size.
    pairs : ndarray, shape (K, 2)
        Parent pairs ``i < j`` with at least one child, lexicographic order.
    counts : ndarray, shape (K,)
        ``V[i, j]`` for each pair.
    redraws : int
        Number of rejected generations before this one was accepted.
    """

    N: int
    pairs: IntArray
    counts: IntArray
    redraws: int = 0

    @classmethod
    def from_child_pairs(
        cls, N: int, a: npt.ArrayLike, b: npt.ArrayLike, redraws: int = 0
    ) -> "OffspringMatrix":
        """Aggregate the two parents of each child into pair counts."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if np.any(a == b):
            raise ModelError("selfing: a child has the same parent twice")
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keys, counts = np.unique(lo * N + hi, return_counts=True)
        pairs = np.stack([keys // N, keys % N], axis=1)
        return cls(N, pairs, counts.astype(np.int64), redraws)

    @classmethod
    def from_dense(cls, matrix: npt.ArrayLike) -> "OffspringMatrix":
        v = np.asarray(matrix, dtype=np.int64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("offspring matrix must be square")
        if not np.array_equal(v, v.T) or np.any(np.diag(v) != 0):
            raise ValueError("offspring matrix must be symmetric with zero diagonal")
        i, j = np.nonzero(np.triu(v, k=1))
        return cls(v.shape[0], np.stack([i, j], axis=1), v[i, j])

    @property
    def children(self) -> int:
        return int(self.counts.sum())

    def totals(self) -> IntArray:
        """Total offspring numbers ``V_i``."""
        return (
            np.bincount(self.pairs[:, 0], weights=self.counts, minlength=self.N)
            + np.bincount(self.pairs[:, 1], weights=self.counts, minlength=self.N)
        ).astype(np.int64)

    def dense(self) -> IntArray:
        v = np.zeros((self.N, self.N), dtype=np.int64)
        v[self.pairs[:, 0], self.pairs[:, 1]] = self.counts
        return v + v.T

    def digest(self) -> str:
        h = hashlib.sha1()
        h.update(np.int64(self.N).tobytes())
        h.update(np.ascontiguousarray(self.pairs, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.counts, dtype=np.int64).tobytes())
        return h.hexdigest()

    def validate(self) -> None:
        """Check the fixed-population-size and no-selfing identities."""
        if self.children != self.N:
            raise ModelError(f"sum of V[i, j] over i < j is {self.children}, expected {self.N}")
        if len(self.pairs) and np.any(self.pairs[:, 0] >= self.pairs[:, 1]):
            raise ModelError("pairs must satisfy i < j (no selfing)")
        if int(self.totals().sum()) != 2 * self.N:
            raise ModelError("sum of V_i differs from 2N")


@dataclass(frozen=True, eq=False)
class PedigreeSlice:
    """Parents of record of every child in one generation (0-based)."""

    N: int
    p0: IntArray
    p1: IntArray
    source_matrix_digest: str


def _parents_wf(parents: IntArray, children: int, rng: np.random.Generator):
    # each child picks an unordered pair of distinct parents uniformly
    m = len(parents)
    if children == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    if m < 2:
        raise ModelError("Wright-Fisher step needs at least two parents")
    i = rng.integers(m, size=children)
    j = rng.integers(m - 1, size=children)
    j += j >= i
    return parents[i], parents[j]


def _draw_big_family(N: int, psi: float, gamma: float, rng: np.random.Generator) -> int:
    # Psi_N = floor(psi N) with probability N^-gamma, else 1
    if rng.random() < N ** (-gamma):
        return int(math.floor(psi * N))
    return 1


class CanningsModel(Protocol):
    """Interface shared by the model catalog."""

    name: str
    N: int

    def sample(self, rng: np.random.Generator) -> OffspringMatrix: ...

    def exact_pair_coalescence(self) -> float | None: ...


def _check_population(N: int, minimum: int = 2) -> None:
    if not isinstance(N, (int, np.integer)) or N < minimum:
        raise ConfigurationError(f"population size N must be an integer >= {minimum}, got {N!r}")


def _check_psi(psi: float) -> None:
    if not 0 < psi <= 1:
        raise ConfigurationError(f"psi must lie in (0, 1], got {psi}")


@dataclass(frozen=True)
class WrightFisher:
    """Every child picks an unordered pair of distinct parents uniformly."""

    N: int
    name: str = field(default="wf", init=False)

    def __post_init__(self):
        _check_population(self.N)

    def sample(self, rng: np.random.Generator) -> OffspringMatrix:
        a, b = _parents_wf(np.arange(self.N), self.N, rng)
        return OffspringMatrix.from_child_pairs(self.N, a, b)

    def exact_pair_coalescence(self) -> float:
        return 1.0 / (2 * self.N)


@dataclass(frozen=True)
class RandomFitness:
    """
    Parent pair ``{i, j}`` is chosen with probability ``W_i W_j / Z_N``.

    ``law`` is ``"exponential"`` (finite variance) or ``"pareto"`` with tail
    ``P(W >= z) = c_w z^-alpha``. ``p_zero`` puts an atom of ``W`` at zero;
    generations with ``Z_N = 0`` are redrawn.
    """

    N: int
    law: str = "exponential"
    alpha: float = 1.5
    c_w: float = 1.0
    p_zero: float = 0.0
    name: str = field(default="random-fitness", init=False)

    def __post_init__(self):
        _check_population(self.N)
        if self.law not in ("exponential", "pareto"):
            raise ConfigurationError(f"unknown fitness law {self.law!r}")
        if self.law == "pareto" and not 1 < self.alpha < 2:
            raise ConfigurationError(f"alpha must lie in (1, 2), got {self.alpha}")
        if self.c_w <= 0:
            raise ConfigurationError("c_w must be positive")
        if not 0 <= self.p_zero < 1:
            raise ConfigurationError("p_zero must lie in [0, 1)")

    def _fitness(self, rng: np.random.Generator) -> npt.NDArray[np.float64]:
        if self.law == "exponential":
            w = rng.exponential(size=self.N)
        else:
            u = 1.0 - rng.random(self.N)
            w = (self.c_w / u) ** (1.0 / self.alpha)
        if self.p_zero:
            w[rng.random(self.N) < self.p_zero] = 0.0
        return w

    def sample(self, rng: np.random.Generator) -> OffspringMatrix:
        redraws = 0
        while True:
            w = self._fitness(rng)
            if np.count_nonzero(w) >= 2:
                break
            redraws += 1
        if redraws:
            logger.debug("random fitness: Z_N = 0, redrew the fitness vector %d times", redraws)
        p = w / w.sum()
        a = rng.choice(self.N, size=self.N, p=p)
        b = rng.choice(self.N, size=self.N, p=p)
        clash = np.flatnonzero(a == b)
        while clash.size:
            b[clash] = rng.choice(self.N, size=clash.size, p=p)
            clash = clash[a[clash] == b[clash]]
        return OffspringMatrix.from_child_pairs(self.N, a, b, redraws)

    def exact_pair_coalescence(self) -> None:
        return None


@dataclass(frozen=True)
class GWCouples:
    """
    Couples produce potential offspring, N of which are kept.

    Each of the ``N(N-1)/2`` couples is fertile with probability ``c/N``; a
    fertile couple has ``X >= 1`` potential offspring, geometric with the
    given ``mean`` or discrete Pareto ``ceil(U^(-1/alpha))``. The next
    generation samples N potential offspring without replacement.
    Generations with fewer than N potential offspring are redrawn.
    """

    N: int
    c: float = 4.0
    law: str = "geometric"
    mean: float = 2.0
    alpha: float = 1.5
    name: str = field(default="gw-couples", init=False)

    def __post_init__(self):
        _check_population(self.N)
        if self.c <= 0 or self.c > self.N:
            raise ConfigurationError(f"fertility constant c must lie in (0, N], got {self.c}")
        if self.law == "geometric":
            if self.mean < 1:
                raise ConfigurationError("geometric mean must be at least 1")
        elif self.law == "pareto":
            if not 1 < self.alpha < 2:
                raise ConfigurationError(f"alpha must lie in (1, 2), got {self.alpha}")
        else:
            raise ConfigurationError(f"unknown potential offspring law {self.law!r}")
        if self.c * self.expected_offspring() <= 2:
            raise ConfigurationError("need E[X] > 2/c for a viable population")

    def expected_offspring(self) -> float:
        if self.law == "geometric":
            return self.mean
        return 1.0 + float(special.zeta(self.alpha))

    def _couples(self, k: IntArray) -> tuple[IntArray, IntArray]:
        # invert the row-major index of pairs i < j
        n = self.N
        i = n - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5).astype(np.int64)
        j = k + i + 1 - n * (n - 1) // 2 + (n - i) * (n - i - 1) // 2
        return i, j

    def sample(self, rng: np.random.Generator) -> OffspringMatrix:
        total_pairs = self.N * (self.N - 1) // 2
        redraws = 0
        while True:
            fertile = rng.binomial(total_pairs, self.c / self.N)
            keys = rng.choice(total_pairs, size=fertile, replace=False)
            if self.law == "geometric":
                x = rng.geometric(1.0 / self.mean, size=fertile)
            else:
                x = np.ceil((1.0 - rng.random(fertile)) ** (-1.0 / self.alpha)).astype(np.int64)
            if x.sum() >= self.N:
                break
            redraws += 1
        if redraws:
            logger.debug("GW couples: %d generations with too few potential offspring", redraws)
        kept = rng.multivariate_hypergeometric(x, self.N)
        keys = keys[kept > 0]
        i, j = self._couples(keys)
        order = np.lexsort((j, i))
        pairs = np.stack([i, j], axis=1)[order]
        return OffspringMatrix(self.N, pairs, kept[kept > 0][order].astype(np.int64), redraws)

    def exact_pair_coalescence(self) -> None:
        return None


@dataclass(frozen=True)
class LargeFamilyCouple:
    """
    With probability ``N^-gamma`` a uniform couple has ``floor(psi N)``
    children together; the other ``N - 2`` individuals produce the rest by
    Wright-Fisher. Otherwise the couple has a single child.
    """

    N: int
    psi: float
    gamma: float = 1.0
    name: str = field(default="large-family-couple", init=False)

    def __post_init__(self):
        _check_population(self.N, 4)
        _check_psi(self.psi)
        if self.gamma <= 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if math.floor(self.psi * self.N) < 1:
            raise ConfigurationError("floor(psi N) must be at least 1")

    @property
    def family_size(self) -> int:
        return int(math.floor(self.psi * self.N))

    def sample(self, rng: np.random.Generator) -> OffspringMatrix:
        k = _draw_big_family(self.N, self.psi, self.gamma, rng)
        couple = rng.choice(self.N, size=2, replace=False)
        others = np.setdiff1d(np.arange(self.N), couple)
        a, b = _parents_wf(others, self.N - k, rng)
        a = np.concatenate([np.full(k, couple[0]), a])
        b = np.concatenate([np.full(k, couple[1]), b])
        return OffspringMatrix.from_child_pairs(self.N, a, b)

    def exact_pair_coalescence(self) -> float:
        n = self.N
        p = n ** (-self.gamma)

        def falling(k: int) -> float:
            in_couple = 2.0 / n * k * (k - 1)
            outside = (1 - 2.0 / n) * (n - k) * (n - k - 1) * 4.0 / (n - 2) ** 2
            return in_couple + outside

        moment = p * falling(self.family_size) + (1 - p) * falling(1)
        return moment / (8.0 * (n - 1))


@dataclass(frozen=True)
class LargeFamilyIndividual:
    """
    With probability ``N^-gamma`` a uniform individual has ``floor(psi N)``
    children, each with an independent uniform partner; the rest of the
    children come from Wright-Fisher among the other individuals.
    """

    N: int
    psi: float
    gamma: float = 1.0
    name: str = field(default="large-family-individual", init=False)

    def __post_init__(self):
        _check_population(self.N, 3)
        _check_psi(self.psi)
        if self.gamma <= 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if math.floor(self.psi * self.N) < 1:
            raise ConfigurationError("floor(psi N) must be at least 1")

    @property
    def family_size(self) -> int:
        return int(math.floor(self.psi * self.N))

    def sample(self, rng: np.random.Generator) -> OffspringMatrix:
        k = _draw_big_family(self.N, self.psi, self.gamma, rng)
        star = int(rng.integers(self.N))
        others = np.delete(np.arange(self.N), star)
        partners = others[rng.integers(self.N - 1, size=k)]
        a, b = _parents_wf(others, self.N - k, rng)
        a = np.concatenate([np.full(k, star), a])
        b = np.concatenate([partners, b])
        return OffspringMatrix.from_child_pairs(self.N, a, b)

    def exact_pair_coalescence(self) -> float:
        n = self.N
        p = n ** (-self.gamma)

        def falling(k: int) -> float:
            star = k * (k - 1) / n
            rest = (k * (k - 1) + 4.0 * k * (n - k) + 4.0 * (n - k) * (n - k - 1)) / (n - 1) ** 2
            return star + (1 - 1.0 / n) * rest

        moment = p * falling(self.family_size) + (1 - p) * falling(1)
        return moment / (8.0 * (n - 1))


@dataclass(frozen=True)
class TwoSexStar:
    """
    Separately exchangeable array for a two-sex population.

    With probability ``lam / N`` one uniform sex-1 individual has
    ``floor(beta N)`` children with uniform sex-2 partners; all remaining
    children pick a uniform sex-1 and a uniform sex-2 parent.
    ``lam = 0`` gives the two-sex Wright-Fisher model.
    """

    lam: float = 0.0
    beta: float = 0.5

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError("lambda must be nonnegative")
        if not 0 < self.beta < 1:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}")

    def sample_array(self, n1: int, n2: int, rng: np.random.Generator) -> tuple[IntArray, IntArray]:
        """Sex-1 and sex-2 ranks of the parents of each of ``n1 + n2`` children."""
        N = n1 + n2
        k = 0
        if self.lam and rng.random() < min(1.0, self.lam / N):
            k = int(math.floor(self.beta * N))
        star = np.full(k, rng.integers(n1))
        partners = rng.integers(n2, size=k)
        first = rng.integers(n1, size=N - k)
        second = rng.integers(n2, size=N - k)
        return np.concatenate([star, first]), np.concatenate([partners, second])


def two_sex_wrap(r: float, inner, N: int, rng: np.random.Generator) -> OffspringMatrix:
    """
    Embed a two-sex array into a diploid offspring matrix.

    A uniform subset of ``floor(rN)`` individuals forms sex 1; ``inner``
    returns sex-1 and sex-2 ranks per child, which are mapped to individuals
    in increasing order within each sex.
    """
    if not 0 < r < 1:
        raise ConfigurationError(f"sex ratio r must lie in (0, 1), got {r}")
    n1 = int(math.floor(r * N))
    n2 = N - n1
    if n1 < 1 or n2 < 1:
        raise ConfigurationError("both sexes need at least one individual")
    sex1 = np.sort(rng.choice(N, size=n1, replace=False))
    sex2 = np.setdiff1d(np.arange(N), sex1)
    k, ell = inner.sample_array(n1, n2, rng)
    if len(k) != N or len(ell) != N:
        raise ModelError(f"two-sex array has {len(k)} children, expected {N}")
    return OffspringMatrix.from_child_pairs(N, sex1[k], sex2[ell])


@dataclass(frozen=True)
class TwoSex:
    """Two-sex population wrapped into the diploid Cannings set-up."""

    N: int
    r: float = 0.5
    inner: TwoSexStar = field(default_factory=TwoSexStar)
    name: str = field(default="two-sex", init=False)

    def __post_init__(self):
        _check_population(self.N)
        if not 0 < self.r < 1:
            raise ConfigurationError(f"sex ratio r must lie in (0, 1), got {self.r}")
        if math.floor(self.r * self.N) < 1 or self.N - math.floor(self.r * self.N) < 1:
            raise ConfigurationError("both sexes need at least one individual")

    def sample(self, rng: np.random.Generator) -> OffspringMatrix:
        return two_sex_wrap(self.r, self.inner, self.N, rng)

    def exact_pair_coalescence(self) -> None:
        return None


def sample_offspring_matrix(model: CanningsModel, rng: np.random.Generator) -> OffspringMatrix:
    """Draw one generation's offspring matrix and check its invariants."""
    v = model.sample(rng)
    v.validate()
    return v


def realize_slice(V: OffspringMatrix, rng: np.random.Generator) -> PedigreeSlice:
    """
    Balls in boxes: match children to parent-pair boxes uniformly, then
    decide parental roles by a fair coin per child.
    """
    boxes = np.repeat(np.arange(len(V.counts)), V.counts)
    rng.shuffle(boxes)
    a = V.pairs[boxes, 0]
    b = V.pairs[boxes, 1]
    coin = rng.integers(0, 2, size=V.N).astype(bool)
    p0 = np.where(coin, b, a)
    p1 = np.where(coin, a, b)
    return PedigreeSlice(V.N, p0, p1, V.digest())


@dataclass(frozen=True)
class CoalescenceEstimate:
    """Monte Carlo estimate of c_N with its standard error and closed form."""

    estimate: float
    stderr: float
    reps: int
    exact: float | None = None


def pair_coalescence_prob(model: CanningsModel, mc_reps: int, rng: np.random.Generator) -> CoalescenceEstimate:
    """
    Estimate ``c_N = E[(V_1)_2] / (8(N-1))``.

    Each sampled matrix contributes the average of ``V_i (V_i - 1)`` over
    all individuals, which has the same mean as ``(V_1)_2`` by
    exchangeability.
    """
    if mc_reps < 1:
        raise ValueError("mc_reps must be at least 1")
    N = model.N
    values = np.empty(mc_reps)
    for rep in range(mc_reps):
        totals = model.sample(rng).totals()
        values[rep] = np.mean(totals * (totals - 1.0))
    values /= 8.0 * (N - 1)
    stderr = float(values.std(ddof=1) / math.sqrt(mc_reps)) if mc_reps > 1 else math.nan
    exact = getattr(model, "exact_pair_coalescence", lambda: None)()
    logger.info("c_N estimate %.6g +- %.2g over %d draws (exact %s)", values.mean(), stderr, mc_reps, exact)
    return CoalescenceEstimate(float(values.mean()), stderr, mc_reps, exact)


def generation_paintbox(V: OffspringMatrix) -> Paintbox:
    """Ranked total offspring numbers divided by 4N, each entry doubled."""
    return Paintbox(np.repeat(V.totals() / (4.0 * V.N), 2))


class Pedigree:
    """
    Lazily generated pedigree of a Cannings model.

    Generation ``g`` (``g = 0`` maps the sampled generation to its parents)
    is recomputed from the stream ``(seed, "pedigree", g)``, so reading it
    twice gives identical slices. Recent generations are kept in a bounded
    cache; :meth:`materialize` pins a prefix permanently.
    """

    def __init__(self, model: CanningsModel, seed: int, cache_size: int = 4096) -> None:
        self.model = model
        self.seed = int(seed)
        self.cache_size = cache_size
        self._pinned: dict[int, tuple[OffspringMatrix, PedigreeSlice]] = {}
        self._cache: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    @property
    def N(self) -> int:
        return self.model.N

    @property
    def model_id(self) -> str:
        return self.model.name

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = OrderedDict()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def _build(self, g: int) -> tuple[OffspringMatrix, PedigreeSlice]:
        rng = streams.stream(self.seed, streams.PEDIGREE, g)
        v = sample_offspring_matrix(self.model, rng)
        return v, realize_slice(v, rng)

    def generation(self, g: int) -> tuple[OffspringMatrix, PedigreeSlice]:
        if g < 0:
            raise IndexError("generation index must be nonnegative")
        if g in self._pinned:
            return self._pinned[g]
        with self._lock:
            hit = self._cache.get(g)
            if hit is not None:
                self._cache.move_to_end(g)
                return hit
        value = self._build(g)
        with self._lock:
            self._cache[g] = value
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return value

    def matrix(self, g: int) -> OffspringMatrix:
        return self.generation(g)[0]

    def slice(self, g: int) -> PedigreeSlice:
        return self.generation(g)[1]

    def materialize(self, generations: int) -> list[PedigreeSlice]:
        """Pin generations ``0..generations-1`` in memory and return their slices."""
        for g in range(generations):
            if g not in self._pinned:
                self._pinned[g] = self.generation(g)
        return [self._pinned[g][1] for g in range(generations)]

    def export_table(self, path: str | Path, generations: int) -> None:
        """Write ``generation, child, p0, p1`` rows (individuals 1-based)."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["generation", "child", "p0", "p1"])
            for g in range(generations):
                s = self.slice(g)
                for child, (a, b) in enumerate(zip(s.p0.tolist(), s.p1.tolist()), start=1):
                    writer.writerow([g, child, a + 1, b + 1])

    def digest(self) -> str:
        params = {k: v for k, v in asdict(self.model).items() if k != "inner"}
        text = f"{self.model_id}:{sorted(params.items())}:{getattr(self.model, 'inner', None)}:{self.seed}"
        return hashlib.sha1(text.encode("utf-8")).hexdigest()


_MODELS = {
    "wf": WrightFisher,
    "random-fitness": RandomFitness,
    "gw-couples": GWCouples,
    "large-family-couple": LargeFamilyCouple,
    "large-family-individual": LargeFamilyIndividual,
    "two-sex": TwoSex,
}


def build_model(spec: Mapping[str, Any]) -> CanningsModel:
    """
    Build a catalog model from a config mapping such as
    ``{"name": "large-family-couple", "N": 1000, "psi": 0.5, "gamma": 1}``.

    The two-sex model takes ``r``, ``lam`` and ``beta``.
    """
    params = dict(spec)
    name = params.pop("name", None)
    if name not in _MODELS:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(_MODELS)}")
    if "N" not in params:
        raise ConfigurationError(f"model {name!r} needs a population size N")
    if name == "two-sex":
        inner = TwoSexStar(lam=float(params.pop("lam", 0.0)), beta=float(params.pop("beta", 0.5)))
        params["inner"] = inner
    try:
        return _MODELS[name](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for model {name!r}: {exc}") from None

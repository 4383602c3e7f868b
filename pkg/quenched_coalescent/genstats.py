"""
Statistics of simulated genealogies: branch-length spectra, the site
frequency spectrum and the split of Var(T_total) into a part explained by
the pedigree and a part among loci given the pedigree.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import daiquiri
import numpy as np
import numpy.typing as npt
from joblib import Parallel, delayed

from . import streams
from .exceptions import ConfigurationError, StatisticsError
from .limit_coalescent import CoalescentRun, PsiPath, run_jump_hold
from .paintbox import Paintbox
from .partitions import Partition

__all__ = [
    "BranchSpectrum",
    "SpectrumAccumulator",
    "SFSEstimate",
    "VarianceDecomposition",
    "DeltaModel",
    "PedigreeRecord",
    "branch_spectrum",
    "sfs_estimate",
    "mutation_spectrum",
    "total_variation",
    "max_pairwise_tv",
    "max_tv_to_pooled",
    "delta_model_locus",
    "run_delta_experiment",
    "variance_decomposition",
]

logger = daiquiri.getLogger(__name__)

#: Default observation window, in units of the annealed pair clock.
DEFAULT_HORIZON = 50.0


@dataclass(frozen=True, eq=False)
class BranchSpectrum:
    """
    Branch lengths of one genealogy.

    ``lengths[i - 1]`` is the total length of branches subtending exactly
    ``i`` leaves, ``i = 1..n-1``; ``t_total`` is their sum.
    """

    n: int
    lengths: npt.NDArray[np.float64]
    t_total: float
    censored: bool = False


def branch_spectrum(run) -> BranchSpectrum:
    """
    Accumulate branch lengths over the holding intervals of ``run``.

    Works on a :class:`~quenched_coalescent.limit_coalescent.CoalescentRun`
    or a :class:`~quenched_coalescent.quenched_genealogy.GenealogyTree`. A
    censored run is cut at its end time and flagged.
    """
    n = run.n
    lengths = np.zeros(max(n - 1, 0))
    times = list(run.times)
    end = run.end_time if run.censored else times[-1]
    for k, state in enumerate(run.states):
        stop = times[k + 1] if k + 1 < len(times) else end
        dt = stop - times[k]
        if dt <= 0:
            continue
        sizes = np.asarray(state.block_sizes)
        sizes = sizes[sizes < n]
        np.add.at(lengths, sizes - 1, dt)
    return BranchSpectrum(n, lengths, float(lengths.sum()), bool(run.censored))


@dataclass(frozen=True)
class SFSEstimate:
    proportions: npt.NDArray[np.float64]
    stderr: npt.NDArray[np.float64]
    loci: int
    censored: int = 0
    per_locus: npt.NDArray[np.float64] | None = None


@dataclass
class SpectrumAccumulator:
    """
    Running sums for the ratio estimator ``sum L_i / sum T_total``.

    Keeps ``sum L``, ``sum T``, ``sum L^2``, ``sum L T`` and ``sum T^2`` so
    that accumulators from different workers can be merged.
    """

    n: int
    count: int = 0
    censored: int = 0
    sum_l: npt.NDArray[np.float64] = None
    sum_ll: npt.NDArray[np.float64] = None
    sum_lt: npt.NDArray[np.float64] = None
    sum_t: float = 0.0
    sum_tt: float = 0.0

    def __post_init__(self):
        size = max(self.n - 1, 0)
        for name in ("sum_l", "sum_ll", "sum_lt"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(size))

    def add(self, spectrum: BranchSpectrum) -> None:
        if spectrum.n != self.n:
            raise StatisticsError(f"spectrum of {spectrum.n} leaves added to n={self.n}")
        if spectrum.censored:
            self.censored += 1
            return
        l, t = spectrum.lengths, spectrum.t_total
        self.count += 1
        self.sum_l += l
        self.sum_ll += l * l
        self.sum_lt += l * t
        self.sum_t += t
        self.sum_tt += t * t

    def merge(self, other: "SpectrumAccumulator") -> "SpectrumAccumulator":
        if other.n != self.n:
            raise StatisticsError("cannot merge spectra of different sample sizes")
        return SpectrumAccumulator(
            self.n,
            self.count + other.count,
            self.censored + other.censored,
            self.sum_l + other.sum_l,
            self.sum_ll + other.sum_ll,
            self.sum_lt + other.sum_lt,
            self.sum_t + other.sum_t,
            self.sum_tt + other.sum_tt,
        )

    def estimate(self) -> SFSEstimate:
        if self.count == 0:
            raise StatisticsError("no uncensored genealogy to estimate the SFS from")
        total = float(self.sum_l.sum())
        if total <= 0:
            raise StatisticsError("all genealogies have zero total length")
        ratio = self.sum_l / total
        m = self.count
        if m > 1:
            # delta method: residuals L_i - R_i T
            ss = self.sum_ll - 2 * ratio * self.sum_lt + ratio**2 * self.sum_tt
            mean_t = self.sum_t / m
            stderr = np.sqrt(np.maximum(ss, 0.0) / (m * (m - 1))) / mean_t
        else:
            stderr = np.full_like(ratio, np.nan)
        return SFSEstimate(ratio, stderr, m, self.censored)


def sfs_estimate(spectra: Iterable[BranchSpectrum], per_locus: bool = False) -> SFSEstimate:
    """
    Expected proportion of polymorphic sites in each frequency class.

    Pools uncensored spectra as ``sum L_i / sum T_total``. With
    ``per_locus`` the normalized spectrum of every uncensored locus is
    returned as well, one row per locus.
    """
    spectra = list(spectra)
    if not spectra:
        raise StatisticsError("no spectra given")
    acc = SpectrumAccumulator(spectra[0].n)
    for s in spectra:
        acc.add(s)
    if acc.censored:
        logger.warning("%d of %d genealogies censored and left out of the SFS", acc.censored, len(spectra))
    result = acc.estimate()
    if per_locus:
        rows = np.array([s.lengths / s.t_total for s in spectra if not s.censored and s.t_total > 0])
        result = SFSEstimate(result.proportions, result.stderr, result.loci, result.censored, rows)
    return result


def mutation_spectrum(spectrum: BranchSpectrum, theta: float, rng: np.random.Generator) -> npt.NDArray[np.int64]:
    """Infinite-sites counts: ``Poisson(theta / 2 * L_i)`` segregating sites per class."""
    if theta < 0:
        raise ConfigurationError("theta must be nonnegative")
    return rng.poisson(theta / 2.0 * spectrum.lengths)


def total_variation(p: npt.ArrayLike, q: npt.ArrayLike) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def max_pairwise_tv(estimates: Sequence[npt.ArrayLike]) -> float:
    return max((total_variation(a, b) for a, b in itertools.combinations(estimates, 2)), default=0.0)


def max_tv_to_pooled(estimates: Sequence[npt.ArrayLike], pooled: npt.ArrayLike) -> float:
    return max((total_variation(a, pooled) for a in estimates), default=0.0)


@dataclass(frozen=True)
class DeltaModel:
    """
    Large families of a single individual at Poisson times.

    At each event every block independently traces back to one of the two
    chromosomes of the highly successful individual with probability
    ``psi / 4`` each and escapes otherwise.

    With ``time_unit="pair"`` time is measured so that two genes coalesce at
    annealed rate one: the Kingman pair rate is ``1 / (1 + lam psi^2 / 8)``
    and events occur at ``lam`` times that rate. ``lam = inf`` leaves events
    only, at rate ``8 / psi^2``. With ``time_unit="kingman"`` the Kingman
    pair rate is one and events occur at rate ``lam``.
    """

    psi: float
    lam: float
    time_unit: str = "pair"

    def __post_init__(self):
        if not 0 < self.psi <= 1:
            raise ConfigurationError(f"psi must lie in (0, 1], got {self.psi}")
        if not self.lam > 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if self.time_unit not in ("pair", "kingman"):
            raise ConfigurationError(f"unknown time unit {self.time_unit!r}")
        if self.time_unit == "kingman" and math.isinf(self.lam):
            raise ConfigurationError("lambda = inf needs time_unit='pair'")

    @property
    def paintbox(self) -> Paintbox:
        return Paintbox([self.psi / 4.0] * 2)

    @property
    def kingman_rate(self) -> float:
        if self.time_unit == "kingman":
            return 1.0
        if math.isinf(self.lam):
            return 0.0
        return 1.0 / (1.0 + self.lam * self.psi**2 / 8.0)

    @property
    def event_rate(self) -> float:
        if self.time_unit == "kingman":
            return self.lam
        if math.isinf(self.lam):
            return 8.0 / self.psi**2
        return self.lam * self.kingman_rate

    @property
    def pair_rate(self) -> float:
        """Annealed coalescence rate of two genes."""
        return self.kingman_rate + self.event_rate * self.paintbox.l2sq

    @property
    def default_horizon(self) -> float:
        return DEFAULT_HORIZON / self.pair_rate

    def sample_pedigree(self, horizon: float | None, rng: np.random.Generator) -> PsiPath:
        """The pedigree reduced to the list of its large-family times."""
        horizon = self.default_horizon if horizon is None else horizon
        count = rng.poisson(self.event_rate * horizon)
        times = np.sort(rng.uniform(0.0, horizon, size=count))
        return PsiPath.regular(times, self.paintbox, horizon, f"delta psi={self.psi:g} lambda={self.lam:g}")

    def locus(self, pedigree: PsiPath, n: int, rng: np.random.Generator) -> CoalescentRun:
        return run_jump_hold(pedigree, self.kingman_rate, Partition.singletons(n), rng=rng)


def delta_model_locus(
    event_times: npt.ArrayLike,
    psi: float,
    n: int,
    rng: np.random.Generator,
    kingman_rate: float = 1.0,
    horizon: float | None = None,
) -> CoalescentRun:
    """
    One locus on a pedigree given as its list of large-family times.

    Blocks merge pairwise at ``kingman_rate`` between events; at an event
    each block picks chromosome A or B with probability ``psi / 4`` each.
    """
    if not 0 < psi <= 1:
        raise ConfigurationError(f"psi must lie in (0, 1], got {psi}")
    times = np.asarray(event_times, dtype=float)
    if horizon is None:
        # without a pair clock nothing happens after the last event
        horizon = math.inf if kingman_rate > 0 else (float(times[-1]) if len(times) else 0.0)
    path = PsiPath.regular(times, Paintbox([psi / 4.0] * 2), horizon)
    return run_jump_hold(path, kingman_rate, Partition.singletons(n), rng=rng, horizon=horizon)


@dataclass
class PedigreeRecord:
    """Per-pedigree summary: the spectrum sums and every locus's T_total."""

    index: int
    spectra: SpectrumAccumulator
    t_total: npt.NDArray[np.float64]
    events: int = 0

    @property
    def sfs(self) -> SFSEstimate:
        return self.spectra.estimate()


def _pedigree_work(model: DeltaModel, n: int, index: int, loci: int, seed: int, horizon) -> PedigreeRecord:
    pedigree = model.sample_pedigree(horizon, streams.stream(seed, streams.PSI, index))
    acc = SpectrumAccumulator(n)
    t_total = np.empty(loci)
    for locus in range(loci):
        run = model.locus(pedigree, n, streams.stream(seed, streams.LOCUS, index, locus))
        spectrum = branch_spectrum(run)
        acc.add(spectrum)
        t_total[locus] = spectrum.t_total if not spectrum.censored else np.nan
    return PedigreeRecord(index, acc, t_total, len(pedigree))


def run_delta_experiment(
    model: DeltaModel,
    n: int,
    pedigrees: int,
    loci: int,
    seed: int,
    n_jobs: int = 1,
    horizon: float | None = None,
) -> list[PedigreeRecord]:
    """
    ``loci`` independent loci on each of ``pedigrees`` independent pedigrees.

    Pedigree ``p`` uses the stream ``(seed, "psi", p)``, locus ``l`` on it
    ``(seed, "locus", p, l)``.
    """
    if pedigrees < 1 or loci < 1:
        raise ConfigurationError("need at least one pedigree and one locus")
    logger.info(
        "delta model psi=%g lambda=%g: kingman rate %.6g, event rate %.6g",
        model.psi,
        model.lam,
        model.kingman_rate,
        model.event_rate,
    )
    if n_jobs == 1:
        records = [_pedigree_work(model, n, p, loci, seed, horizon) for p in range(pedigrees)]
    else:
        records = Parallel(n_jobs=n_jobs)(
            delayed(_pedigree_work)(model, n, p, loci, seed, horizon) for p in range(pedigrees)
        )
    censored = sum(r.spectra.censored for r in records)
    if censored:
        logger.warning("%d of %d loci censored at the horizon", censored, pedigrees * loci)
    return records


def _annealed_work(model: DeltaModel, n: int, indices, seed: int, horizon) -> list[float]:
    out = []
    for a in indices:
        pedigree = model.sample_pedigree(horizon, streams.stream(seed, streams.ANNEALED, a, 0))
        spectrum = branch_spectrum(model.locus(pedigree, n, streams.stream(seed, streams.ANNEALED, a, 1)))
        out.append(np.nan if spectrum.censored else spectrum.t_total)
    return out


def _variance_stderr(x: npt.NDArray[np.float64]) -> float:
    m = len(x)
    centred = x - x.mean()
    m2 = np.mean(centred**2)
    m4 = np.mean(centred**4)
    return math.sqrt(max(m4 - m2**2, 0.0) / m)


@dataclass(frozen=True)
class VarianceDecomposition:
    """
    ``Var(T_total) = E[Var(T_total | G)] + Var(E[T_total | G])``.

    ``between`` is ``total_var - within``; ``between_direct`` is the
    sample variance of per-pedigree means less ``within / L``. Negative
    values are clamped to zero and flagged in ``clamped``.
    """

    total_var: float
    within: float
    between: float
    between_direct: float
    pedigrees: int
    loci: int
    total_se: float
    within_se: float
    between_se: float
    clamped: bool = False
    pedigree_means: npt.NDArray[np.float64] = field(default=None, repr=False)
    pedigree_vars: npt.NDArray[np.float64] = field(default=None, repr=False)
    annealed: npt.NDArray[np.float64] = field(default=None, repr=False)

    @property
    def within_fraction(self) -> float:
        return self.within / self.total_var

    @property
    def between_fraction(self) -> float:
        return self.between / self.total_var


def variance_decomposition(
    model: DeltaModel,
    n: int,
    P: int,
    L: int,
    seed: int,
    total_pedigrees: int | None = None,
    n_jobs: int = 1,
    horizon: float | None = None,
    records: list[PedigreeRecord] | None = None,
) -> VarianceDecomposition:
    """
    Law-of-total-variance split of ``T_total`` for the delta model.

    The total variance comes from ``total_pedigrees`` (default ``10 P``)
    loci each on a fresh pedigree; the within-pedigree part from ``L`` loci
    on each of ``P`` pedigrees. ``records`` may hold an already computed
    :func:`run_delta_experiment` result.
    """
    if P < 2 or L < 2:
        raise StatisticsError(f"need at least two pedigrees and two loci, got P={P}, L={L}")
    if records is None:
        records = run_delta_experiment(model, n, P, L, seed, n_jobs=n_jobs, horizon=horizon)
    table = np.vstack([r.t_total for r in records])
    means = np.nanmean(table, axis=1)
    variances = np.nanvar(table, axis=1, ddof=1)
    within = float(np.mean(variances))
    within_se = float(np.std(variances, ddof=1) / math.sqrt(P))

    m = total_pedigrees if total_pedigrees is not None else 10 * P
    chunks = [range(i, min(i + 64, m)) for i in range(0, m, 64)]
    if n_jobs == 1:
        parts = [_annealed_work(model, n, c, seed, horizon) for c in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(_annealed_work)(model, n, c, seed, horizon) for c in chunks)
    annealed = np.array([t for part in parts for t in part])
    annealed = annealed[~np.isnan(annealed)]
    if len(annealed) < 2:
        raise StatisticsError("fewer than two uncensored annealed loci")
    total = float(np.var(annealed, ddof=1))
    total_se = _variance_stderr(annealed)

    between = total - within
    direct = float(np.var(means, ddof=1)) - within / L
    clamped = between < 0 or direct < 0
    if clamped:
        logger.warning("negative between-pedigree estimate clamped to 0 (total-within=%g, direct=%g)", between, direct)
    logger.info("Var(T_total)=%.4g within=%.4g between=%.4g", total, within, max(between, 0.0))
    return VarianceDecomposition(
        total,
        within,
        max(between, 0.0),
        max(direct, 0.0),
        P,
        L,
        total_se,
        within_se,
        math.hypot(total_se, within_se),
        clamped,
        means,
        variances,
        annealed,
    )

import math
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

try:
    import quenched_coalescent
except ImportError:
    # Ensure local package is importable
    sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from quenched_coalescent import streams
from quenched_coalescent.cannings_pedigree import Pedigree, WrightFisher
from quenched_coalescent.exceptions import ConfigurationError, StatisticsError
from quenched_coalescent.genstats import (
    BranchSpectrum,
    DeltaModel,
    SpectrumAccumulator,
    branch_spectrum,
    delta_model_locus,
    max_pairwise_tv,
    max_tv_to_pooled,
    mutation_spectrum,
    run_delta_experiment,
    sfs_estimate,
    total_variation,
    variance_decomposition,
)
from quenched_coalescent.limit_coalescent import CoalescentRun, PsiPath, run_flow
from quenched_coalescent.paintbox import Paintbox
from quenched_coalescent.partitions import GroupedPartition, Partition
from quenched_coalescent.quenched_genealogy import run_locus


def star(n, t):
    return CoalescentRun(n, [0.0, t], [Partition.singletons(n), Partition.trivial(n)], 0.0, end_time=t)


class TestBranchSpectrum:
    def test_pair(self):
        s = branch_spectrum(star(2, 0.8))
        assert_allclose(s.lengths, [1.6])
        assert s.t_total == pytest.approx(1.6)
        assert not s.censored

    def test_star(self):
        s = branch_spectrum(star(4, 0.7))
        assert_allclose(s.lengths, [2.8, 0.0, 0.0])

    def test_caterpillar(self):
        states = [Partition.singletons(3), Partition.parse("{1,2|3}"), Partition.trivial(3)]
        s = branch_spectrum(CoalescentRun(3, [0.0, 1.0, 3.0], states, 1.0, end_time=3.0))
        # three singletons for 1, then one singleton and one pair for 2
        assert_allclose(s.lengths, [5.0, 2.0])
        assert s.t_total == pytest.approx(7.0)

    def test_censored(self):
        run = run_flow(PsiPath.empty(3.0), 0.0, Partition.singletons(3))
        s = branch_spectrum(run)
        assert s.censored
        assert_allclose(s.lengths, [9.0, 0.0])

    def test_kingman_expectation(self):
        acc = []
        for r in range(4000):
            run = run_flow(PsiPath.empty(), 1.0, Partition.singletons(3), rng=streams.stream(2, "k", r))
            acc.append(branch_spectrum(run).lengths)
        acc = np.array(acc)
        mean = acc.mean(axis=0)
        se = acc.std(axis=0, ddof=1) / math.sqrt(len(acc))
        assert np.all(np.abs(mean - [2.0, 1.0]) < 4 * se)

    def test_quenched_tree(self):
        pedigree = Pedigree(WrightFisher(20), 4)
        xi0 = GroupedPartition.from_partition(Partition.singletons(2))
        tree = run_locus(pedigree, xi0, None, np.random.default_rng(1), c_N=0.025).tree
        s = branch_spectrum(tree)
        assert s.t_total == pytest.approx(2 * tree.mrca_time)


class TestSFS:
    def test_star_spectrum(self):
        est = sfs_estimate([branch_spectrum(star(4, t)) for t in (0.5, 1.0, 2.0)])
        assert_allclose(est.proportions, [1.0, 0.0, 0.0])
        assert est.loci == 3

    def test_normalized(self):
        spectra = [
            branch_spectrum(run_flow(PsiPath.empty(), 1.0, Partition.singletons(5), rng=streams.stream(3, "s", r)))
            for r in range(200)
        ]
        est = sfs_estimate(spectra, per_locus=True)
        assert est.proportions.sum() == pytest.approx(1.0)
        assert est.per_locus.shape == (200, 4)
        assert_allclose(est.per_locus.sum(axis=1), 1.0)
        assert np.all(est.stderr > 0)

    def test_kingman_harmonic(self):
        """Test the Kingman SFS proportions against 1/i normalized."""
        n = 6
        spectra = [
            branch_spectrum(run_flow(PsiPath.empty(), 1.0, Partition.singletons(n), rng=streams.stream(8, "h", r)))
            for r in range(3000)
        ]
        est = sfs_estimate(spectra)
        expected = 1 / np.arange(1, n)
        expected /= expected.sum()
        assert np.all(np.abs(est.proportions - expected) < 4 * est.stderr)

    def test_censored_left_out(self):
        censored = BranchSpectrum(3, np.array([9.0, 0.0]), 9.0, True)
        est = sfs_estimate([censored, branch_spectrum(star(3, 1.0))])
        assert est.censored == 1
        assert est.loci == 1
        with pytest.raises(StatisticsError):
            sfs_estimate([censored, censored])

    def test_accumulator_merge(self):
        spectra = [BranchSpectrum(3, np.array([a, b]), a + b) for a, b in [(1.0, 0.5), (2.0, 0.0), (0.3, 0.3)]]
        left, right, whole = SpectrumAccumulator(3), SpectrumAccumulator(3), SpectrumAccumulator(3)
        for s in spectra[:2]:
            left.add(s)
        right.add(spectra[2])
        for s in spectra:
            whole.add(s)
        merged = left.merge(right)
        assert merged.count == 3
        assert_allclose(merged.estimate().proportions, whole.estimate().proportions)
        assert_allclose(merged.estimate().stderr, whole.estimate().stderr)
        with pytest.raises(StatisticsError):
            left.merge(SpectrumAccumulator(4))

    def test_mutations(self):
        s = BranchSpectrum(3, np.array([4.0, 1.0]), 5.0)
        assert_array_equal(mutation_spectrum(s, 0.0, np.random.default_rng(0)), [0, 0])
        rng = np.random.default_rng(1)
        counts = np.array([mutation_spectrum(s, 2.0, rng) for _ in range(5000)])
        assert_allclose(counts.mean(axis=0), [4.0, 1.0], rtol=0.05)
        with pytest.raises(ConfigurationError):
            mutation_spectrum(s, -1.0, rng)

    def test_total_variation(self):
        assert total_variation([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)
        estimates = [[1.0, 0.0], [0.5, 0.5], [0.75, 0.25]]
        assert max_pairwise_tv(estimates) == pytest.approx(0.5)
        assert max_tv_to_pooled(estimates, [0.75, 0.25]) == pytest.approx(0.25)
        assert max_pairwise_tv([[1.0]]) == 0.0


class TestDeltaModel:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 1e6, math.inf])
    def test_pair_clock(self, lam):
        model = DeltaModel(0.5, lam)
        assert model.pair_rate == pytest.approx(1.0)
        assert model.default_horizon == pytest.approx(50.0)

    def test_kingman_time_unit(self):
        model = DeltaModel(0.5, 2.0, time_unit="kingman")
        assert model.kingman_rate == 1.0
        assert model.event_rate == 2.0
        assert model.pair_rate == pytest.approx(1 + 2.0 * 0.25 / 8)

    def test_paintbox(self):
        assert DeltaModel(1.0, 1.0).paintbox == Paintbox([0.25, 0.25])

    def test_domain(self):
        with pytest.raises(ConfigurationError):
            DeltaModel(0.0, 1.0)
        with pytest.raises(ConfigurationError):
            DeltaModel(0.5, -1.0)
        with pytest.raises(ConfigurationError):
            DeltaModel(0.5, math.inf, time_unit="kingman")

    def test_single_event_merge(self):
        # two genes pick the same chromosome with probability 2 (psi / 4)^2
        rng = np.random.default_rng(11)
        draws = 20_000
        merged = sum(delta_model_locus([1.0], 1.0, 2, rng, kingman_rate=0.0).mrca_time is not None for _ in range(draws))
        p = 1 / 8
        assert abs(merged / draws - p) < 4 * math.sqrt(p * (1 - p) / draws)

    def test_no_events(self):
        run = delta_model_locus([], 0.5, 3, np.random.default_rng(0), kingman_rate=0.0)
        assert run.censored

    def test_annealed_pair_mrca(self):
        """Test that pair MRCA times average one on the pair clock."""
        model = DeltaModel(0.5, math.inf)
        times = []
        for r in range(4000):
            pedigree = model.sample_pedigree(None, streams.stream(5, streams.PSI, r))
            times.append(model.locus(pedigree, 2, streams.stream(5, streams.LOCUS, r)).mrca_time)
        times = np.array(times, dtype=float)
        assert abs(times.mean() - 1.0) < 4 * times.std(ddof=1) / math.sqrt(len(times))

    def test_experiment_reproducible(self):
        model = DeltaModel(0.5, 1.0)
        serial = run_delta_experiment(model, 4, 3, 5, seed=9)
        parallel = run_delta_experiment(model, 4, 3, 5, seed=9, n_jobs=2)
        for a, b in zip(serial, parallel):
            assert a.index == b.index
            assert_array_equal(a.t_total, b.t_total)
            assert_array_equal(a.sfs.proportions, b.sfs.proportions)

    def test_experiment_arguments(self):
        with pytest.raises(ConfigurationError):
            run_delta_experiment(DeltaModel(0.5, 1.0), 3, 0, 5, seed=1)


class TestVarianceDecomposition:
    def test_fields(self):
        model = DeltaModel(0.5, 1e6)
        result = variance_decomposition(model, 4, 4, 5, seed=3, total_pedigrees=40)
        assert result.pedigrees == 4 and result.loci == 5
        assert len(result.pedigree_means) == 4
        assert len(result.annealed) == 40
        assert result.within > 0
        assert result.between == pytest.approx(max(result.total_var - result.within, 0.0))
        if not result.clamped:
            assert result.within_fraction + result.between_fraction == pytest.approx(1.0)

    def test_reuses_records(self):
        model = DeltaModel(0.5, 1.0)
        records = run_delta_experiment(model, 3, 3, 4, seed=2)
        result = variance_decomposition(model, 3, 3, 4, seed=2, total_pedigrees=20, records=records)
        assert_allclose(result.pedigree_means, [np.nanmean(r.t_total) for r in records])

    def test_too_small(self):
        with pytest.raises(StatisticsError):
            variance_decomposition(DeltaModel(0.5, 1.0), 3, 1, 10, seed=0)
        with pytest.raises(StatisticsError):
            variance_decomposition(DeltaModel(0.5, 1.0), 3, 10, 1, seed=0)

    @pytest.mark.slow
    def test_pedigree_share_grows_with_psi(self):
        """Test that larger families push more variance between pedigrees."""
        shares = []
        for psi in (0.1, 1.0):
            result = variance_decomposition(DeltaModel(psi, 1e6), 10, 60, 60, seed=17, n_jobs=2)
            shares.append(result.between_fraction)
        assert shares[0] < shares[1]

    @pytest.mark.slow
    def test_within_fraction_at_full_family(self):
        """At psi = 1 about five percent of the total-length variance is within pedigrees."""
        result = variance_decomposition(DeltaModel(1.0, 1e6), 100, 100, 100, seed=23, total_pedigrees=2000, n_jobs=2)
        assert abs(result.within_fraction - 0.05) < 0.02

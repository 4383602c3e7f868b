import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_array_equal

try:
    import quenched_coalescent
except ImportError:
    # Ensure local package is importable
    sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from quenched_coalescent.cannings_pedigree import OffspringMatrix, PedigreeSlice, Pedigree, WrightFisher
from quenched_coalescent.genstats import branch_spectrum
from quenched_coalescent.partitions import GroupedPartition, Partition, coarsenings
from quenched_coalescent.quenched_genealogy import (
    GenePosition,
    aggregated_transition_prob,
    exact_step_law,
    init_sample,
    run_locus,
    run_loci,
    state_of,
    step,
)

# small offspring matrices; the upper triangle sums to the population size
MATRICES = [
    [[0, 2, 0, 0], [2, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]],
    [[0, 4, 0, 0], [4, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]],
    [[0, 1, 1, 1], [1, 0, 0, 0], [1, 0, 0, 1], [1, 0, 1, 0]],
    [[0, 3, 0, 0, 0], [3, 0, 0, 0, 0], [0, 0, 0, 1, 1], [0, 0, 1, 0, 0], [0, 0, 1, 0, 0]],
    [[0, 0, 0, 0, 0, 3], [0, 0, 1, 0, 0, 0], [0, 1, 0, 1, 0, 0], [0, 0, 1, 0, 1, 0], [0, 0, 0, 1, 0, 0], [3, 0, 0, 0, 0, 0]],
]


def singletons(n):
    return GroupedPartition.from_partition(Partition.singletons(n))


class TestInitialPlacement:
    def test_singletons(self):
        lineages = init_sample(singletons(3), 5)
        assert lineages.positions == [GenePosition(0, 0), GenePosition(0, 1), GenePosition(0, 2)]

    def test_pair(self):
        g = GroupedPartition(Partition.singletons(2), frozenset({(0, 1)}))
        lineages = init_sample(g, 3)
        assert lineages.positions == [GenePosition(0, 0), GenePosition(1, 0)]
        assert state_of(lineages) == g

    def test_mixed(self):
        g = GroupedPartition(Partition.parse("{1,2|3|4}"), frozenset({(1, 2)}))
        lineages = init_sample(g, 4)
        assert_array_equal(lineages.codes, [4, 4, 0, 1])
        assert state_of(lineages) == g

    def test_too_many_blocks(self):
        with pytest.raises(ValueError):
            init_sample(singletons(5), 4)


class TestStep:
    def test_colocated_genes_move_together(self):
        s = PedigreeSlice(3, np.array([1, 2, 0]), np.array([2, 0, 1]), "")
        lineages = init_sample(GroupedPartition(Partition.parse("{1,2|3}"), frozenset()), 3)
        rng = np.random.default_rng(1)
        for _ in range(20):
            moved = step(lineages, s, rng)
            assert moved.codes[0] == moved.codes[1]
            assert moved.generation == 1

    def test_parent_of_record(self):
        s = PedigreeSlice(3, np.array([1, 2, 0]), np.array([2, 0, 1]), "")
        moved = step(init_sample(singletons(1), 3), s, np.random.default_rng(2))
        assert moved.positions[0].individual == 1

    def test_exact_law_sums_to_one(self):
        v = OffspringMatrix.from_dense(MATRICES[0])
        law = exact_step_law(v, init_sample(singletons(3), v.N))
        assert sum(law.values()) == 1


class TestTransitionOracle:
    @pytest.mark.parametrize("dense", MATRICES)
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_enumeration_matches_formula(self, dense, n):
        """Test the closed-form transition law against full enumeration of slices and coins."""
        v = OffspringMatrix.from_dense(dense)
        xi = Partition.singletons(n)
        law = exact_step_law(v, init_sample(singletons(n), v.N))
        for eta in coarsenings(xi):
            assert law.get(eta, Fraction(0)) == aggregated_transition_prob(v, xi, eta)

    def test_one_couple(self):
        # two parents for everyone: a pair of genes coalesces with probability 1/4
        v = OffspringMatrix.from_dense(MATRICES[1])
        p = aggregated_transition_prob(v, Partition.singletons(2), Partition.trivial(2))
        assert p == Fraction(1, 4)

    def test_not_a_coarsening(self):
        v = OffspringMatrix.from_dense(MATRICES[0])
        xi = Partition.parse("{1,2|3}")
        assert aggregated_transition_prob(v, xi, Partition.parse("{1,3|2}")) == 0


class TestRunLocus:
    @pytest.fixture
    def pedigree(self):
        return Pedigree(WrightFisher(30), seed=3)

    def test_reaches_mrca(self, pedigree):
        result = run_locus(pedigree, singletons(4), None, np.random.default_rng(0), c_N=1 / 60)
        tree = result.tree
        assert not result.censored
        assert len(tree.states[-1]) == 1
        assert tree.states[0] == Partition.singletons(4)
        assert all(len(a) > len(b) for a, b in zip(tree.states, tree.states[1:]))
        assert tree.mrca_time == pytest.approx(tree.generations[-1] / 60)

    def test_censoring(self, pedigree):
        result = run_locus(pedigree, singletons(5), 1, np.random.default_rng(0))
        assert result.censored
        assert result.tree.end_generation == 1
        assert result.tree.mrca_time is None

    def test_horizon_run_flags_truncation(self, pedigree):
        """Running to a short horizon without stopping at the MRCA still reports censoring."""
        result = run_locus(pedigree, singletons(5), 1, np.random.default_rng(0), c_N=1 / 60, to_mrca=False)
        assert result.censored and result.tree.censored
        spectrum = branch_spectrum(result.tree)
        assert spectrum.censored
        assert spectrum.t_total == pytest.approx(5 / 60)

    def test_horizon_run_past_mrca(self, pedigree):
        result = run_locus(pedigree, singletons(2), 3000, np.random.default_rng(1), to_mrca=False)
        assert not result.censored
        assert result.tree.end_generation == 3000
        assert result.tree.mrca_time is not None

    def test_trajectory_samples(self, pedigree):
        result = run_locus(pedigree, singletons(3), 50, np.random.default_rng(0), sample_generations=[0, 2, 7])
        assert [g for g, _ in result.trajectory] == [0, 2, 7]
        assert result.trajectory[0][1] == singletons(3)

    def test_single_gene(self, pedigree):
        result = run_locus(pedigree, singletons(1), 10, np.random.default_rng(0))
        assert not result.censored
        assert result.tree.mrca_time == 0.0

    def test_text(self, pedigree):
        result = run_locus(pedigree, singletons(2), None, np.random.default_rng(4), c_N=0.5)
        lines = result.tree.to_text().splitlines()
        assert lines[0] == "0.0 {1|2}"
        assert lines[-1].endswith("{1,2}")


class TestRunLoci:
    def test_scheduling_independent(self):
        """Test that chunking and worker count leave every locus unchanged."""
        pedigree = Pedigree(WrightFisher(20), seed=8)
        serial = run_loci(pedigree, 3, 10, seed=8, c_N=1 / 40, chunk=3)
        parallel = run_loci(pedigree, 3, 10, seed=8, c_N=1 / 40, n_jobs=2, chunk=4)
        assert [r.tree.to_text() for r in serial] == [r.tree.to_text() for r in parallel]

    def test_pair_time_close_to_kingman(self):
        # mean rescaled pair coalescence time is 1 in the Kingman limit
        N = 200
        times = []
        for p in range(10):
            pedigree = Pedigree(WrightFisher(N), seed=100 + p)
            results = run_loci(pedigree, 2, 40, seed=p, c_N=1 / (2 * N))
            times.extend(r.tree.mrca_time for r in results)
        times = np.array(times)
        se = times.std(ddof=1) / math.sqrt(len(times))
        assert abs(times.mean() - 1.0) < 4 * se + 0.05

    @pytest.mark.slow
    def test_kingman_fallback(self):
        from scipy import stats

        N = 500
        times = []
        for p in range(200):
            pedigree = Pedigree(WrightFisher(N), seed=1000 + p)
            for r in run_loci(pedigree, 2, 50, seed=p, c_N=1 / (2 * N)):
                times.append(r.tree.mrca_time)
        assert stats.kstest(times, "expon").statistic < 0.02 + 1.63 / math.sqrt(len(times))

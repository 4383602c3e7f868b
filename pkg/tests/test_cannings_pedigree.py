import os
import pickle
import sys

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import stats

try:
    import quenched_coalescent
except ImportError:
    # Ensure local package is importable
    sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from quenched_coalescent.cannings_pedigree import (
    GWCouples,
    LargeFamilyCouple,
    LargeFamilyIndividual,
    OffspringMatrix,
    Pedigree,
    RandomFitness,
    TwoSex,
    TwoSexStar,
    WrightFisher,
    build_model,
    generation_paintbox,
    pair_coalescence_prob,
    realize_slice,
    sample_offspring_matrix,
    two_sex_wrap,
)
from quenched_coalescent.exceptions import ConfigurationError, ModelError
from quenched_coalescent.paintbox import Paintbox


CATALOG = [
    WrightFisher(30),
    RandomFitness(30),
    RandomFitness(30, law="pareto", alpha=1.5, p_zero=0.3),
    GWCouples(30),
    GWCouples(30, law="pareto", alpha=1.5),
    LargeFamilyCouple(30, psi=0.5, gamma=0.5),
    LargeFamilyIndividual(30, psi=0.5, gamma=0.5),
    TwoSex(30, r=0.4, inner=TwoSexStar(lam=10.0, beta=0.5)),
]


@pytest.fixture
def rng():
    return np.random.default_rng(7)


class TestOffspringMatrix:
    def test_from_child_pairs(self):
        v = OffspringMatrix.from_child_pairs(4, [0, 1, 0, 3], [1, 0, 2, 2])
        assert_array_equal(v.pairs, [[0, 1], [0, 2], [2, 3]])
        assert_array_equal(v.counts, [2, 1, 1])
        assert_array_equal(v.totals(), [3, 2, 2, 1])
        v.validate()

    def test_dense_round_trip(self):
        dense = np.array([[0, 2, 0], [2, 0, 1], [0, 1, 0]])
        assert_array_equal(OffspringMatrix.from_dense(dense).dense(), dense)

    def test_selfing(self):
        with pytest.raises(ModelError):
            OffspringMatrix.from_child_pairs(3, [0, 1, 2], [0, 2, 1])

    def test_wrong_population_size(self):
        v = OffspringMatrix.from_child_pairs(4, [0, 1], [1, 2])
        with pytest.raises(ModelError):
            v.validate()


class TestCatalog:
    @pytest.mark.parametrize("model", CATALOG, ids=lambda m: m.name)
    def test_invariants(self, model, rng):
        """Test that every catalog model yields N children and 2N parent slots."""
        for _ in range(50):
            v = sample_offspring_matrix(model, rng)
            assert v.children == model.N
            assert v.totals().sum() == 2 * model.N
            assert np.all(v.pairs[:, 0] < v.pairs[:, 1])

    def test_wright_fisher_c_N(self, rng):
        model = WrightFisher(50)
        est = pair_coalescence_prob(model, 4000, rng)
        assert est.exact == 1 / 100
        assert abs(est.estimate - est.exact) < 4 * est.stderr

    @pytest.mark.slow
    @pytest.mark.parametrize("N", [50, 100, 500])
    def test_wright_fisher_c_N_acceptance(self, N):
        est = pair_coalescence_prob(WrightFisher(N), 100_000, np.random.default_rng(N))
        assert abs(est.estimate - 1 / (2 * N)) < 3 * est.stderr

    @pytest.mark.parametrize("cls", [LargeFamilyCouple, LargeFamilyIndividual])
    def test_large_family_c_N(self, cls, rng):
        """Test the Monte Carlo c_N against the closed form for both large-family models."""
        model = cls(20, psi=0.5, gamma=0.5)
        est = pair_coalescence_prob(model, 20_000, rng)
        assert abs(est.estimate - model.exact_pair_coalescence()) < 5 * est.stderr

    def test_large_family_size(self, rng):
        # gamma tiny: the big family happens almost surely
        model = LargeFamilyCouple(40, psi=0.5, gamma=1e-9)
        v = model.sample(rng)
        assert v.counts.max() == 20

    def test_couple_index_inverse(self):
        model = GWCouples(7)
        k = np.arange(21)
        i, j = model._couples(k)
        expected = [(a, b) for a in range(7) for b in range(a + 1, 7)]
        assert list(zip(i.tolist(), j.tolist())) == expected

    def test_fitness_redraws(self, rng):
        model = RandomFitness(3, p_zero=0.9)
        total = sum(model.sample(rng).redraws for _ in range(50))
        assert total > 0

    def test_domain_errors(self):
        with pytest.raises(ConfigurationError):
            LargeFamilyCouple(100, psi=1.5)
        with pytest.raises(ConfigurationError):
            RandomFitness(10, law="pareto", alpha=2.5)
        with pytest.raises(ConfigurationError):
            GWCouples(10, c=0.5, mean=1.5)
        with pytest.raises(ConfigurationError):
            WrightFisher(1)

    def test_two_sex_contract(self, rng):
        """Test that an inner model returning the wrong number of children is rejected."""
        class Broken:
            def sample_array(self, n1, n2, rng):
                return np.zeros(n1 + n2 - 1, dtype=int), np.zeros(n1 + n2 - 1, dtype=int)

        with pytest.raises(ModelError):
            two_sex_wrap(0.5, Broken(), 10, rng)

    def test_two_sex_no_selfing(self, rng):
        for _ in range(20):
            two_sex_wrap(0.3, TwoSexStar(lam=5.0, beta=0.7), 20, rng).validate()

    @pytest.mark.slow
    def test_two_sex_paintbox_matches_large_family_individual(self):
        """The leading generation paintbox weight has the same law in both models."""
        psi, N, draws = 0.5, 200, 20_000
        rng = np.random.default_rng(21)

        def leading(model):
            return [generation_paintbox(model.sample(rng)).weights[0] for _ in range(draws)]

        two_sex = leading(TwoSex(N, r=0.5, inner=TwoSexStar(lam=1.0, beta=psi)))
        individual = leading(LargeFamilyIndividual(N, psi=psi, gamma=1.0))
        assert stats.ks_2samp(two_sex, individual).pvalue > 1e-3


class TestBuildModel:
    def test_names(self):
        assert isinstance(build_model({"name": "wf", "N": 10}), WrightFisher)
        m = build_model({"name": "two-sex", "N": 10, "r": 0.5, "lam": 2.0, "beta": 0.5})
        assert m.inner == TwoSexStar(2.0, 0.5)

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            build_model({"name": "moran", "N": 10})

    def test_bad_parameter(self):
        with pytest.raises(ConfigurationError):
            build_model({"name": "wf", "N": 10, "psi": 0.5})


class TestSlices:
    def test_matching_uses_every_box(self, rng):
        v = sample_offspring_matrix(LargeFamilyIndividual(25, psi=0.6, gamma=1e-9), rng)
        s = realize_slice(v, rng)
        assert np.all(s.p0 != s.p1)
        again = OffspringMatrix.from_child_pairs(25, s.p0, s.p1)
        assert_array_equal(again.pairs, v.pairs)
        assert_array_equal(again.counts, v.counts)
        assert s.source_matrix_digest == v.digest()

    @pytest.mark.parametrize("parent", [0, 1, 2])
    def test_role_counts_are_binomial(self, parent, rng):
        """Given V, the children taking parent i as their 0-parent number Binomial(V_i, 1/2)."""
        v = OffspringMatrix.from_child_pairs(8, [0, 0, 0, 0, 0, 0, 3, 5], [1, 1, 1, 1, 2, 2, 4, 6])
        total = int(v.totals()[parent])
        draws = 5000
        observed = np.bincount(
            [int(np.sum(realize_slice(v, rng).p0 == parent)) for _ in range(draws)], minlength=total + 1
        )
        expected = draws * stats.binom.pmf(np.arange(total + 1), total, 0.5)
        assert stats.chisquare(observed, expected).pvalue > 1e-3

    def test_generation_paintbox(self):
        v = OffspringMatrix.from_child_pairs(4, [0, 0, 0, 0], [1, 1, 1, 1])
        assert generation_paintbox(v) == Paintbox([0.25] * 4)


class TestPedigree:
    @pytest.fixture
    def pedigree(self):
        return Pedigree(WrightFisher(20), seed=11, cache_size=4)

    def test_regeneration(self, pedigree):
        first = pedigree.slice(3)
        for g in range(10):
            pedigree.slice(g)  # evict generation 3
        again = pedigree.slice(3)
        assert_array_equal(first.p0, again.p0)
        assert_array_equal(first.p1, again.p1)

    def test_same_seed(self, pedigree):
        other = Pedigree(WrightFisher(20), seed=11)
        assert_array_equal(pedigree.slice(5).p0, other.slice(5).p0)
        assert pedigree.digest() == other.digest()

    def test_pickle(self, pedigree):
        copy = pickle.loads(pickle.dumps(pedigree))
        assert_array_equal(copy.slice(2).p1, pedigree.slice(2).p1)

    def test_materialize(self, pedigree):
        slices = pedigree.materialize(3)
        assert len(slices) == 3
        assert pedigree.slice(1) is slices[1]

    def test_export_table(self, pedigree, tmp_path):
        path = tmp_path / "pedigree.csv"
        pedigree.export_table(path, 2)
        lines = path.read_text().splitlines()
        assert lines[0] == "generation,child,p0,p1"
        assert len(lines) == 1 + 2 * 20
        values = np.array([[int(x) for x in line.split(",")] for line in lines[1:]])
        assert values[:, 1].min() == 1
        assert values[:, 2:].min() >= 1 and values[:, 2:].max() <= 20

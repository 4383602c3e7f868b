import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_array_equal

try:
    import quenched_coalescent
except ImportError:
    # Ensure local package is importable
    sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from quenched_coalescent import streams


class TestStreams:
    def test_reproducible(self):
        a = streams.stream(3, streams.LOCUS, 2, 5).random(10)
        b = streams.stream(3, streams.LOCUS, 2, 5).random(10)
        assert_array_equal(a, b)

    def test_creation_order(self):
        first = [streams.stream(1, streams.PSI, i).random() for i in range(5)]
        second = [streams.stream(1, streams.PSI, i).random() for i in reversed(range(5))]
        assert first == second[::-1]

    @pytest.mark.parametrize(
        "other",
        [(4, streams.LOCUS, 2, 5), (3, streams.PSI, 2, 5), (3, streams.LOCUS, 5, 2), (3, streams.LOCUS, 2)],
    )
    def test_distinct(self, other):
        a = streams.stream(3, streams.LOCUS, 2, 5).random(4)
        assert not np.array_equal(a, streams.stream(*other).random(4))

    def test_tag_key(self):
        assert streams.tag_key("locus") == streams.tag_key("locus")
        assert streams.tag_key("locus") != streams.tag_key("psi")

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            streams.stream(-1, streams.LOCUS)

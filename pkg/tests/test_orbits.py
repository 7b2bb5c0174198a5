# ABOUTME: Tests for periodic orbit enumeration and prime decomposition
# ABOUTME: Validates orbit classes, amplitudes, walk counts and the orbit-sum form of Tr S^l

import math
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from src.exceptions import InputError, OrbitCapError
from src.graph_core import build_graph, s_matrix, two_bond_graph
from src.models import Bond, GraphSpec
from src.orbits import (
    canonical_rotation, enumerate_orbits, estimate_orbit_count, get_orbit_catalog, orbit_sum,
    prime_decompose, primitive_period, trace_power, transition_digraph, walk_amplitude,
)

R = 0.4
T = math.sqrt(1 - R * R)


@pytest.fixture
def two_bond():
    return two_bond_graph(0.3, 0.7, R)


@pytest.fixture
def k4():
    """Complete graph on four Kirchhoff vertices with incommensurate bond lengths"""
    vertices = ["a", "b", "c", "d"]
    pairs = [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")]
    lengths = [1.0, math.sqrt(2), math.sqrt(3), math.sqrt(5), math.sqrt(7), math.pi / 2]
    bonds = [Bond(u, v, length) for (u, v), length in zip(pairs, lengths)]
    return build_graph(GraphSpec(vertices=vertices, bonds=bonds))


class TestWords:
    """Test word helpers"""

    def test_primitive_period(self):
        """Test shortest repeating block"""
        assert primitive_period((0, 1, 0, 1)) == 2
        assert primitive_period((0, 0, 0)) == 1
        assert primitive_period((0, 1, 2)) == 3
        assert primitive_period((0, 1, 0)) == 3

    def test_canonical_rotation(self):
        """Test lexicographically smallest rotation"""
        assert canonical_rotation((2, 0, 1)) == (0, 1, 2)
        assert canonical_rotation((1, 0, 1, 0)) == (0, 1, 0, 1)

    def test_walk_amplitude(self, two_bond):
        """Test cyclic amplitude products"""
        assert walk_amplitude(two_bond.transition, (0, 1)) == pytest.approx(-R)
        assert walk_amplitude(two_bond.transition, (0, 2, 3, 1)) == pytest.approx(T * T)

    def test_transition_digraph(self, two_bond):
        """Test edges follow nonzero amplitudes"""
        digraph = transition_digraph(two_bond)
        assert digraph.number_of_edges() == 6
        assert digraph[0][2]["amplitude"] == pytest.approx(T)


class TestEnumeration:
    """Test orbit enumeration"""

    def test_two_bond_orbits(self, two_bond):
        """Test orbit classes of the two-bond chain up to l = 4"""
        catalog = enumerate_orbits(two_bond, 4)
        assert catalog.count(1) == 0
        assert catalog.count(3) == 0
        short = {o.word: o for o in catalog.orbits[2]}
        assert set(short) == {(0, 1), (2, 3)}
        assert short[(0, 1)].amplitude == pytest.approx(-R)
        assert short[(2, 3)].amplitude == pytest.approx(R)
        assert short[(0, 1)].action == pytest.approx(0.6)

        long = {o.word: o for o in catalog.orbits[4]}
        assert set(long) == {(0, 1, 0, 1), (0, 2, 3, 1), (2, 3, 2, 3)}
        assert long[(0, 1, 0, 1)].repetitions == 2
        assert long[(0, 1, 0, 1)].multiplicity == 2
        assert long[(0, 2, 3, 1)].amplitude == pytest.approx(T * T)
        assert catalog.walk_count(4) == 8
        assert [p.word for p in catalog.primes] == [(0, 1), (2, 3), (0, 2, 3, 1)]

    def test_decoupled_chain(self):
        """Test r = 0 leaves only the full traversal"""
        catalog = enumerate_orbits(two_bond_graph(0.3, 0.7, 0.0), 4)
        assert catalog.count(2) == 0
        assert [o.word for o in catalog.orbits[4]] == [(0, 2, 3, 1)]
        assert catalog.orbits[4][0].amplitude == pytest.approx(1.0)
        assert catalog.orbits[4][0].action == pytest.approx(2.0)

    def test_walk_counts_on_k4(self, k4):
        """Test closed-walk counts equal trace(A^l) = 3^l + 3 (-1)^l"""
        catalog = enumerate_orbits(k4, 5)
        for l in range(1, 6):
            assert catalog.walk_count(l) == 3 ** l + 3 * (-1) ** l
        assert estimate_orbit_count(k4, 5) == sum(3 ** l + 3 * (-1) ** l for l in range(1, 6))

    def test_thread_count_does_not_change_result(self, k4):
        """Test single and multi-threaded enumeration agree"""
        one = enumerate_orbits(k4, 4, threads=1)
        many = enumerate_orbits(k4, 4, threads=4)
        for l in range(1, 5):
            assert [o.word for o in one.orbits.get(l, [])] == [o.word for o in many.orbits.get(l, [])]

    def test_orbit_cap(self, k4):
        """Test enumeration is refused above the cap"""
        with pytest.raises(OrbitCapError) as exc_info:
            enumerate_orbits(k4, 5, max_orbits=10)
        assert exc_info.value.cap == 10

    def test_invalid_cutoff(self, two_bond):
        """Test l_max must be positive"""
        with pytest.raises(InputError):
            enumerate_orbits(two_bond, 0)


class TestPrimes:
    """Test prime decomposition"""

    def test_prime_decompose(self, two_bond):
        """Test repetitions split into prime and nu"""
        catalog = enumerate_orbits(two_bond, 6)
        repeated = next(o for o in catalog.orbits[6] if o.word == (0, 1, 0, 1, 0, 1))
        prime, nu = prime_decompose(repeated, two_bond)
        assert nu == 3
        assert prime.word == (0, 1)
        assert prime.amplitude == pytest.approx(-R)
        assert prime.action == pytest.approx(0.6)
        assert prime.repeat(3).amplitude == pytest.approx(repeated.amplitude)


class TestTraces:
    """Test orbit sums against matrix traces"""

    @pytest.mark.parametrize("k", [0.7, 3.1, 17.25])
    def test_trace_identity_two_bond(self, two_bond, k):
        """Test Tr S^l equals the orbit sum for l up to 8"""
        catalog = enumerate_orbits(two_bond, 8)
        for l in range(1, 9):
            expected = np.trace(np.linalg.matrix_power(s_matrix(two_bond, k), l))
            assert abs(trace_power(two_bond, l, k, catalog) - expected) < 1e-12
            assert abs(orbit_sum(catalog, l, k) - expected) < 1e-9

    def test_trace_identity_k4(self, k4):
        """Test the identity on a graph with back-scattering everywhere"""
        catalog = enumerate_orbits(k4, 5)
        for l in range(1, 6):
            trace_power(k4, l, 2.3, catalog)

    def test_orbit_sum_vectorised(self, two_bond):
        """Test array arguments give one value per k"""
        catalog = enumerate_orbits(two_bond, 4)
        ks = np.array([0.5, 1.5])
        values = orbit_sum(catalog, 4, ks)
        assert values.shape == (2,)
        assert values[1] == pytest.approx(orbit_sum(catalog, 4, 1.5))
        with pytest.raises(InputError):
            orbit_sum(catalog, 5, 1.0)


class TestCatalogCache:
    """Test cache lookups around enumeration"""

    def test_cache_hit_skips_enumeration(self, two_bond):
        """Test a cached catalog is returned without enumerating"""
        cached = enumerate_orbits(two_bond, 4)
        cache = MagicMock()
        cache.load_catalog.return_value = cached
        with patch('src.orbits.enumerate_orbits') as mock_enumerate:
            result = get_orbit_catalog(two_bond, 4, cache=cache)
        assert result is cached
        mock_enumerate.assert_not_called()
        cache.save_catalog.assert_not_called()

    def test_cache_miss_stores(self, two_bond):
        """Test a fresh catalog is saved"""
        cache = MagicMock()
        cache.load_catalog.return_value = None
        result = get_orbit_catalog(two_bond, 4, cache=cache)
        cache.save_catalog.assert_called_once_with(result)
        assert result.l_max == 4

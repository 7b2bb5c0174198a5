# ABOUTME: Tests for the separator-hierarchy bootstrap and the alternative root solvers
# ABOUTME: Validates reference roots, method agreement, cell contracts and degeneracy handling

import logging
import math

import numpy as np
import pytest

from src.bootstrap import (
    cell_property_check, compute_spectrum, descend_hierarchy, find_mu, fixed_point_root, fixed_point_roots,
    oracle_scan, random_regular_poly, regular_separators, root_in_cell, solve_cells,
)
from src.detpoly import evaluate, reduced_form, two_bond_trigpoly
from src.exceptions import CellContractError, InputError, IrregularPolyError
from src.graph_core import four_vertex_chain_graph
from src.models import TrigPoly
from src.stats import FourVertexChainFamily

S0 = 0.3 + 0.7 / math.sqrt(2)
S1 = 0.3 - 0.7 / math.sqrt(2)
R = (math.sqrt(2) - 1) / (math.sqrt(2) + 1)
ANCHORS = {1: 3.26507, 10: 31.24664, 100: 313.98697}


@pytest.fixture
def two_bond():
    return two_bond_trigpoly(S0, S1, R)


@pytest.fixture
def irregular_chain():
    return reduced_form(four_vertex_chain_graph([0.2, 0.6565, 0.1435], 0.7, 0.7))


class TestRegularRoots:
    """Test roots of the two-bond equation"""

    def test_reference_values(self, two_bond):
        """Test x_n = S0 k_n against tabulated values"""
        spectrum = compute_spectrum(two_bond, (1, 100))
        for n, x in ANCHORS.items():
            assert S0 * spectrum.roots[n - 1] == pytest.approx(x, abs=1e-5)
        assert spectrum.level_m == 0
        assert np.max(spectrum.residuals) < 1e-12

    def test_methods_agree(self, two_bond):
        """Test bootstrap, oracle and fixed-point give the same roots"""
        bootstrap = compute_spectrum(two_bond, (1, 60), method="bootstrap")
        oracle = compute_spectrum(two_bond, (1, 60), method="oracle")
        fixed = compute_spectrum(two_bond, (1, 60), method="fixed-point")
        np.testing.assert_array_equal(bootstrap.indices, np.arange(1, 61))
        np.testing.assert_allclose(oracle.roots, bootstrap.roots, rtol=1e-12)
        np.testing.assert_allclose(fixed.roots, bootstrap.roots, rtol=1e-12)

    def test_fixed_point_matches_bracketing(self, two_bond):
        """Test the contraction agrees with the bracketed solver cell by cell"""
        separators = regular_separators(two_bond, (1, 40))
        roots = fixed_point_roots(two_bond, np.arange(1, 41), mu=separators.mu)
        for n in (1, 7, 40):
            expected = root_in_cell(two_bond, *separators.cell(n))
            assert roots[n - 1] == pytest.approx(expected, rel=1e-12)
        assert fixed_point_root(two_bond, 7) == pytest.approx(roots[6], rel=1e-14)

    def test_one_root_per_cell(self, two_bond):
        """Test each periodic cell holds exactly one root"""
        separators = regular_separators(two_bond, (1, 200))
        lo, hi = separators.positions[0], separators.positions[-1]
        roots = oracle_scan(two_bond, lo, hi)
        cells = np.searchsorted(separators.positions, roots) - 1
        np.testing.assert_array_equal(np.bincount(cells, minlength=200), np.ones(200, dtype=int))

    def test_mu_places_first_root_in_cell_one(self, two_bond):
        """Test the separator offset labels the first positive root as n = 1"""
        first = compute_spectrum(two_bond, (1, 1), method="oracle").roots[0]
        lo, hi = regular_separators(two_bond, (1, 1), mu=find_mu(two_bond)).cell(1)
        assert lo < first < hi

    def test_uniform_string(self):
        """Test sin(k) = 0 has roots k_n = n pi"""
        p = TrigPoly(S0=1.0, gamma0=1.5)
        spectrum = compute_spectrum(p, (1, 20))
        np.testing.assert_allclose(spectrum.roots, math.pi * np.arange(1, 21), rtol=1e-13)


class TestIrregularRoots:
    """Test the hierarchy on an irregular chain"""

    def test_hierarchy_matches_oracle(self, irregular_chain):
        """Test bootstrap roots agree with a dense scan"""
        hierarchy = descend_hierarchy(irregular_chain, (1, 300))
        assert hierarchy.m >= 1
        assert len(hierarchy.levels) == hierarchy.m + 1
        oracle = compute_spectrum(irregular_chain, (1, 300), method="oracle")
        np.testing.assert_array_equal(hierarchy.indices, np.arange(1, 301))
        np.testing.assert_allclose(hierarchy.roots, oracle.roots, rtol=1e-10)
        assert not hierarchy.degenerate.any()

    @pytest.mark.parametrize("actions, degree", [
        ([0.2, 0.6565, 0.1435], 2),
        ([0.1, 0.8565, 0.0435], 6),
    ])
    def test_hierarchy_matches_oracle_at_depth(self, actions, degree):
        """Test the first 1000 roots near the reflecting corner, where the degree is deepest"""
        family = FourVertexChainFamily(actions)
        r = next(r for r in (0.99, 0.999, 0.9999) if family.degree(r, r) == degree)
        p = family.trigpoly(r, r)

        hierarchy = descend_hierarchy(p, (1, 1000))
        oracle = compute_spectrum(p, (1, 1000), method="oracle", samples=4000)
        assert hierarchy.m == degree
        assert len(hierarchy.levels) == degree + 1
        assert len(hierarchy.roots) == len(oracle.roots) == 1000
        assert np.max(np.abs(hierarchy.roots - oracle.roots)) < 1e-10

    def test_window_offset(self, irregular_chain):
        """Test a window starting above 1 returns the same roots"""
        full = descend_hierarchy(irregular_chain, (1, 120))
        window = descend_hierarchy(irregular_chain, (100, 120))
        np.testing.assert_allclose(window.roots, full.roots[99:], rtol=1e-13)
        assert window.root(110) == pytest.approx(full.root(110))

    def test_fixed_point_requires_regular(self, irregular_chain):
        """Test the contraction refuses irregular forms"""
        with pytest.raises(IrregularPolyError):
            fixed_point_roots(irregular_chain, [1])
        with pytest.raises(IrregularPolyError):
            regular_separators(irregular_chain, (1, 5))


class TestRandomRegularPolys:
    """Test one root per cell and the contraction on random regular forms"""

    def test_random_poly_is_regular(self):
        """Test generated forms stay in the regular regime"""
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = random_regular_poly(rng)
            assert p.S0 == 1.0
            assert 0.0 < p.alpha < 1.0
            assert np.all(p.frequencies < p.S0)

    def test_cell_property(self):
        """Test every cell holds one oracle root and the contraction matches bracketing"""
        rng = np.random.default_rng(11)
        for _ in range(40):
            miscounted, deviation = cell_property_check(random_regular_poly(rng), 300)
            assert miscounted == 0
            assert deviation <= 1e-12

    @pytest.mark.slow
    def test_cell_property_full_suite(self):
        """Test 1000 random forms over their first 1000 cells"""
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            miscounted, deviation = cell_property_check(random_regular_poly(rng), 1000)
            assert miscounted == 0
            worst = max(worst, deviation)
        assert worst <= 1e-12


class TestCellContract:
    """Test the one-root-per-cell contract"""

    def test_empty_cell_raises(self, two_bond):
        """Test a cell without a sign change raises CellContractError"""
        separators = regular_separators(two_bond, (1, 5))
        lo = separators.position(4)
        with pytest.raises(CellContractError) as exc_info:
            solve_cells(two_bond, [lo], [lo + 0.1 * two_bond.mean_spacing])
        assert exc_info.value.invariant == "each cell contains exactly one root"

    def test_degenerate_endpoint(self, caplog):
        """Test a root on a separator is returned and flagged"""
        p = TrigPoly(S0=1.0, gamma0=0.5)
        with caplog.at_level(logging.WARNING):
            roots, degenerate = solve_cells(p, [math.pi, 3.0], [4.0, 3.5])
        assert roots[0] == math.pi
        assert degenerate.tolist() == [True, False]
        assert roots[1] == pytest.approx(math.pi, rel=1e-14)
        assert "degenerate" in caplog.text

    def test_solver_precision(self, two_bond):
        """Test vectorised brackets reach machine resolution"""
        separators = regular_separators(two_bond, (1, 30))
        roots, _ = solve_cells(two_bond, separators.positions[:-1], separators.positions[1:])
        assert np.max(np.abs(evaluate(two_bond, roots))) < 1e-13


class TestArguments:
    """Test argument validation"""

    def test_oracle_sample_floor(self, two_bond):
        """Test the oracle needs at least 100 samples per spacing"""
        with pytest.raises(InputError):
            oracle_scan(two_bond, 0.0, 10.0, samples_per_mean_spacing=50)

    def test_index_range(self, two_bond):
        """Test invalid index ranges"""
        with pytest.raises(InputError):
            descend_hierarchy(two_bond, (0, 5))

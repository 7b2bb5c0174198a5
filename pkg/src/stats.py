# ABOUTME: Nearest-neighbour spacing statistics, the maximal-spacing bound and Wigner reference curves
# ABOUTME: Also builds irregularity-regime diagrams and diagonal sweeps for the four-vertex chain family

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.bootstrap import DEGENERACY_TOLERANCE, descend_hierarchy
from src.detpoly import irregularity_degree, reduced_form
from src.exceptions import InputError, SpectraError
from src.graph_core import four_vertex_chain_graph
from src.models import Ensemble, RegimeDiagram, SpacingBoundReport, SpacingSample, SweepPoint, TrigPoly
from src.performance_tracker import track_performance
from src.utils import default_thread_count

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 100
MIN_GRID = 32
SPACING_ROOTS = 10_000
SATURATION_THRESHOLD = 0.01
CORNER_DEPTH = 4
# Spacings at or below this fraction of a mean spacing are degeneracies
ZERO_SPACING = 1e-9


def nn_spacings(roots: Sequence[float], mode: str = "raw", bins: int = HISTOGRAM_BINS,
                hist_range: Optional[Tuple[float, float]] = None,
                zero_spacing: Optional[float] = None) -> SpacingSample:
    """Spacings s_n = k_n - k_(n-1) with a histogram of the nonzero ones.

    ``mode`` is "raw" or "unit"; unit mode divides by the empirical mean
    spacing. Zero spacings from degenerate roots are counted, not binned.
    """
    roots = np.asarray(roots, dtype=float)
    if len(roots) < 2:
        raise InputError(f"need at least 2 roots, got {len(roots)}", invariant=">= 2 roots")
    if np.any(np.diff(roots) < 0):
        raise InputError("roots are not sorted", invariant="unsorted input")
    if mode not in ("raw", "unit"):
        raise InputError(f"unknown spacing mode {mode!r}")

    spacings = np.diff(roots)
    mean = float(np.mean(spacings))
    threshold = ZERO_SPACING * mean if zero_spacing is None else zero_spacing
    degenerate = spacings <= threshold
    unit = mean if mode == "unit" else 1.0
    spacings = spacings / unit

    positive = spacings[~degenerate]
    if hist_range is None:
        hist_range = (0.0, float(positive.max()) if len(positive) else 1.0)
    counts, edges = np.histogram(positive, bins=bins, range=hist_range)
    widths = np.diff(edges)
    total = counts.sum()
    density = counts / (total * widths) if total else np.zeros(len(counts))

    return SpacingSample(
        roots=roots,
        spacings=spacings,
        mode=mode,
        s_min=float(positive.min()) if len(positive) else 0.0,
        s_max=float(spacings.max()),
        unit=unit,
        degenerate_count=int(degenerate.sum()),
        hist_counts=counts,
        hist_density=density,
        hist_edges=edges,
    )


def max_spacing(m: int, S0: float) -> float:
    """Largest root separation a degree-m form allows.

    Periodic separators at level m are pi/S0 apart, so the roots they bracket
    are at most 2 pi/S0 apart; every level below adds one more pi/S0.
    """
    if m < 0:
        raise InputError(f"irregularity degree must be >= 0, got {m}")
    return math.pi * (m + 2) / S0


def spacing_bound_check(sample: SpacingSample, m: int, S0: float) -> SpacingBoundReport:
    """s_max <= d_max = pi (m + 2) / S0, with the relative margin left below the bound"""
    d_max = max_spacing(m, S0)
    raw = sample.spacings * sample.unit
    s_max = float(raw.max())
    above = int(np.sum(raw > d_max * (1.0 + 1e-12)))
    margin = (d_max - s_max) / d_max
    report = SpacingBoundReport(
        passed=above == 0, m=m, s_max=s_max, d_max=d_max, margin=margin, mass_above_bound=above,
    )
    if not report.passed:
        logger.warning(f"Spacing bound violated: s_max = {s_max:.9g} > d_max = {d_max:.9g} for m = {m}")
    return report


def wigner_reference(s, ensemble: str = Ensemble.GOE.value):
    """Wigner surmise density P(s) for unit mean spacing"""
    ensemble = Ensemble(ensemble)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise InputError("negative spacing", invariant="s >= 0")
    if ensemble == Ensemble.GOE:
        values = 0.5 * math.pi * s_arr * np.exp(-0.25 * math.pi * s_arr ** 2)
    else:
        values = (32.0 / math.pi ** 2) * s_arr ** 2 * np.exp(-4.0 * s_arr ** 2 / math.pi)
    return float(values) if s_arr.ndim == 0 else values


def histogram_peak(sample: SpacingSample, bins: Optional[int] = None,
                   hist_range: Optional[Tuple[float, float]] = None) -> float:
    """Centre of the most populated histogram bin, in the sample's units.

    With ``bins`` or ``hist_range`` the nonzero spacings are rebinned first,
    which resolves a narrow peak the stored histogram is too coarse for.
    """
    counts, edges = sample.hist_counts, sample.hist_edges
    if bins is not None or hist_range is not None:
        positive = sample.spacings[sample.spacings > ZERO_SPACING * np.mean(sample.spacings)]
        if len(positive) == 0:
            raise InputError("sample has no nonzero spacings")
        if hist_range is None:
            hist_range = (float(edges[0]), float(edges[-1])) if len(edges) else (0.0, float(positive.max()))
        counts, edges = np.histogram(positive, bins=bins or HISTOGRAM_BINS, range=hist_range)
    if len(counts) == 0:
        raise InputError("sample has no histogram")
    i = int(np.argmax(counts))
    return float(0.5 * (edges[i] + edges[i + 1]))


class FourVertexChainFamily:
    """Three-bond chain with hard-wall ends; parameters are the inner reflections (r2, r3)"""

    name = "four-vertex-chain"

    def __init__(self, actions: Sequence[float]):
        if len(actions) != 3:
            raise InputError(f"four-vertex chain needs three bond actions, got {len(actions)}")
        self.actions = [float(a) for a in actions]

    @property
    def S0(self) -> float:
        return sum(self.actions)

    def trigpoly(self, r2: float, r3: float) -> TrigPoly:
        return reduced_form(four_vertex_chain_graph(self.actions, r2, r3))

    def degree(self, r2: float, r3: float) -> int:
        return irregularity_degree(self.trigpoly(r2, r3)).m

    @staticmethod
    def in_regular_region(r2: float, r3: float) -> bool:
        """|r3| + |r2 r3| + |r2| < 1"""
        return abs(r3) + abs(r2 * r3) + abs(r2) < 1.0


@track_performance("regime diagram")
def regime_diagram(family: FourVertexChainFamily, grid: int = 64, lo: float = -1.0, hi: float = 1.0,
                   threads: Optional[int] = None) -> RegimeDiagram:
    """Irregularity degree m on a grid x grid lattice over [lo, hi]^2"""
    if grid < MIN_GRID:
        raise InputError(f"grid resolution must be >= {MIN_GRID}, got {grid}", invariant="grid resolution >= 32x32")
    values = np.linspace(lo, hi, grid)
    m_values = np.zeros((grid, grid), dtype=int)

    def row(i: int) -> Tuple[int, List[int]]:
        out = []
        for r3 in values:
            try:
                out.append(family.degree(float(values[i]), float(r3)))
            except SpectraError as e:
                raise SpectraError(
                    f"family construction failed at (r2={values[i]:.6g}, r3={r3:.6g}): {e}",
                    invariant="family construction failure at a grid point",
                ) from e
        return i, out

    with ThreadPoolExecutor(max_workers=min(default_thread_count(threads), grid)) as executor:
        futures = [executor.submit(row, i) for i in range(grid)]
        for future in as_completed(futures):
            i, out = future.result()
            m_values[i, :] = out

    diagram = RegimeDiagram(
        family=family.name,
        p1_values=values,
        p2_values=values,
        m_values=m_values,
        parameters={"actions": family.actions, "grid": grid, "range": [lo, hi]},
    )
    logger.info(f"Regime diagram {grid}x{grid} for actions {family.actions}: max m = {diagram.max_m}")
    return diagram


def spacing_sample_for(p: TrigPoly, n_roots: int = SPACING_ROOTS, bins: int = HISTOGRAM_BINS,
                       hist_range: Optional[Tuple[float, float]] = None,
                       degeneracy_tolerance: float = DEGENERACY_TOLERANCE) -> Tuple[SpacingSample, int]:
    """Spacings of the first n_roots bootstrap roots, binned over [0, d_max] unless a range is given"""
    hierarchy = descend_hierarchy(p, (1, n_roots), degeneracy_tolerance=degeneracy_tolerance)
    d_max = max_spacing(hierarchy.m, p.S0)
    sample = nn_spacings(hierarchy.roots, "raw", bins=bins, hist_range=hist_range or (0.0, d_max))
    return sample, hierarchy.m


def diagonal_r_values(step: float, corner_depth: int = CORNER_DEPTH) -> np.ndarray:
    """Uniform r values on [0, 1] plus 1 - 10^-j for j = 1..corner_depth.

    The deepest regimes live in a sliver next to the fully reflecting corner
    that a uniform step never reaches.
    """
    if not 0.0 < step <= 1.0:
        raise InputError(f"sweep step must lie in (0, 1], got {step}")
    uniform = np.round(np.arange(0.0, 1.0 + 0.5 * step, step), 10)
    corner = 1.0 - 10.0 ** -np.arange(1, corner_depth + 1, dtype=float)
    return np.unique(np.round(np.concatenate([uniform[uniform <= 1.0], corner, [1.0]]), 12))


def _sweep_point(family: FourVertexChainFamily, r: float, n_roots: int) -> SweepPoint:
    p = family.trigpoly(r, r)
    m = irregularity_degree(p).m
    d_max = max_spacing(m, p.S0)
    try:
        sample, _ = spacing_sample_for(p, n_roots)
    except SpectraError as e:
        # Decoupled bonds can share a double root that no cell brackets
        logger.warning(f"No spacing sample at r = {r:.10g} (m = {m}): {e}")
        return SweepPoint(r=r, m=m, n_roots=0, s_min=math.nan, s_max=math.nan, d_max=d_max, margin=math.nan)
    report = spacing_bound_check(sample, m, p.S0)
    return SweepPoint(
        r=r, m=m, n_roots=len(sample.roots), s_min=sample.s_min, s_max=report.s_max,
        d_max=d_max, margin=report.margin, degenerate=sample.degenerate_count,
    )


@track_performance("diagonal sweep")
def diagonal_sweep(family: FourVertexChainFamily, r_values: Sequence[float], n_roots: int = SPACING_ROOTS,
                   threads: Optional[int] = None) -> List[SweepPoint]:
    """Spacing extremes along r2 = r3 = r; points come back in r order"""
    results: Dict[int, SweepPoint] = {}
    with ThreadPoolExecutor(max_workers=min(default_thread_count(threads), max(1, len(r_values)))) as executor:
        future_to_index = {
            executor.submit(_sweep_point, family, float(r), n_roots): i for i, r in enumerate(r_values)
        }
        for future in as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
    points = [results[i] for i in range(len(r_values))]
    logger.info(f"Diagonal sweep over {len(points)} points: max m = {max(p.m for p in points)}")
    return points


def saturation_check(p: TrigPoly, n_roots: int = SPACING_ROOTS) -> Dict[str, float]:
    """Compare s_max on the first half of the window with s_max on the whole window"""
    hierarchy = descend_hierarchy(p, (1, n_roots))
    spacings = np.diff(hierarchy.roots)
    half = float(np.max(spacings[: max(1, len(spacings) // 2)]))
    full = float(np.max(spacings))
    change = (full - half) / full
    return {
        "s_max_half": half,
        "s_max_full": full,
        "relative_change": change,
        "saturated": change < SATURATION_THRESHOLD,
    }

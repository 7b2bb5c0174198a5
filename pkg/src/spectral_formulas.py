# ABOUTME: Spectral staircase from S-matrix eigenphases and the explicit root formulas built on it
# ABOUTME: Staircase integral, periodic-orbit and prime-orbit expansions, energy expansion, f(k_n)

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from src.bootstrap import ZERO_CUTOFF, descend_hierarchy, oracle_scan, regular_separators
from src.detpoly import irregularity_degree, reduced_form
from src.exceptions import AssumptionError, ConsistencyError, ConvergenceError, InputError, IrregularPolyError
from src.graph_core import s_matrix
from src.models import ExpansionResult, Graph, OrbitCatalog, SeparatorLevel, StaircaseEval, TrigPoly
from src.orbits import enumerate_orbits

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# Eigenphases this close to 0 (mod 2 pi) mark a spectral point
SPECTRAL_POINT_TOLERANCE = 1e-12
# Eigenphases of T this close to 0 are eigenvalue-one directions at k = 0
_OFFSET_PHASE_TOLERANCE = 1e-9
PANELS_PER_SPACING = 64
MAX_STAIRCASE_EVALUATIONS = 200_000
INTEGER_TOLERANCE = 1e-6
KAPPA_ROOTS = 50
KAPPA_TOLERANCE = 0.05
REAL_AMPLITUDE_TOLERANCE = 1e-12


def eigenphases(graph: Graph, k: float) -> np.ndarray:
    """Eigenphases of S(k) in [0, 2 pi), sorted"""
    phases = np.mod(np.angle(np.linalg.eigvals(s_matrix(graph, k))), TWO_PI)
    return np.sort(phases)


def spectral_offset(graph: Graph) -> float:
    """Constant c in the Weyl average S0 k / pi - c, fixed by N(0+) = 0.

    Every eigenphase of T contributes (pi - sigma) / (2 pi); an eigenvalue at
    one moves off it counterclockwise as k grows and so counts as sigma = 0+.
    """
    sigma = np.mod(np.angle(np.linalg.eigvals(graph.transition)), TWO_PI)
    sigma = np.where((sigma < _OFFSET_PHASE_TOLERANCE) | (sigma > TWO_PI - _OFFSET_PHASE_TOLERANCE), 0.0, sigma)
    return float(np.sum(math.pi - sigma) / TWO_PI)


def weyl_average(graph: Graph, k, offset: Optional[float] = None):
    """N-bar(k) = S0 k / pi - c"""
    c = spectral_offset(graph) if offset is None else offset
    return graph.S0 * np.asarray(k, dtype=float) / math.pi - c


def staircase(graph: Graph, k: float, offset: Optional[float] = None) -> StaircaseEval:
    """Eigenvalue count N(k) from the eigenphase form of the trace series.

    sum_l sin(l sigma) / l converges to (pi - sigma) / 2 on (0, 2 pi) and to 0
    at sigma = 0, so N takes the midpoint value at a spectral point.
    """
    if not k > 0:
        raise InputError(f"k <= 0: {k}", invariant="k > 0")
    sigma = eigenphases(graph, k)
    at_root = (sigma < SPECTRAL_POINT_TOLERANCE) | (sigma > TWO_PI - SPECTRAL_POINT_TOLERANCE)
    fluctuation = float(np.sum(np.where(at_root, 0.0, (math.pi - sigma) / TWO_PI)))
    n_bar = float(weyl_average(graph, k, offset))
    return StaircaseEval(k=float(k), N=n_bar + fluctuation, Nbar=n_bar, eigenphases=sigma)


def _is_integer(value: float) -> bool:
    return abs(value - round(value)) < INTEGER_TOLERANCE


def staircase_integral(graph: Graph, lo: float, hi: float, offset: Optional[float] = None,
                       panels_per_spacing: int = PANELS_PER_SPACING,
                       max_evaluations: int = MAX_STAIRCASE_EVALUATIONS) -> float:
    """Integral of N(k) over [lo, hi].

    N is a nondecreasing step function, so a panel whose ends carry the same
    integer value is exact. Panels containing a jump are bisected until the
    jump is pinned to roughly 1e-13 relative. N vanishes for k <= 0.
    """
    c = spectral_offset(graph) if offset is None else offset
    lo_eff = max(float(lo), 0.0)
    if hi <= lo_eff:
        return 0.0

    def value(k: float) -> float:
        return 0.0 if k <= 0 else staircase(graph, k, c).N

    n_panels = max(1, int(math.ceil((hi - lo_eff) / (math.pi / graph.S0) * panels_per_spacing)))
    edges = np.linspace(lo_eff, hi, n_panels + 1)
    values = [value(float(e)) for e in edges]
    evaluations = len(values)
    stack: List[Tuple[float, float, float, float]] = [
        (float(edges[i]), float(edges[i + 1]), values[i], values[i + 1]) for i in range(n_panels)
    ]
    pieces = []

    while stack:
        a, b, fa, fb = stack.pop()
        if _is_integer(fa) and _is_integer(fb) and round(fa) == round(fb):
            pieces.append(round(fa) * (b - a))
            continue
        if b - a < 1e-13 * max(1.0, abs(b)):
            pieces.append(0.5 * (fa + fb) * (b - a))
            continue
        mid = 0.5 * (a + b)
        fm = value(mid)
        evaluations += 1
        if evaluations > max_evaluations:
            raise ConvergenceError(
                f"staircase quadrature exceeded {max_evaluations} evaluations on [{lo}, {hi}]",
                invariant="quadrature nonconvergence",
            )
        stack.append((a, mid, fa, fm))
        stack.append((mid, b, fm, fb))

    logger.debug(f"Staircase integral on [{lo_eff:.6g}, {hi:.6g}]: {evaluations} evaluations")
    return math.fsum(pieces)


def level0_separators(graph: Graph, n_range: Tuple[int, int], p: Optional[TrigPoly] = None) -> SeparatorLevel:
    """Separators bracketing roots n_range: periodic when regular, else from the hierarchy"""
    p = reduced_form(graph) if p is None else p
    if irregularity_degree(p).m == 0:
        return regular_separators(p, n_range)
    return descend_hierarchy(p, n_range).level(0)


def root_by_staircase_integral(graph: Graph, n: int, separators: Optional[SeparatorLevel] = None,
                               offset: Optional[float] = None) -> float:
    """k_n = n k_hat_n - (n - 1) k_hat_{n-1} - integral of N over the cell"""
    if n < 1:
        raise InputError(f"root index must be >= 1, got {n}", invariant="roots with k <= 0 excluded")
    c = spectral_offset(graph) if offset is None else offset
    if separators is None:
        separators = level0_separators(graph, (n, n))
    lo, hi = separators.cell(n)

    for point, expected in ((lo, n - 1), (hi, n)):
        if point > 0:
            count = staircase(graph, point, c).N
            if not (_is_integer(count) and round(count) == expected):
                raise ConsistencyError(
                    f"N({point:.15g}) = {count:.9f}, expected {expected}",
                    invariant="N(k_hat_{n-1}) = n - 1 and N(k_hat_n) = n",
                )

    integral = staircase_integral(graph, lo, hi, offset=c)
    return n * hi - (n - 1) * lo - integral


def _require_regular(graph: Graph) -> TrigPoly:
    p = reduced_form(graph)
    degree = irregularity_degree(p)
    if degree.m != 0:
        raise IrregularPolyError(
            f"graph not regular (m = {degree.m}, alpha = {degree.alpha:.6g})",
            invariant="graph not regular (expansion separators invalid)",
        )
    return p


def _catalog_for(graph: Graph, l_max: int, catalog: Optional[OrbitCatalog]) -> OrbitCatalog:
    if catalog is None:
        return enumerate_orbits(graph, l_max)
    if catalog.l_max < l_max:
        raise InputError(f"orbit catalog covers l <= {catalog.l_max}, expansion needs {l_max}")
    return catalog


def _partial_estimates(base: float, buckets: np.ndarray, scale: float) -> List[float]:
    return (base - scale * np.cumsum(buckets)).tolist()


def root_by_orbit_expansion(graph: Graph, n: int, l_max: int, catalog: Optional[OrbitCatalog] = None,
                            reference: Optional[float] = None, offset: Optional[float] = None) -> ExpansionResult:
    """k_n from the periodic-orbit series summed strictly by symbolic length"""
    _require_regular(graph)
    catalog = _catalog_for(graph, l_max, catalog)
    c = spectral_offset(graph) if offset is None else offset
    S0 = graph.S0
    k_bar = math.pi * (n + c - 0.5) / S0

    buckets = np.zeros(l_max)
    for l in range(1, l_max + 1):
        orbits = catalog.orbits.get(l, [])
        if not orbits:
            continue
        weights = np.array([o.multiplicity * o.amplitude for o in orbits])
        actions = np.array([o.action for o in orbits])
        terms = weights * np.exp(1j * actions * k_bar) * np.sin(0.5 * math.pi * actions / S0) / actions
        buckets[l - 1] = float(np.sum(terms).imag) / l

    partial = _partial_estimates(k_bar, buckets, 2.0 / math.pi)
    return ExpansionResult(n=n, estimate=partial[-1], l_max=l_max, partial_sums=partial,
                           reference=reference, formula="orbit")


def root_by_prime_expansion(graph: Graph, n: int, l_max: int, catalog: Optional[OrbitCatalog] = None,
                            reference: Optional[float] = None, offset: Optional[float] = None) -> ExpansionResult:
    """Same series regrouped over primes and repetitions, still bucketed by l = nu * l_P"""
    _require_regular(graph)
    catalog = _catalog_for(graph, l_max, catalog)
    c = spectral_offset(graph) if offset is None else offset
    S0 = graph.S0
    k_bar = math.pi * (n + c - 0.5) / S0

    buckets = np.zeros(l_max)
    for prime in catalog.primes:
        L = prime.action
        for nu in range(1, l_max // prime.length + 1):
            term = (prime.amplitude ** nu) * np.exp(1j * nu * L * k_bar) * math.sin(0.5 * math.pi * nu * L / S0)
            buckets[nu * prime.length - 1] += term.imag / (nu * nu * L)

    partial = _partial_estimates(k_bar, buckets, 2.0 / math.pi)
    return ExpansionResult(n=n, estimate=partial[-1], l_max=l_max, partial_sums=partial,
                           reference=reference, formula="prime")


def estimate_kappa2(p: TrigPoly, n_roots: int = KAPPA_ROOTS) -> float:
    """Separator offset inferred from where the first roots sit in their cells"""
    spacing = p.mean_spacing
    roots = oracle_scan(p, 0.0, spacing * (n_roots + 4))
    roots = roots[roots > ZERO_CUTOFF * spacing][:n_roots]
    indices = np.arange(1, len(roots) + 1)
    return 0.5 + float(np.mean(p.S0 * roots / math.pi - indices))


def regular_energy_expansion(graph: Graph, n: int, l_max: int, catalog: Optional[OrbitCatalog] = None,
                             reference: Optional[float] = None) -> ExpansionResult:
    """E_n from the prime-orbit energy series.

    Valid when the separators sit at (pi / S0)(n + 1/2) and every prime
    amplitude is real; both are checked before summing.
    """
    p = _require_regular(graph)
    catalog = _catalog_for(graph, l_max, catalog)

    kappa2 = estimate_kappa2(p)
    if abs(kappa2 - 0.5) > KAPPA_TOLERANCE:
        raise AssumptionError(f"kappa2 = {kappa2:.6f}, expected 1/2", invariant="kappa2 = 1/2")
    complex_primes = [pr for pr in catalog.primes if abs(pr.amplitude.imag) > REAL_AMPLITUDE_TOLERANCE]
    if complex_primes:
        raise AssumptionError(
            f"{len(complex_primes)} prime orbit(s) with complex amplitude, e.g. {complex_primes[0].amplitude}",
            invariant="all A_p real",
        )

    S0 = graph.S0
    leading = (math.pi / S0) ** 2 * (n * n + 1.0 / 12.0)
    buckets = np.zeros(l_max)
    for prime in catalog.primes:
        omega = math.pi * prime.action / S0
        for nu in range(1, l_max // prime.length + 1):
            theta = nu * omega
            weight = (prime.amplitude ** nu) * np.exp(1j * n * theta)
            half = 0.5 * theta
            linear = (weight * math.sin(half)).imag / (omega * nu * nu)
            cubic = (weight * (math.sin(half) - half * math.cos(half))).real / (nu ** 3 * omega ** 2)
            buckets[nu * prime.length - 1] += 4.0 * math.pi * (n * linear + cubic) / S0 ** 2

    partial = _partial_estimates(leading, buckets, 1.0)
    return ExpansionResult(n=n, estimate=partial[-1], l_max=l_max, partial_sums=partial,
                           reference=reference, formula="energy")


def function_of_root(graph: Graph, n: int, f: Callable[[float], float], f_prime: Callable[[float], float],
                     l_max: int, catalog: Optional[OrbitCatalog] = None,
                     reference: Optional[float] = None) -> ExpansionResult:
    """f(k_n) = n f(k_hat_n) - (n-1) f(k_hat_{n-1}) - int f' N-bar - (1/pi) Im sum_l (1/l) sum l_P A G_n(L0)

    G_n(x) = int f'(k) exp(i x k) dk over the cell, by oscillatory-weight quadrature.
    """
    p = _require_regular(graph)
    catalog = _catalog_for(graph, l_max, catalog)
    c = spectral_offset(graph)
    lo, hi = regular_separators(p, (n, n)).cell(n)

    smooth, _ = quad(lambda k: f_prime(k) * (graph.S0 * k / math.pi - c), lo, hi, limit=200)
    base = n * f(hi) - (n - 1) * f(lo) - smooth

    transforms: Dict[float, complex] = {}

    def transform(x: float) -> complex:
        key = round(x, 12)
        if key not in transforms:
            re, _ = quad(f_prime, lo, hi, weight='cos', wvar=x)
            im, _ = quad(f_prime, lo, hi, weight='sin', wvar=x)
            transforms[key] = complex(re, im)
        return transforms[key]

    buckets = np.zeros(l_max)
    for l in range(1, l_max + 1):
        total = 0.0 + 0.0j
        for orbit in catalog.orbits.get(l, []):
            total += orbit.multiplicity * orbit.amplitude * transform(orbit.action)
        buckets[l - 1] = total.imag / l

    partial = _partial_estimates(base, buckets, 1.0 / math.pi)
    return ExpansionResult(n=n, estimate=partial[-1], l_max=l_max, partial_sums=partial,
                           reference=reference, formula="function")


def density_of_states(graph: Graph, k, l_max: int, catalog: Optional[OrbitCatalog] = None):
    """Truncated trace formula S0/pi + (1/pi) Re sum_p L_P sum_nu A_p^nu exp(i nu L_P k)"""
    catalog = _catalog_for(graph, l_max, catalog)
    k_arr = np.asarray(k, dtype=float)
    rho = np.full(k_arr.shape, graph.S0 / math.pi)
    for prime in catalog.primes:
        for nu in range(1, l_max // prime.length + 1):
            rho = rho + prime.action * np.real(prime.amplitude ** nu * np.exp(1j * nu * prime.action * k_arr)) / math.pi
    return float(rho) if k_arr.ndim == 0 else rho

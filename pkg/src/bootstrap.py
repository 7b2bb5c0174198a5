# ABOUTME: Separator-hierarchy bootstrap that brackets and solves every root of the reduced determinant
# ABOUTME: Includes the vectorised cell solver, the dense-scan oracle and the contraction fixed-point route

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.detpoly import differentiate, evaluate, irregularity_degree
from src.exceptions import CellContractError, ConvergenceError, InputError, IrregularPolyError
from src.models import SeparatorHierarchy, SeparatorLevel, SolveMethod, SpectrumResult, TrigPoly

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-11
BISECTION_RTOL = 1e-6
ORACLE_SAMPLES = 1000
MU_SCAN_SPACINGS = 3
# Roots closer to zero than this fraction of a mean spacing count as k <= 0
ZERO_CUTOFF = 1e-12
FIXED_POINT_TOLERANCE = 1e-14

_POLISH_STEPS = 100
_ORACLE_CHUNK = 1 << 18
_EPS = np.finfo(float).eps


def _same_sign(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sign(x) == np.sign(y)


def _solve_brackets(p: TrigPoly, a: np.ndarray, b: np.ndarray,
                    fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    """Vectorised bisection to 1e-6 relative, then Illinois-safeguarded secant to machine resolution.

    Requires fa * fb < 0 on every bracket.
    """
    a, b = a.astype(float).copy(), b.astype(float).copy()
    fa, fb = fa.astype(float).copy(), fb.astype(float).copy()
    if len(a) == 0:
        return a

    for _ in range(200):
        active = (b - a) > BISECTION_RTOL * np.maximum(1.0, np.abs(a))
        if not active.any():
            break
        mid = 0.5 * (a + b)
        fm = evaluate(p, mid)
        zero = active & (fm == 0)
        go_right = active & ~zero & _same_sign(fm, fa)
        go_left = active & ~zero & ~go_right
        a = np.where(go_right | zero, mid, a)
        fa = np.where(go_right, fm, np.where(zero, 0.0, fa))
        b = np.where(go_left | zero, mid, b)
        fb = np.where(go_left, fm, np.where(zero, 0.0, fb))

    side = np.zeros(len(a), dtype=int)
    for step in range(_POLISH_STEPS):
        tol = 4.0 * _EPS * np.maximum(1.0, np.abs(a) + np.abs(b))
        active = ((b - a) > tol) & (fa != 0) & (fb != 0)
        if not active.any():
            break
        with np.errstate(divide='ignore', invalid='ignore'):
            c = (a * fb - b * fa) / (fb - fa)
        # Every fourth step bisects so the bracket always shrinks
        bad = ~np.isfinite(c) | (c <= a) | (c >= b) | (step % 4 == 3)
        c = np.where(bad, 0.5 * (a + b), c)
        fc = evaluate(p, c)

        zero = active & (fc == 0)
        move_a = active & ~zero & _same_sign(fc, fa)
        move_b = active & ~zero & ~move_a

        # Illinois: halve the stale endpoint value when the same side moves twice
        fb = np.where(move_a & (side == 1), 0.5 * fb, fb)
        fa = np.where(move_b & (side == -1), 0.5 * fa, fa)

        a = np.where(move_a | zero, c, a)
        fa = np.where(move_a, fc, np.where(zero, 0.0, fa))
        b = np.where(move_b | zero, c, b)
        fb = np.where(move_b, fc, np.where(zero, 0.0, fb))
        side = np.where(move_a, 1, np.where(move_b, -1, side))

    return np.where(fa == 0, a, np.where(fb == 0, b, 0.5 * (a + b)))


def solve_cells(p: TrigPoly, lo: Sequence[float], hi: Sequence[float], level: Optional[int] = None,
                first_cell: int = 0,
                degeneracy_tolerance: float = DEGENERACY_TOLERANCE) -> Tuple[np.ndarray, np.ndarray]:
    """Single root of p in each cell (lo_i, hi_i); returns roots and degenerate flags.

    An endpoint where |p| is below the degeneracy tolerance is returned as the
    cell's root and flagged. A cell with no sign change otherwise violates the
    one-root-per-cell contract.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    f_lo = np.atleast_1d(evaluate(p, lo))
    f_hi = np.atleast_1d(evaluate(p, hi))

    deg_lo = np.abs(f_lo) < degeneracy_tolerance
    deg_hi = (np.abs(f_hi) < degeneracy_tolerance) & ~deg_lo
    degenerate = deg_lo | deg_hi

    roots = np.where(deg_lo, lo, np.where(deg_hi, hi, np.nan))
    regular = ~degenerate
    bad = regular & _same_sign(f_lo, f_hi)
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        raise CellContractError(
            level if level is not None else p.level,
            first_cell + i, float(lo[i]), float(hi[i]), float(f_lo[i]), float(f_hi[i]),
        )

    if regular.any():
        roots[regular] = _solve_brackets(p, lo[regular], hi[regular], f_lo[regular], f_hi[regular])
    if degenerate.any():
        logger.warning(f"{int(degenerate.sum())} degenerate root(s) at level {p.level}: separator coincides with root")
    return roots, degenerate


def root_in_cell(p: TrigPoly, lo: float, hi: float,
                 degeneracy_tolerance: float = DEGENERACY_TOLERANCE) -> float:
    """Root of p in one cell via scipy's bracketed solver"""
    f_lo, f_hi = evaluate(p, lo), evaluate(p, hi)
    if abs(f_lo) < degeneracy_tolerance:
        return float(lo)
    if abs(f_hi) < degeneracy_tolerance:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise CellContractError(p.level, 0, float(lo), float(hi), float(f_lo), float(f_hi))
    return float(brentq(lambda k: evaluate(p, k), lo, hi, xtol=1e-15, rtol=4 * _EPS, maxiter=200))


def oracle_scan(p: TrigPoly, k_lo: float, k_hi: float,
                samples_per_mean_spacing: int = ORACLE_SAMPLES) -> np.ndarray:
    """Every sign-change root on [k_lo, k_hi] from a dense uniform scan"""
    if samples_per_mean_spacing < 100:
        raise InputError(
            f"samples_per_mean_spacing must be >= 100, got {samples_per_mean_spacing}",
            invariant="samples_per_mean_spacing >= 100",
        )
    if not k_hi > k_lo:
        return np.zeros(0)

    h = p.mean_spacing / samples_per_mean_spacing
    n = int(math.ceil((k_hi - k_lo) / h))
    exact, brackets_lo, brackets_hi, f_los, f_his = [], [], [], [], []

    for start in range(0, n, _ORACLE_CHUNK):
        idx = np.arange(start, min(start + _ORACLE_CHUNK, n) + 1)
        grid = np.minimum(k_lo + h * idx, k_hi)
        f = evaluate(p, grid)
        last = idx[-1] == n
        zero_at = np.nonzero(f[:None if last else -1] == 0)[0]
        exact.append(grid[zero_at])
        change = np.nonzero((f[:-1] * f[1:]) < 0)[0]
        brackets_lo.append(grid[change])
        brackets_hi.append(grid[change + 1])
        f_los.append(f[change])
        f_his.append(f[change + 1])

    roots = _solve_brackets(
        p, np.concatenate(brackets_lo), np.concatenate(brackets_hi),
        np.concatenate(f_los), np.concatenate(f_his),
    )
    roots = np.sort(np.concatenate([roots] + exact))
    logger.debug(f"Oracle scan on [{k_lo:.6g}, {k_hi:.6g}]: {n} samples, {len(roots)} roots")
    return roots


def find_mu(p: TrigPoly, scan_spacings: int = MU_SCAN_SPACINGS) -> int:
    """Integer offset placing the first positive root of p in cell 1 of the periodic lattice"""
    spacing = p.mean_spacing
    hi = scan_spacings * spacing
    for _ in range(8):
        roots = oracle_scan(p, 0.0, hi)
        positive = roots[roots > ZERO_CUTOFF * spacing]
        if len(positive):
            first = float(positive[0])
            j1 = int(math.floor(first / spacing - p.effective_gamma)) + 1
            return j1 - 2
        hi *= 2.0
    raise ConvergenceError(f"no positive root found within {hi:.6g} while fixing mu")


def regular_separators(p: TrigPoly, n_range: Tuple[int, int], mu: Optional[int] = None) -> SeparatorLevel:
    """Periodic separators k_n = (pi / S0)(n + gamma + mu + 1) covering cells n_range"""
    if p.alpha >= 1.0:
        raise IrregularPolyError(f"p not regular (alpha = {p.alpha:.6g})", invariant="characteristic_sum(p) < 1")
    if mu is None:
        mu = find_mu(p)
    a, b = n_range
    indices = np.arange(a - 1, b + 1)
    positions = p.mean_spacing * (indices + p.effective_gamma + mu + 1)
    return SeparatorLevel(level=p.level, indices=indices, positions=positions, mu=mu, gamma=p.effective_gamma)


def fixed_point_roots(p: TrigPoly, ns: Sequence[int], mu: Optional[int] = None) -> np.ndarray:
    """Roots of cells ns from the contraction xi <- arccos((-1)^j phi_j(xi)), Aitken accelerated.

    In the shifted variable x = S0 k - pi gamma, cell j is (j pi, (j + 1) pi)
    and the root is x = j pi + xi with xi in (0, pi).
    """
    alpha = p.alpha
    if alpha >= 1.0:
        raise IrregularPolyError(f"p not regular (alpha = {alpha:.6g})", invariant="characteristic_sum(p) < 1")
    if mu is None:
        mu = find_mu(p)

    j = np.asarray(ns, dtype=np.int64) + mu
    gamma = p.effective_gamma
    amps = p.level_amplitudes
    omegas = p.epsilons
    offsets = omegas * math.pi * gamma - math.pi * p.phases + 0.5 * math.pi * p.level
    sign = np.where(j % 2 == 0, 1.0, -1.0)
    shifts = offsets[None, :] + math.pi * np.outer(j, omegas)

    def h(xi: np.ndarray) -> np.ndarray:
        phi = np.cos(xi[:, None] * omegas[None, :] + shifts) @ amps if len(amps) else np.zeros_like(xi)
        return np.arccos(np.clip(sign * phi, -1.0, 1.0))

    cap = 10 * int(math.ceil(1.0 / (1.0 - alpha)))
    xi = np.full(len(j), 0.5 * math.pi)
    done = np.zeros(len(j), dtype=bool)

    for _ in range(cap):
        x1 = h(xi)
        x2 = h(x1)
        with np.errstate(divide='ignore', invalid='ignore'):
            denom = x2 - 2.0 * x1 + xi
            accelerated = xi - (x1 - xi) ** 2 / denom
        usable = np.isfinite(accelerated) & (accelerated >= 0.0) & (accelerated <= math.pi)
        nxt = np.where(usable, accelerated, x2)
        step = np.abs(nxt - xi)
        xi = np.where(done, xi, nxt)
        done |= step < FIXED_POINT_TOLERANCE
        if done.all():
            break
    else:
        raise ConvergenceError(
            f"fixed-point iteration exceeded {cap} steps (alpha = {alpha:.6g})",
            invariant="iteration exceeds 10*ceil(1/(1-alpha)) steps",
        )

    return (j * math.pi + xi + math.pi * gamma) / p.S0


def fixed_point_root(p: TrigPoly, n: int, mu: Optional[int] = None) -> float:
    """Root of cell n by contraction"""
    return float(fixed_point_roots(p, [n], mu=mu)[0])


def random_regular_poly(rng: np.random.Generator, max_terms: int = 4) -> TrigPoly:
    """Regular form with S0 = 1, alpha drawn from (0.05, 0.95) and 1..max_terms terms"""
    n_terms = int(rng.integers(1, max_terms + 1))
    alpha = float(rng.uniform(0.05, 0.95))
    return TrigPoly(
        S0=1.0,
        gamma0=float(rng.uniform(0.0, 2.0)),
        amplitudes=alpha * rng.dirichlet(np.ones(n_terms)),
        frequencies=rng.uniform(0.0, 0.99, n_terms),
        phases=rng.uniform(0.0, 2.0, n_terms),
    )


def cell_property_check(p: TrigPoly, cells: int) -> Tuple[int, float]:
    """Cells 1..cells that do not hold exactly one oracle root, and the worst
    relative deviation of the contraction roots from the bracketed ones"""
    separators = regular_separators(p, (1, cells))
    lo, hi = separators.positions[0], separators.positions[-1]
    roots = oracle_scan(p, lo, hi)
    roots = roots[(roots > lo) & (roots < hi)]
    counts = np.bincount(np.searchsorted(separators.positions, roots) - 1, minlength=cells)
    miscounted = int(np.sum(counts[:cells] != 1)) + int(np.sum(counts[cells:]))

    fixed = fixed_point_roots(p, np.arange(1, cells + 1), mu=separators.mu)
    bracketed, _ = solve_cells(p, separators.positions[:-1], separators.positions[1:])
    worst = float(np.max(np.abs(fixed - bracketed) / np.abs(bracketed)))
    return miscounted, worst


def descend_hierarchy(p: TrigPoly, n_range: Tuple[int, int],
                      degeneracy_tolerance: float = DEGENERACY_TOLERANCE,
                      max_attempts: int = 6) -> SeparatorHierarchy:
    """All roots of p with index in n_range via the separator hierarchy.

    Level m carries periodic separators. At each level l = m..0 the single root
    of the level-l form in every cell is found; those roots are the extrema of
    level l - 1 and bracket its roots one level down.
    """
    a, b = n_range
    if a < 1 or b < a:
        raise InputError(f"index range needs 1 <= a <= b, got {a}..{b}")

    m = irregularity_degree(p).m
    top = differentiate(p, m)
    mu = find_mu(top)
    spacing = p.mean_spacing
    gamma = top.effective_gamma
    pad = (m + 2) * (m + 1) + 2
    k_hi = spacing * (b + pad + 2)

    for attempt in range(max_attempts):
        j = np.arange(int(math.floor(-pad - gamma)), int(math.ceil(k_hi / spacing - gamma)) + 1)
        seps = spacing * (j + gamma)
        sep_labels = j - mu - 1
        levels = []

        for l in range(m, -1, -1):
            poly = differentiate(p, l)
            roots, degenerate = solve_cells(poly, seps[:-1], seps[1:], level=l,
                                            first_cell=int(sep_labels[0]) + 1,
                                            degeneracy_tolerance=degeneracy_tolerance)
            n_nonpositive = int(np.sum(roots <= ZERO_CUTOFF * spacing))
            root_labels = np.arange(len(roots)) - n_nonpositive + 1
            if l < m:
                sep_labels = root_labels[0] - 1 + np.arange(len(seps))
            levels.append(SeparatorLevel(
                level=l,
                indices=np.asarray(sep_labels),
                positions=seps,
                mu=mu if l == m else None,
                gamma=poly.effective_gamma,
            ))
            logger.debug(f"Level {l}: {len(seps)} separators, {len(roots)} roots")
            seps, sep_labels = roots, root_labels

        if len(root_labels) and root_labels[-1] >= b:
            break
        k_hi *= 2.0
        logger.info(f"Hierarchy window too short for index {b}; widening to k <= {k_hi:.6g}")
    else:
        raise ConvergenceError(f"hierarchy window never reached root index {b}")

    wanted = (root_labels >= a) & (root_labels <= b)
    logger.info(f"Hierarchy with m={m} resolved roots {a}..{b}")
    return SeparatorHierarchy(
        m=m,
        levels=levels,
        roots=roots[wanted],
        indices=root_labels[wanted],
        degenerate=degenerate[wanted],
    )


def _oracle_window(p: TrigPoly, n_range: Tuple[int, int], samples: int) -> Tuple[np.ndarray, np.ndarray]:
    a, b = n_range
    spacing = p.mean_spacing
    k_hi = spacing * (b + 4)
    for _ in range(8):
        roots = oracle_scan(p, 0.0, k_hi, samples)
        roots = roots[roots > ZERO_CUTOFF * spacing]
        if len(roots) >= b:
            labels = np.arange(1, len(roots) + 1)
            wanted = (labels >= a) & (labels <= b)
            return labels[wanted], roots[wanted]
        k_hi *= 1.5
    raise ConvergenceError(f"oracle never reached root index {b}")


def compute_spectrum(p: TrigPoly, n_range: Tuple[int, int], method: str = SolveMethod.BOOTSTRAP.value,
                     samples: int = ORACLE_SAMPLES,
                     degeneracy_tolerance: float = DEGENERACY_TOLERANCE) -> SpectrumResult:
    """Roots k_a..k_b with residuals, by the requested method"""
    method = SolveMethod(method)
    m = irregularity_degree(p).m

    if method == SolveMethod.BOOTSTRAP:
        hierarchy = descend_hierarchy(p, n_range, degeneracy_tolerance=degeneracy_tolerance)
        indices, roots, degenerate = hierarchy.indices, hierarchy.roots, hierarchy.degenerate
    elif method == SolveMethod.ORACLE:
        indices, roots = _oracle_window(p, n_range, samples)
        degenerate = np.zeros(len(roots), dtype=bool)
    else:
        a, b = n_range
        indices = np.arange(a, b + 1)
        roots = fixed_point_roots(p, indices)
        degenerate = np.zeros(len(roots), dtype=bool)

    residuals = np.abs(np.atleast_1d(evaluate(p, roots)))
    return SpectrumResult(
        indices=np.asarray(indices),
        roots=np.asarray(roots),
        method=method.value,
        level_m=m,
        residuals=residuals,
        degenerate=np.asarray(degenerate),
    )

# ABOUTME: Expands det(1 - S(k)) into an exponential polynomial and reduces it to real cosine form
# ABOUTME: Also evaluates, differentiates and classifies the reduced form by irregularity degree

import logging
import math
from typing import Dict, NamedTuple

import numpy as np

from src.exceptions import ExpansionCapError, InputError, NoFiniteDegreeError, ReducibilityError
from src.graph_core import s_matrix
from src.models import ExpPoly, Graph, TrigPoly

logger = logging.getLogger(__name__)

DEFAULT_EXPANSION_CAP = 16
MERGE_TOLERANCE = 1e-9
DROP_TOLERANCE = 1e-12
REDUCTION_TOLERANCE = 1e-9
# Coefficients that cancel below this are removed from the expansion
CANCELLATION_FLOOR = 1e-14


class IrregularityDegree(NamedTuple):
    m: int
    bound: int
    alpha: float


def expand_determinant(graph: Graph, cap: int = DEFAULT_EXPANSION_CAP,
                       merge_tolerance: float = MERGE_TOLERANCE) -> ExpPoly:
    """Symbolic expansion of det(1 - S(k)) as sum_j c_j exp(i S_j k).

    Row I of S carries the single phase exp(i beta_I L_I k), so every term of
    the Laplace expansion is labelled by the set of rows that contributed an S
    entry. Minors are memoised on the set of used columns and only columns with
    a nonzero amplitude (or the diagonal) are visited.
    """
    n = graph.n_directed
    if n > cap:
        raise ExpansionCapError(
            f"graph exceeds expansion cap: 2N_B = {n} > {cap}",
            invariant="2N_B <= configurable cap",
        )

    T = graph.transition
    candidates = [sorted(set(np.nonzero(np.abs(T[i]) > 0)[0].tolist()) | {i}) for i in range(n)]
    memo: Dict[int, Dict[int, complex]] = {}

    def minor(used: int) -> Dict[int, complex]:
        row = bin(used).count("1")
        if row == n:
            return {0: 1.0 + 0.0j}
        if used in memo:
            return memo[used]

        result: Dict[int, complex] = {}
        for j in candidates[row]:
            if used >> j & 1:
                continue
            position = j - bin(used & ((1 << j) - 1)).count("1")
            sign = -1.0 if position % 2 else 1.0
            entries = []
            if j == row:
                entries.append((0, 1.0))
            if T[row, j] != 0:
                entries.append((1 << row, -T[row, j]))
            sub = minor(used | (1 << j))
            for bit, value in entries:
                for mask, c in sub.items():
                    key = mask | bit
                    result[key] = result.get(key, 0.0) + sign * value * c
        memo[used] = result
        return result

    terms = minor(0)
    actions = graph.actions
    freqs = np.array([sum(actions[i] for i in range(n) if mask >> i & 1) for mask in terms])
    coeffs = np.array(list(terms.values()), dtype=complex)

    order = np.argsort(freqs, kind="stable")
    freqs, coeffs = freqs[order], coeffs[order]

    # Merge frequencies that collide within the tolerance
    tol = merge_tolerance * graph.S0
    merged_f, merged_c = [], []
    start = 0
    for i in range(1, len(freqs) + 1):
        if i == len(freqs) or freqs[i] - freqs[start] >= tol:
            merged_f.append(float(np.mean(freqs[start:i])))
            merged_c.append(complex(np.sum(coeffs[start:i])))
            start = i

    merged_c = np.array(merged_c)
    keep = np.abs(merged_c) > CANCELLATION_FLOOR
    poly = ExpPoly(coefficients=merged_c[keep], frequencies=np.array(merged_f)[keep])
    logger.debug(f"Expanded determinant: {len(terms)} raw terms, {poly.n_terms} frequencies, {len(memo)} minors")
    return poly


def evaluate_exp(p: ExpPoly, k):
    """Delta(k) = sum_j c_j exp(i S_j k)"""
    k_arr = np.asarray(k, dtype=float)
    values = np.exp(1j * np.multiply.outer(k_arr, p.frequencies)) @ p.coefficients
    return complex(values) if k_arr.ndim == 0 else values


def evaluate(p: TrigPoly, k):
    """Delta_R^(l)(k) / S0^l for the level carried by p"""
    k_arr = np.asarray(k, dtype=float)
    shift = 0.5 * math.pi * p.level
    values = np.cos(p.S0 * k_arr - math.pi * p.gamma0 + shift)
    if p.n_terms:
        args = np.multiply.outer(k_arr, p.frequencies) - math.pi * p.phases + shift
        values = values - np.cos(args) @ p.level_amplitudes
    return float(values) if k_arr.ndim == 0 else values


def numeric_determinant(graph: Graph, k: float) -> complex:
    """Dense det(1 - S(k))"""
    return complex(np.linalg.det(np.eye(graph.n_directed) - s_matrix(graph, k)))


def theta_from_det(graph: Graph, k: float) -> float:
    """Theta0(k) modulo pi from half the phase of det S(k)"""
    return float(0.5 * np.angle(np.linalg.det(s_matrix(graph, k))))


def to_real_form(p: ExpPoly, graph: Graph = None, tolerance: float = REDUCTION_TOLERANCE,
                 drop_tolerance: float = DROP_TOLERANCE) -> TrigPoly:
    """Factor Delta = norm * exp(i Theta0) * Delta_R with Theta0 = S0 k - pi gamma0.

    Reducibility is detected, not assumed: each frequency S0 - d must pair with
    S0 + d through complex conjugation after the phase is removed.
    """
    if p.n_terms < 2:
        raise ReducibilityError("p nonzero with paired leading and trailing frequencies required",
                                invariant="p nonzero")
    f, c = p.frequencies, p.coefficients
    S0 = 0.5 * (f[-1] - f[0])
    if abs(f[0]) > tolerance * max(1.0, f[-1]) or S0 <= 0:
        raise ReducibilityError(f"lowest frequency {f[0]} is not zero",
                                invariant="leading and trailing frequencies paired")

    c_lo, c_hi = c[0], c[-1]
    if c_lo.real <= 0 or abs(c_lo.imag) > tolerance * abs(c_lo):
        raise ReducibilityError(f"constant coefficient {c_lo} is not real positive",
                                invariant="leading and trailing frequencies paired")
    if abs(abs(c_hi) - abs(c_lo)) > tolerance * abs(c_lo):
        raise ReducibilityError(f"modulus asymmetry |c_top| = {abs(c_hi):.12g} vs |c_0| = {abs(c_lo):.12g}",
                                invariant="modulus asymmetry exceeds tolerance")

    norm = 2.0 * c_lo.real
    gamma0 = float((-np.angle(c_hi) / (2.0 * math.pi)) % 2.0)

    if graph is not None:
        # det S(0) = det T = exp(-2 pi i gamma0)
        det_t = np.linalg.det(graph.transition)
        if abs(det_t - np.exp(-2j * math.pi * gamma0)) > tolerance:
            raise ReducibilityError(
                f"gamma0 discrepancy: det T = {det_t:.12g}, expansion gives exp(-2 pi i {gamma0:.12g})",
                invariant="gamma0 extraction cross-check",
            )

    b = c * np.exp(1j * math.pi * gamma0) / norm
    d = f - S0
    tol_f = MERGE_TOLERANCE * S0
    amplitudes, frequencies, phases = [], [], []
    matched = set()

    for j in range(1, len(f) - 1):
        if d[j] > tol_f:
            continue
        if abs(d[j]) <= tol_f:
            if abs(b[j].imag) > tolerance * max(1.0, abs(b[j])):
                raise ReducibilityError(f"middle coefficient {b[j]} is not real",
                                        invariant="modulus asymmetry exceeds tolerance")
            a = abs(b[j].real)
            if a > drop_tolerance:
                amplitudes.append(a)
                frequencies.append(0.0)
                phases.append(1.0 if b[j].real > 0 else 0.0)
            continue

        partner = int(np.argmin(np.abs(d + d[j])))
        if abs(d[partner] + d[j]) > tol_f:
            raise ReducibilityError(f"frequency {f[j]:.12g} has no mirror partner",
                                    invariant="leading and trailing frequencies paired")
        if abs(b[partner] - np.conj(b[j])) > tolerance * max(1.0, abs(b[j])):
            raise ReducibilityError(
                f"coefficients at S0 -/+ {abs(d[j]):.12g} are not conjugate ({b[j]} vs {b[partner]})",
                invariant="modulus asymmetry exceeds tolerance",
            )
        matched.add(partner)
        b_pos = 0.5 * (b[partner] + np.conj(b[j]))
        a = 2.0 * abs(b_pos)
        if a > drop_tolerance:
            amplitudes.append(a)
            frequencies.append(float(d[partner]))
            phases.append(float((1.0 - np.angle(b_pos) / math.pi) % 2.0))

    unmatched = [j for j in range(1, len(f) - 1) if d[j] > tol_f and j not in matched]
    if unmatched:
        raise ReducibilityError(f"frequency {f[unmatched[0]]:.12g} has no mirror partner",
                                invariant="leading and trailing frequencies paired")

    order = np.argsort(frequencies)
    poly = TrigPoly(
        S0=float(S0),
        gamma0=gamma0,
        amplitudes=np.array(amplitudes)[order],
        frequencies=np.array(frequencies)[order],
        phases=np.array(phases)[order],
        level=0,
        norm=float(norm),
    )
    logger.debug(f"Reduced form: S0={poly.S0:.12g}, gamma0={poly.gamma0:.6f}, {poly.n_terms} terms, alpha={poly.alpha:.6g}")
    return poly


def reconstruct(p: TrigPoly, k):
    """norm * exp(i Theta0) * Delta_R(k) at level 0"""
    k_arr = np.asarray(k, dtype=float)
    return p.norm * np.exp(1j * (p.S0 * k_arr - math.pi * p.gamma0)) * evaluate(p.with_level(0), k_arr)


def characteristic_sum(p: TrigPoly) -> float:
    """alpha = sum |a_i eps_i^l|; the form is regular when alpha < 1"""
    return p.alpha


def is_regular(p: TrigPoly) -> bool:
    return p.alpha < 1.0


def differentiate(p: TrigPoly, l: int) -> TrigPoly:
    """Raise the derivative level by l (amplitudes scale by eps^l, phases shift by pi l / 2)"""
    if l < 0:
        raise InputError(f"derivative order must be nonnegative, got {l}")
    return p.with_level(p.level + l)


def irregularity_degree(p: TrigPoly) -> IrregularityDegree:
    """Smallest extra derivative order m with sum |a_i eps_i^(l+m)| < 1, and the log bound on m"""
    amps = np.abs(p.level_amplitudes)
    eps = p.epsilons
    keep = amps > 0
    amps, eps = amps[keep], eps[keep]
    alpha = float(np.sum(amps))

    if alpha < 1.0:
        return IrregularityDegree(0, 0, alpha)

    eps_max = float(np.max(eps))
    if eps_max >= 1.0 - 1e-12:
        raise NoFiniteDegreeError(
            f"no finite m: a frequency equals S0 (eps = {eps_max}) with alpha = {alpha:.6g}",
            invariant="all eps_i < 1",
        )
    if eps_max == 0.0:
        bound = 1
    else:
        bound = int(math.floor(-math.log(alpha) / math.log(eps_max))) + 1

    m = 1
    while np.sum(amps * eps ** m) >= 1.0:
        m += 1
    return IrregularityDegree(m, bound, alpha)


def classify(p: TrigPoly) -> dict:
    """Summary printed by the classify command"""
    degree = irregularity_degree(p)
    return {
        "S0": float(p.S0),
        "gamma0": float(p.gamma0),
        "N_Gamma": int(p.n_terms),
        "alpha": float(degree.alpha),
        "m": int(degree.m),
        "m_bound": int(degree.bound),
    }


def two_bond_trigpoly(S0: float, S1: float, r: float) -> TrigPoly:
    """Real form of sin(S0 k) - r sin(S1 k) = 0"""
    if not S0 > 0 or abs(S1) >= S0:
        raise InputError(f"two-bond form needs |S1| < S0, got S0={S0}, S1={S1}", invariant="|S1/S0| < 1")
    if abs(r) >= 1:
        raise InputError(f"|r| >= 1: {r}", invariant="|r| < 1")
    gamma = 0.5 if S1 >= 0 else -0.5
    if r < 0:
        gamma += 1.0
    a = abs(r) if S1 != 0 else 0.0
    terms = [(a, abs(S1), gamma % 2.0)] if a > 0 else []
    return TrigPoly(
        S0=S0,
        gamma0=0.5,
        amplitudes=[t[0] for t in terms],
        frequencies=[t[1] for t in terms],
        phases=[t[2] for t in terms],
    )


def reduced_form(graph: Graph, cap: int = DEFAULT_EXPANSION_CAP) -> TrigPoly:
    """Expand det(1 - S) for a graph and reduce it in one step"""
    return to_real_form(expand_determinant(graph, cap=cap), graph)

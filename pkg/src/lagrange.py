# ABOUTME: Lagrange-inversion root solver for x = a + w * phi(x) using truncated Taylor arithmetic
# ABOUTME: Includes the two-bond spectral equation, its order-2 closed form and a Kepler-type test problem

import logging
import math
from typing import Callable, List, Tuple

import numpy as np

from src.exceptions import InputError, LagrangeValidityError
from src.models import LagrangeProblem

logger = logging.getLogger(__name__)

VALIDITY_SAMPLES = 100
CAUCHY_RADIUS = 0.5


# Truncated power series: arrays c with phi(a + h) = sum_j c[j] h^j, kept to ``size`` coefficients

def series_mul(x: np.ndarray, y: np.ndarray, size: int) -> np.ndarray:
    return np.convolve(x[:size], y[:size])[:size]


def series_pow(x: np.ndarray, n: int, size: int) -> np.ndarray:
    result = np.zeros(size, dtype=x.dtype)
    result[0] = 1.0
    base = x[:size]
    while n:
        if n & 1:
            result = series_mul(result, base, size)
        n >>= 1
        if n:
            base = series_mul(base, base, size)
    return result


def series_reciprocal(x: np.ndarray, size: int) -> np.ndarray:
    x = np.pad(x[:size], (0, max(0, size - len(x))))
    if x[0] == 0:
        raise InputError("series reciprocal needs a nonzero constant term")
    out = np.zeros(size, dtype=x.dtype)
    out[0] = 1.0 / x[0]
    for j in range(1, size):
        out[j] = -np.dot(x[1:j + 1], out[j - 1::-1]) / x[0]
    return out


def series_sqrt(x: np.ndarray, size: int) -> np.ndarray:
    if not x[0].real > 0:
        raise InputError("series square root needs a positive constant term")
    x = np.pad(x[:size], (0, max(0, size - len(x))))
    out = np.zeros(size, dtype=x.dtype)
    out[0] = np.sqrt(x[0])
    for j in range(1, size):
        out[j] = (x[j] - np.dot(out[1:j], out[1:j][::-1])) / (2.0 * out[0])
    return out


def series_derivative(x: np.ndarray) -> np.ndarray:
    return x[1:] * np.arange(1, len(x))


def series_integrate(x: np.ndarray, constant: complex = 0.0) -> np.ndarray:
    return np.concatenate([[constant], x / np.arange(1, len(x) + 1)])


def series_sin_affine(c0: float, c1: float, size: int) -> np.ndarray:
    """sin(c0 + c1 h)"""
    j = np.arange(size)
    return c1 ** j / np.array([math.factorial(i) for i in j], dtype=float) * np.sin(c0 + 0.5 * math.pi * j)


def series_cos_affine(c0: float, c1: float, size: int) -> np.ndarray:
    """cos(c0 + c1 h)"""
    j = np.arange(size)
    return c1 ** j / np.array([math.factorial(i) for i in j], dtype=float) * np.cos(c0 + 0.5 * math.pi * j)


def series_arcsin(u: np.ndarray, size: int) -> np.ndarray:
    """arcsin(u(h)) from y' = u' / sqrt(1 - u^2)"""
    u = np.pad(u[:size], (0, max(0, size - len(u))))
    if not abs(u[0]) < 1:
        raise InputError(f"arcsin series needs |u(0)| < 1, got {u[0]}")
    if size == 1:
        return np.array([np.arcsin(u[0])])
    root = series_sqrt(np.eye(1, size, 0).ravel() - series_mul(u, u, size), size)
    slope = series_mul(series_derivative(u), series_reciprocal(root, size), size - 1)
    return series_integrate(slope, np.arcsin(u[0]))[:size]


def cauchy_taylor(phi: Callable[[np.ndarray], np.ndarray], a: float, order: int,
                  radius: float = CAUCHY_RADIUS) -> np.ndarray:
    """Taylor coefficients of phi(a + h) up to h^order from FFT samples on a circle"""
    points = max(64, 4 * (order + 1))
    theta = 2.0 * math.pi * np.arange(points) / points
    values = np.asarray(phi(a + radius * np.exp(1j * theta)), dtype=complex)
    coefficients = np.fft.fft(values)[:order + 1] / points
    return coefficients / radius ** np.arange(order + 1)


def check_validity(problem: LagrangeProblem, samples: int = VALIDITY_SAMPLES) -> float:
    """Smallest |z - a| / |phi(z)| on the working circle; must exceed |w|.

    Samples the complex circle of radius ``problem.radius`` about a. Passing
    is necessary, not sufficient. Falls back to the ends of the real window
    when phi cannot take complex arguments.
    """
    theta = 2.0 * math.pi * np.arange(samples) / samples
    z = problem.a + problem.radius * np.exp(1j * theta)
    try:
        with np.errstate(all='ignore'):
            values = np.asarray(problem.phi(z), dtype=complex)
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite phi on the complex circle")
    except (TypeError, ValueError):
        # Real fallback: the boundary of the window is its two ends
        z = problem.a + problem.radius * np.array([-1.0, 1.0])
        values = np.asarray(problem.phi(z), dtype=complex)

    with np.errstate(divide='ignore'):
        ratios = np.abs(z - problem.a) / np.abs(values)
    worst = int(np.argmin(ratios))
    if not abs(problem.w) < ratios[worst]:
        raise LagrangeValidityError(
            f"|w| = {abs(problem.w):.6g} >= |x - a| / |phi(x)| = {ratios[worst]:.6g} at x = {z[worst]:.6g}",
            invariant="|w| < |(x - a) / phi(x)| on the working interval",
        )
    return float(ratios[worst])


def lagrange_root(problem: LagrangeProblem) -> Tuple[float, List[float]]:
    """x* = a + sum_nu (w^nu / nu) [h^(nu-1)] phi(a + h)^nu, with the partial sums"""
    if problem.order < 1:
        raise InputError(f"order must be >= 1, got {problem.order}")
    if problem.w == 0:
        return float(problem.a), [float(problem.a)] * problem.order

    check_validity(problem)
    size = problem.order
    if problem.series is not None:
        phi_series = np.asarray(problem.series(size), dtype=complex)[:size]
    else:
        phi_series = cauchy_taylor(problem.phi, problem.a, size - 1)

    partials = []
    x = complex(problem.a)
    power = np.eye(1, size, 0, dtype=complex).ravel()
    for nu in range(1, problem.order + 1):
        power = series_mul(power, phi_series, size)
        x += problem.w ** nu / nu * power[nu - 1]
        partials.append(float(x.real))
    logger.debug(f"Lagrange series to order {problem.order}: x* = {partials[-1]:.15g}")
    return partials[-1], partials


def _two_bond_checks(S0: float, S1: float, r: float, n: int):
    if not abs(r) < 1:
        raise InputError(f"|r| >= 1: {r}", invariant="|r| < 1")
    if not S0 > 0 or not abs(S1 / S0) < 1:
        raise InputError(f"|S1/S0| >= 1: S0={S0}, S1={S1}", invariant="|S1/S0| < 1")
    if n < 1:
        raise InputError(f"root index must be >= 1, got {n}")


def two_bond_problem(S0: float, S1: float, r: float, n: int, order: int) -> LagrangeProblem:
    """x_n = pi n + (-1)^n arcsin(r sin(rho x_n)) as a Lagrange problem with w = 1"""
    _two_bond_checks(S0, S1, r, n)
    rho = S1 / S0
    a = math.pi * n
    sign = -1.0 if n % 2 else 1.0

    def phi(x):
        return sign * np.arcsin(r * np.sin(rho * x))

    def series(size: int) -> np.ndarray:
        return sign * series_arcsin(r * series_sin_affine(rho * a, rho, size), size)

    return LagrangeProblem(a=a, w=1.0, phi=phi, order=order, series=series)


def two_bond_closed_form(S0: float, S1: float, r: float, n: int) -> float:
    """Order-2 truncation written out in closed form"""
    _two_bond_checks(S0, S1, r, n)
    rho = S1 / S0
    arg = rho * math.pi * n
    sign = -1.0 if n % 2 else 1.0
    correction = r * rho * math.cos(arg) / math.sqrt(1.0 - (r * math.sin(arg)) ** 2)
    return math.pi * n + math.asin(r * math.sin(arg)) * (sign + correction)


def two_bond_root(S0: float, S1: float, r: float, n: int, order: int) -> float:
    """x_n = S0 k_n of sin(S0 k) - r sin(S1 k) = 0 by Lagrange inversion"""
    if order == 2:
        return two_bond_closed_form(S0, S1, r, n)
    x, _ = lagrange_root(two_bond_problem(S0, S1, r, n, order))
    return x


def kepler_like_problem(a: float, w: float, order: int) -> LagrangeProblem:
    """x = a + w cos(x)"""
    return LagrangeProblem(
        a=a, w=w, phi=np.cos, order=order,
        series=lambda size: series_cos_affine(a, 1.0, size),
    )

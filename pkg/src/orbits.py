# ABOUTME: Enumerates periodic orbits as closed walks on directed bonds and decomposes them into primes
# ABOUTME: Checks the orbit-sum form of Tr S^l against dense matrix powers

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from src.exceptions import ConsistencyError, InputError, OrbitCapError
from src.graph_core import graph_hash, s_matrix
from src.models import Graph, Orbit, OrbitCatalog, PrimeOrbit
from src.utils import default_thread_count

logger = logging.getLogger(__name__)

DEFAULT_MAX_ORBITS = 10_000_000
TRACE_TOLERANCE = 1e-9


def transition_digraph(graph: Graph) -> nx.DiGraph:
    """Directed-bond digraph: edge I -> J whenever t_IJ is nonzero, weighted by the amplitude"""
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(graph.n_directed))
    rows, cols = np.nonzero(graph.transition)
    for i, j in zip(rows.tolist(), cols.tolist()):
        digraph.add_edge(i, j, amplitude=complex(graph.transition[i, j]))
    return digraph


def estimate_orbit_count(graph: Graph, l_max: int) -> int:
    """Closed walks up to l_max, counted per starting point, from traces of the 0/1 adjacency"""
    adjacency = (np.abs(graph.transition) > 0).astype(float)
    power = np.eye(graph.n_directed)
    total = 0.0
    for _ in range(l_max):
        power = power @ adjacency
        total += np.trace(power)
    return int(round(total))


def _failure_function(word: Sequence[int]) -> List[int]:
    fail = [0] * len(word)
    k = 0
    for i in range(1, len(word)):
        while k and word[i] != word[k]:
            k = fail[k - 1]
        if word[i] == word[k]:
            k += 1
        fail[i] = k
    return fail


def primitive_period(word: Sequence[int]) -> int:
    """Length of the shortest block whose repetition gives the word"""
    n = len(word)
    if n == 0:
        return 0
    period = n - _failure_function(word)[-1]
    return period if n % period == 0 else n


def canonical_rotation(word: Sequence[int]) -> Tuple[int, ...]:
    """Lexicographically smallest rotation, the orbit-class label"""
    word = tuple(word)
    return min(word[i:] + word[:i] for i in range(len(word))) if word else word


def walk_amplitude(transition: np.ndarray, word: Sequence[int]) -> complex:
    """Product of t_{I_j, I_j+1} around the cyclic word"""
    amplitude = 1.0 + 0.0j
    for i, current in enumerate(word):
        amplitude *= transition[current, word[(i + 1) % len(word)]]
    return complex(amplitude)


def _walks_from(digraph: nx.DiGraph, start: int, l_max: int,
                actions: np.ndarray) -> List[Tuple[Tuple[int, ...], complex, float]]:
    """Canonical closed walks whose smallest directed bond is ``start``"""
    found = []
    closing = digraph.get_edge_data

    def extend(path: List[int], amplitude: complex):
        last = path[-1]
        edge = closing(last, start)
        if edge is not None:
            word = tuple(path)
            if canonical_rotation(word) == word:
                found.append((word, amplitude * edge["amplitude"], float(np.sum(actions[list(word)]))))
        if len(path) == l_max:
            return
        for nxt, data in digraph[last].items():
            if nxt < start:
                continue
            running = amplitude * data["amplitude"]
            if running == 0:
                continue
            path.append(nxt)
            extend(path, running)
            path.pop()

    extend([start], 1.0 + 0.0j)
    return found


def enumerate_orbits(graph: Graph, l_max: int, max_orbits: int = DEFAULT_MAX_ORBITS,
                     threads: Optional[int] = None) -> OrbitCatalog:
    """Every orbit class of symbolic length <= l_max with nonzero amplitude.

    One canonical representative is stored per class together with its prime
    length l_P; trace sums weight each class by l_P, the number of distinct
    starting points.
    """
    if l_max < 1:
        raise InputError(f"l_max must be >= 1, got {l_max}", invariant="l_max >= 1")
    estimate = estimate_orbit_count(graph, l_max)
    if estimate > max_orbits:
        raise OrbitCapError(estimate, max_orbits)

    digraph = transition_digraph(graph)
    actions = graph.actions
    starts = list(range(graph.n_directed))
    workers = min(default_thread_count(threads), len(starts))
    partial: Dict[int, list] = {}

    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_start = {
            executor.submit(_walks_from, digraph, s, l_max, actions): s for s in starts
        }
        for future in as_completed(future_to_start):
            partial[future_to_start[future]] = future.result()

    orbits: Dict[int, List[Orbit]] = {}
    primes: List[PrimeOrbit] = []
    for s in starts:
        for word, amplitude, action in partial[s]:
            period = primitive_period(word)
            orbit = Orbit(word, amplitude, action, prime_length=period, repetitions=len(word) // period)
            orbits.setdefault(len(word), []).append(orbit)
            if orbit.repetitions == 1:
                primes.append(PrimeOrbit(word, amplitude, action))

    for l in orbits:
        orbits[l].sort(key=lambda o: o.word)
    primes.sort(key=lambda p: (p.length, p.word))

    catalog = OrbitCatalog(graph_hash=graph_hash(graph), l_max=l_max, S0=graph.S0, orbits=orbits, primes=primes)
    logger.info(
        f"Enumerated {sum(len(v) for v in orbits.values())} orbit classes "
        f"({len(primes)} prime) up to l = {l_max}"
    )
    return catalog


def prime_decompose(orbit: Orbit, graph: Graph) -> Tuple[PrimeOrbit, int]:
    """Split an orbit into its primitive word and repetition count nu"""
    period = primitive_period(orbit.word)
    nu = orbit.length // period
    word = canonical_rotation(orbit.word[:period])
    prime = PrimeOrbit(
        word=word,
        amplitude=walk_amplitude(graph.transition, word),
        action=orbit.action / nu,
    )
    return prime, nu


def orbit_sum(catalog: OrbitCatalog, l: int, k):
    """sum over classes of length l of l_P * A * exp(i L0 k)"""
    if l > catalog.l_max:
        raise InputError(f"catalog holds lengths up to {catalog.l_max}, asked for {l}")
    k_arr = np.asarray(k, dtype=float)
    entries = catalog.orbits.get(l, [])
    if not entries:
        values = np.zeros(k_arr.shape, dtype=complex)
    else:
        weights = np.array([o.multiplicity * o.amplitude for o in entries])
        actions = np.array([o.action for o in entries])
        values = np.exp(1j * np.multiply.outer(k_arr, actions)) @ weights
    return complex(values) if k_arr.ndim == 0 else values


def trace_power(graph: Graph, l: int, k: float, catalog: Optional[OrbitCatalog] = None) -> complex:
    """Tr S(k)^l from the dense matrix power, cross-checked against the orbit sum"""
    if l < 1:
        raise InputError(f"l must be >= 1, got {l}", invariant="l >= 1")
    matrix_value = complex(np.trace(np.linalg.matrix_power(s_matrix(graph, k), l)))
    if catalog is None or catalog.l_max < l:
        catalog = enumerate_orbits(graph, l)
    orbit_value = orbit_sum(catalog, l, k)
    if abs(matrix_value - orbit_value) > TRACE_TOLERANCE:
        raise ConsistencyError(
            f"Tr S^{l}({k}) = {matrix_value} but orbit sum gives {orbit_value}",
            invariant="orbit sum equals Tr S^l",
        )
    return matrix_value


def get_orbit_catalog(graph: Graph, l_max: int, cache=None, max_orbits: int = DEFAULT_MAX_ORBITS,
                      threads: Optional[int] = None) -> OrbitCatalog:
    """Catalog from the on-disk cache when present, else enumerated and stored"""
    key = graph_hash(graph)
    if cache is not None:
        cached = cache.load_catalog(key, l_max)
        if cached is not None:
            logger.info(f"Orbit catalog for {key[:12]} (l <= {l_max}) loaded from cache")
            return cached
    catalog = enumerate_orbits(graph, l_max, max_orbits=max_orbits, threads=threads)
    if cache is not None:
        cache.save_catalog(catalog)
    return catalog

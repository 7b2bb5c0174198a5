# ABOUTME: Builds scaling quantum graphs and their bond scattering matrix S(k)
# ABOUTME: Covers Kirchhoff, chain-reflection and explicit vertices plus taut-string ingestion

import hashlib
import json
import logging
import math
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from src.exceptions import GraphValidationError, InputError
from src.models import Bond, Graph, GraphSpec, ScatteringMode, UNITARITY_TOLERANCE, VertexScattering

logger = logging.getLogger(__name__)


def kirchhoff_block(betas: Sequence[float]) -> np.ndarray:
    """Current-conserving vertex block t = 2 sqrt(b_I b_J) / sum(b) - delta.

    Rows and columns follow the order of the incident bonds. The block is a
    Householder reflection, so it is real orthogonal for any positive betas;
    with equal betas it reduces to 2/v - delta.
    """
    b = np.asarray(betas, dtype=float)
    u = np.sqrt(b)
    return 2.0 * np.outer(u, u) / np.sum(b) - np.eye(len(b))


def chain_block(r: float) -> np.ndarray:
    """Degree-2 block [[r, t], [t, -r]] with t = sqrt(1 - r^2)"""
    t = math.sqrt(max(0.0, 1.0 - r * r))
    return np.array([[r, t], [t, -r]], dtype=float)


def _bond_ends(bonds: List[Bond], vertex: str) -> List[Tuple[int, int, int]]:
    """(bond, incoming directed index, outgoing directed index) for each bond end at vertex"""
    ends = []
    for b, bond in enumerate(bonds):
        if bond.start == vertex:
            ends.append((b, 2 * b + 1, 2 * b))
        if bond.end == vertex:
            ends.append((b, 2 * b, 2 * b + 1))
    return ends


def _vertex_block(spec: GraphSpec, vertex: str, ends: List[Tuple[int, int, int]]) -> np.ndarray:
    betas = [spec.bonds[b].beta for b, _, _ in ends]

    if vertex in spec.matrices:
        return spec.matrices[vertex]
    if vertex in spec.reflections:
        return chain_block(spec.reflections[vertex])
    if vertex in spec.dirichlet:
        return -np.eye(len(ends))
    if vertex in spec.neumann:
        return kirchhoff_block(betas)
    if spec.mode == ScatteringMode.CHAIN_REFLECTIONS and len(ends) == 1:
        # Open chain ends are hard walls
        return -np.eye(1)
    return kirchhoff_block(betas)


def build_graph(spec: GraphSpec) -> Graph:
    """Validate a spec and assemble the 2N_B x 2N_B amplitude matrix T"""
    errors = spec.validate()
    if errors:
        raise GraphValidationError(errors)

    n = 2 * len(spec.bonds)
    transition = np.zeros((n, n), dtype=complex)
    scattering = []

    for vertex in spec.vertices:
        ends = _bond_ends(spec.bonds, vertex)
        block = np.asarray(_vertex_block(spec, vertex, ends), dtype=complex)
        incoming = [e[1] for e in ends]
        outgoing = [e[2] for e in ends]
        transition[np.ix_(incoming, outgoing)] = block
        scattering.append(VertexScattering(vertex, incoming, outgoing, block))

    defect = float(np.max(np.abs(transition.conj().T @ transition - np.eye(n))))
    if defect > UNITARITY_TOLERANCE:
        raise GraphValidationError([f"assembled scattering matrix is not unitary (defect {defect:.2e})"])

    topology = nx.MultiGraph()
    topology.add_nodes_from(spec.vertices)
    topology.add_edges_from((b.start, b.end) for b in spec.bonds)
    if not nx.is_connected(topology):
        logger.warning(f"Graph has {nx.number_connected_components(topology)} connected components")

    graph = Graph(
        vertices=list(spec.vertices),
        bonds=list(spec.bonds),
        scattering=scattering,
        transition=transition,
        string_tension=spec.string_tension,
        string_mu0=spec.string_mu0,
    )
    logger.debug(f"Built graph: {len(graph.vertices)} vertices, {graph.n_bonds} bonds, S0={graph.S0:.12g}")
    return graph


def load_graph_file(path: str) -> Graph:
    """Read a YAML graph config and build it"""
    return build_graph(GraphSpec.from_yaml(path))


def s_matrix(graph: Graph, k: float) -> np.ndarray:
    """S_IJ(k) = t_IJ exp(i beta_I L_I k)"""
    if not k > 0:
        raise InputError(f"k <= 0: {k}", invariant="k > 0")
    return graph.transition * np.exp(1j * graph.actions * k)[:, None]


def unitarity_defect(graph: Graph, k: Optional[float] = None) -> float:
    """max-norm of S^dagger S - 1 (T itself when k is None)"""
    matrix = graph.transition if k is None else s_matrix(graph, k)
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(graph.n_directed))))


def graph_hash(graph: Graph) -> str:
    """Stable digest of bonds and amplitudes, used as the orbit-cache key"""
    payload = {
        "bonds": [[b.start, b.end, repr(float(b.length)), repr(float(b.lam))] for b in graph.bonds],
        "T": [[f"{z.real:.15e}", f"{z.imag:.15e}"] for z in graph.transition.ravel()],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def chain_graph(actions: Sequence[float], reflections: Sequence[float]) -> Graph:
    """Linear chain of unit-beta bonds with hard-wall ends and given interior reflections"""
    if len(reflections) != len(actions) - 1:
        raise InputError("a chain of N bonds needs N - 1 interior reflection coefficients")
    vertices = [f"v{i + 1}" for i in range(len(actions) + 1)]
    bonds = [Bond(vertices[i], vertices[i + 1], float(a), 0.0) for i, a in enumerate(actions)]
    spec = GraphSpec(
        vertices=vertices,
        bonds=bonds,
        mode=ScatteringMode.CHAIN_REFLECTIONS,
        reflections={vertices[i + 1]: float(r) for i, r in enumerate(reflections)},
    )
    return build_graph(spec)


def two_bond_graph(action1: float, action2: float, r: float) -> Graph:
    """Three-vertex chain whose spectral equation is sin(S0 k) - r sin(S1 k) = 0, S1 = action1 - action2"""
    return chain_graph([action1, action2], [r])


def four_vertex_chain_graph(actions: Sequence[float], r2: float, r3: float) -> Graph:
    """Three bonds between four vertices with reflections r2, r3 at the inner vertices"""
    if len(actions) != 3:
        raise InputError(f"four-vertex chain needs three bond actions, got {len(actions)}")
    return chain_graph(actions, [r2, r3])


def from_string_network(segments: Sequence[Tuple[float, float]], tension: float, mu0: float = 1.0) -> Graph:
    """Clamped string of piecewise-constant density as a scaling graph.

    Each segment (length, eps) becomes a bond with beta = sqrt(eps); ends are
    hard walls and interior joints are Kirchhoff vertices. Eigenvalues map to
    string frequencies through E = omega^2 mu0 / T (see ``string_frequency``).
    """
    errors = []
    if not tension > 0:
        errors.append(f"non-positive tension: {tension}")
    for i, (length, eps) in enumerate(segments):
        if not eps > 0:
            errors.append(f"non-positive density on segment {i}: {eps}")
    if not segments:
        errors.append("string network needs at least one segment")
    if errors:
        raise GraphValidationError(errors)

    vertices = [f"x{i}" for i in range(len(segments) + 1)]
    bonds = [
        Bond(vertices[i], vertices[i + 1], float(length), 1.0 - float(eps))
        for i, (length, eps) in enumerate(segments)
    ]
    spec = GraphSpec(
        vertices=vertices,
        bonds=bonds,
        mode=ScatteringMode.KIRCHHOFF,
        dirichlet=[vertices[0], vertices[-1]],
        string_tension=float(tension),
        string_mu0=float(mu0),
    )
    return build_graph(spec)


def string_frequency(graph: Graph, k):
    """Angular frequency omega for eigenvalue k of a string network"""
    if graph.string_tension is None:
        raise InputError("graph was not built from a string network")
    return np.asarray(k) * math.sqrt(graph.string_tension / graph.string_mu0)

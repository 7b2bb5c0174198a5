# ABOUTME: Data models for scaling quantum graphs, spectral determinants, orbits and results
# ABOUTME: Defines the dataclasses shared across modules plus AppConfig loaded from config.yaml

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.exceptions import InputError
from src.utils import read_yaml_file

SCHEMA_VERSION = 1
LIBRARY_VERSION = "0.1.0"

# Unitarity tolerance for user supplied vertex matrices
UNITARITY_TOLERANCE = 1e-10


class ScatteringMode(str, Enum):
    """How vertex scattering amplitudes are specified"""
    KIRCHHOFF = "kirchhoff"
    CHAIN_REFLECTIONS = "chain_reflections"
    EXPLICIT = "explicit"


class SolveMethod(str, Enum):
    """Root solving routes exposed by the CLI"""
    BOOTSTRAP = "bootstrap"
    ORACLE = "oracle"
    FIXED_POINT = "fixed-point"


class Ensemble(str, Enum):
    """Random-matrix reference ensembles"""
    GOE = "GOE"
    GUE = "GUE"


@dataclass(frozen=True)
class Bond:
    """Undirected bond carrying the scaling potential U = lambda * E"""
    start: str
    end: str
    length: float
    lam: float = 0.0

    @property
    def beta(self) -> float:
        return math.sqrt(1.0 - self.lam)

    @property
    def action(self) -> float:
        """Reduced action beta * L of one traversal"""
        return self.beta * self.length

    def validate(self) -> List[str]:
        """Validate bond parameters"""
        errors = []
        if not self.length > 0:
            errors.append(f"non-positive length on bond {self.start}-{self.end}: {self.length}")
        if not self.lam < 1:
            errors.append(f"lambda >= 1 on bond {self.start}-{self.end} (tunneling excluded): {self.lam}")
        if self.start == self.end:
            errors.append(f"self-loop at vertex {self.start}")
        return errors


@dataclass(frozen=True)
class DirectedBond:
    """One directed copy of a bond; index 2b runs start -> end, 2b + 1 runs back"""
    bond: int
    forward: bool = True

    @property
    def index(self) -> int:
        return 2 * self.bond + (0 if self.forward else 1)

    def reversed(self) -> 'DirectedBond':
        return DirectedBond(self.bond, not self.forward)

    @classmethod
    def from_index(cls, index: int) -> 'DirectedBond':
        return cls(index // 2, index % 2 == 0)


@dataclass(eq=False)
class VertexScattering:
    """Scattering block at one vertex: rows are incoming, columns outgoing directed bonds"""
    vertex: str
    incoming: List[int]
    outgoing: List[int]
    amplitudes: np.ndarray


def _parse_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InputError(f"complex entry must be [re, im], got {value!r}", invariant="schema violation in config")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


@dataclass
class GraphSpec:
    """Declarative graph description as read from a config file"""
    vertices: List[str]
    bonds: List[Bond]
    mode: ScatteringMode = ScatteringMode.KIRCHHOFF
    dirichlet: List[str] = field(default_factory=list)
    neumann: List[str] = field(default_factory=list)
    reflections: Dict[str, float] = field(default_factory=dict)
    matrices: Dict[str, np.ndarray] = field(default_factory=dict)
    string_tension: Optional[float] = None
    string_mu0: float = 1.0

    def degree(self, vertex: str) -> int:
        return sum((b.start == vertex) + (b.end == vertex) for b in self.bonds)

    def validate(self) -> List[str]:
        """Validate the graph description; an empty list means valid"""
        errors = []
        known = set(self.vertices)

        if len(known) != len(self.vertices):
            errors.append("duplicate vertex ids")
        if not self.bonds:
            errors.append("graph has no bonds")

        for bond in self.bonds:
            errors.extend(bond.validate())
            for end in (bond.start, bond.end):
                if end not in known:
                    errors.append(f"dangling bond {bond.start}-{bond.end}: unknown vertex {end}")

        for vertex in self.vertices:
            if self.degree(vertex) == 0:
                errors.append(f"isolated vertex {vertex}")

        for vertex, r in self.reflections.items():
            if vertex not in known:
                errors.append(f"reflection given for unknown vertex {vertex}")
            elif self.degree(vertex) != 2:
                errors.append(f"chain reflection at vertex {vertex} needs degree 2, has {self.degree(vertex)}")
            if not -1.0 <= r <= 1.0:
                errors.append(f"reflection coefficient at {vertex} outside [-1, 1]: {r}")

        for vertex, matrix in self.matrices.items():
            if vertex not in known:
                errors.append(f"scattering matrix given for unknown vertex {vertex}")
                continue
            d = self.degree(vertex)
            if matrix.shape != (d, d):
                errors.append(f"scattering matrix at {vertex} has shape {matrix.shape}, vertex degree is {d}")
                continue
            defect = np.max(np.abs(matrix.conj().T @ matrix - np.eye(d)))
            if defect > UNITARITY_TOLERANCE:
                errors.append(f"non-unitary user scattering matrix at vertex {vertex} (defect {defect:.2e})")

        if self.mode == ScatteringMode.EXPLICIT:
            missing = [v for v in self.vertices if v not in self.matrices]
            if missing:
                errors.append(f"explicit scattering mode without matrices for vertices {missing}")

        if self.string_tension is not None and not self.string_tension > 0:
            errors.append(f"non-positive tension: {self.string_tension}")

        return errors

    @classmethod
    def from_yaml(cls, path: str) -> 'GraphSpec':
        """Read a graph config file"""
        return cls.from_dict(read_yaml_file(path))

    @classmethod
    def from_dict(cls, data: dict) -> 'GraphSpec':
        """Create a spec from the parsed YAML grammar"""
        if not isinstance(data, dict):
            raise InputError("graph config must be a mapping", invariant="schema violation in config")
        try:
            bonds = [
                Bond(
                    start=str(b['from']),
                    end=str(b['to']),
                    length=float(b['length']),
                    lam=float(b.get('lambda', 0.0)),
                )
                for b in data.get('bonds', [])
            ]
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed bond entry: {e}", invariant="schema violation in config")

        vertices = [str(v) for v in data.get('vertices', [])]
        if not vertices:
            # Derive vertex order from bond endpoints
            for bond in bonds:
                for end in (bond.start, bond.end):
                    if end not in vertices:
                        vertices.append(end)

        scattering = data.get('scattering', {}) or {}
        try:
            mode = ScatteringMode(scattering.get('mode', ScatteringMode.KIRCHHOFF.value))
        except ValueError:
            raise InputError(
                f"unknown scattering mode {scattering.get('mode')!r}", invariant="schema violation in config"
            )

        matrices = {
            str(v): np.array([[_parse_complex(x) for x in row] for row in rows], dtype=complex)
            for v, rows in (scattering.get('matrices', {}) or {}).items()
        }
        string = data.get('string', {}) or {}

        return cls(
            vertices=vertices,
            bonds=bonds,
            mode=mode,
            dirichlet=[str(v) for v in scattering.get('dirichlet', []) or []],
            neumann=[str(v) for v in scattering.get('neumann', []) or []],
            reflections={str(v): float(r) for v, r in (scattering.get('reflections', {}) or {}).items()},
            matrices=matrices,
            string_tension=string.get('tension'),
            string_mu0=float(string.get('mu0', 1.0)),
        )


@dataclass(eq=False)
class Graph:
    """Validated scaling quantum graph with its assembled amplitude matrix T"""
    vertices: List[str]
    bonds: List[Bond]
    scattering: List[VertexScattering]
    transition: np.ndarray
    string_tension: Optional[float] = None
    string_mu0: float = 1.0

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def n_directed(self) -> int:
        return 2 * len(self.bonds)

    @property
    def actions(self) -> np.ndarray:
        """beta_I * L_I for every directed bond index I"""
        return np.repeat([b.action for b in self.bonds], 2)

    @property
    def S0(self) -> float:
        return 0.5 * float(np.sum(self.actions))

    def origin(self, index: int) -> str:
        bond = self.bonds[index // 2]
        return bond.start if index % 2 == 0 else bond.end

    def terminus(self, index: int) -> str:
        bond = self.bonds[index // 2]
        return bond.end if index % 2 == 0 else bond.start

    def directed_bonds(self) -> List[DirectedBond]:
        return [DirectedBond.from_index(i) for i in range(self.n_directed)]


@dataclass(eq=False)
class ExpPoly:
    """Exponential polynomial sum_j c_j exp(i S_j k) with strictly increasing frequencies"""
    coefficients: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        if self.coefficients.shape != self.frequencies.shape:
            raise InputError("coefficient and frequency counts differ")
        if np.any(np.diff(self.frequencies) <= 0):
            raise InputError("frequencies must be strictly increasing", invariant="frequencies strictly increasing")

    @property
    def n_terms(self) -> int:
        return len(self.frequencies)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "terms": [
                {"re": float(c.real), "im": float(c.imag), "S": float(s)}
                for c, s in zip(self.coefficients, self.frequencies)
            ],
        }


@dataclass(eq=False)
class TrigPoly:
    """Real reduced determinant at derivative level l:

    cos(S0 k - pi gamma0 + pi l/2) - sum_i a_i eps_i^l cos(S_i k - pi gamma_i + pi l/2)

    Amplitudes are stored at level 0; the level scaling is applied on read.
    ``norm`` relates the form to the complex determinant, Delta = norm * exp(i Theta0) * Delta_R.
    """
    S0: float
    gamma0: float
    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    frequencies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0))
    level: int = 0
    norm: float = 1.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float).reshape(-1)
        self.frequencies = np.asarray(self.frequencies, dtype=float).reshape(-1)
        self.phases = np.asarray(self.phases, dtype=float).reshape(-1)
        if not (len(self.amplitudes) == len(self.frequencies) == len(self.phases)):
            raise InputError("amplitude, frequency and phase counts differ")
        if not self.S0 > 0:
            raise InputError(f"S0 must be positive, got {self.S0}")
        if self.level < 0:
            raise InputError(f"level must be nonnegative, got {self.level}")
        if np.any(self.frequencies < 0) or np.any(self.frequencies >= self.S0):
            raise InputError(
                "every frequency must satisfy 0 <= S_i < S0",
                invariant="S_i < S0 for all i",
            )

    @property
    def n_terms(self) -> int:
        return len(self.amplitudes)

    @property
    def epsilons(self) -> np.ndarray:
        return self.frequencies / self.S0

    @property
    def level_amplitudes(self) -> np.ndarray:
        """a_i * eps_i^l"""
        return self.amplitudes * np.power(self.epsilons, self.level)

    @property
    def alpha(self) -> float:
        return float(np.sum(np.abs(self.level_amplitudes)))

    @property
    def effective_gamma(self) -> float:
        """Phase of the leading cosine at this level, cos(S0 k - pi * effective_gamma)"""
        return self.gamma0 - 0.5 * self.level

    @property
    def mean_spacing(self) -> float:
        return math.pi / self.S0

    def with_level(self, level: int) -> 'TrigPoly':
        return replace(self, level=level)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "S0": float(self.S0),
            "gamma0": float(self.gamma0),
            "level": int(self.level),
            "norm": float(self.norm),
            "terms": [
                {"a": float(a), "S": float(s), "gamma": float(g)}
                for a, s, g in zip(self.amplitudes, self.frequencies, self.phases)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'TrigPoly':
        """Create a TrigPoly from its JSON interchange form"""
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InputError(f"unsupported trigpoly schema_version {version}", invariant="schema violation in config")
        try:
            terms = data.get("terms", [])
            return cls(
                S0=float(data["S0"]),
                gamma0=float(data["gamma0"]),
                amplitudes=[float(t["a"]) for t in terms],
                frequencies=[float(t["S"]) for t in terms],
                phases=[float(t.get("gamma", 0.0)) for t in terms],
                level=int(data.get("level", 0)),
                norm=float(data.get("norm", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed trigpoly: {e}", invariant="schema violation in config")


@dataclass(eq=False)
class SeparatorLevel:
    """Labelled separators at one hierarchy level; cell n is (k_{n-1}, k_n)"""
    level: int
    indices: np.ndarray
    positions: np.ndarray
    mu: Optional[int] = None
    gamma: Optional[float] = None

    def __len__(self) -> int:
        return len(self.positions)

    def position(self, n: int) -> float:
        i = int(n) - int(self.indices[0])
        if i < 0 or i >= len(self.positions):
            raise InputError(
                f"separator {n} outside window [{self.indices[0]}, {self.indices[-1]}] at level {self.level}",
                invariant="separators for cell n available",
            )
        return float(self.positions[i])

    def cell(self, n: int) -> Tuple[float, float]:
        return self.position(n - 1), self.position(n)


@dataclass(eq=False)
class SeparatorHierarchy:
    """Separator levels from m down to 0 plus the level-0 roots they bracket"""
    m: int
    levels: List[SeparatorLevel]
    roots: np.ndarray
    indices: np.ndarray
    degenerate: np.ndarray

    def level(self, l: int) -> SeparatorLevel:
        for entry in self.levels:
            if entry.level == l:
                return entry
        raise InputError(f"hierarchy has no level {l}")

    def root(self, n: int) -> float:
        hits = np.nonzero(self.indices == n)[0]
        if len(hits) == 0:
            raise InputError(f"root {n} outside computed window")
        return float(self.roots[hits[0]])


@dataclass(frozen=True)
class Orbit:
    """Closed walk on directed bonds, stored as its canonical rotation"""
    word: Tuple[int, ...]
    amplitude: complex
    action: float
    prime_length: int = 0
    repetitions: int = 1

    @property
    def length(self) -> int:
        return len(self.word)

    @property
    def multiplicity(self) -> int:
        """Number of distinct starting points, l_P"""
        return self.prime_length or len(self.word)


@dataclass(frozen=True)
class PrimeOrbit:
    """Primitive closed walk; repetitions are rebuilt with ``repeat``"""
    word: Tuple[int, ...]
    amplitude: complex
    action: float

    @property
    def length(self) -> int:
        return len(self.word)

    def repeat(self, nu: int) -> Orbit:
        return Orbit(
            word=self.word * nu,
            amplitude=self.amplitude ** nu,
            action=self.action * nu,
            prime_length=len(self.word),
            repetitions=nu,
        )


@dataclass(eq=False)
class OrbitCatalog:
    """Orbit classes grouped by symbolic length up to l_max"""
    graph_hash: str
    l_max: int
    S0: float
    orbits: Dict[int, List[Orbit]] = field(default_factory=dict)
    primes: List[PrimeOrbit] = field(default_factory=list)

    def count(self, l: int) -> int:
        """Number of orbit classes of symbolic length l"""
        return len(self.orbits.get(l, []))

    def walk_count(self, l: int) -> int:
        """Number of closed walks counted per starting point"""
        return sum(o.multiplicity for o in self.orbits.get(l, []))

    def truncated(self, l_max: int) -> 'OrbitCatalog':
        return OrbitCatalog(
            graph_hash=self.graph_hash,
            l_max=l_max,
            S0=self.S0,
            orbits={l: list(v) for l, v in self.orbits.items() if l <= l_max},
            primes=[p for p in self.primes if p.length <= l_max],
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "graph_hash": self.graph_hash,
            "l_max": self.l_max,
            "S0": self.S0,
            "orbits": [
                [list(o.word), o.amplitude.real, o.amplitude.imag, o.action, o.prime_length, o.repetitions]
                for l in sorted(self.orbits)
                for o in self.orbits[l]
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'OrbitCatalog':
        orbits: Dict[int, List[Orbit]] = {}
        primes = []
        for word, re, im, action, l_p, nu in data["orbits"]:
            orbit = Orbit(tuple(word), complex(re, im), float(action), int(l_p), int(nu))
            orbits.setdefault(orbit.length, []).append(orbit)
            if orbit.repetitions == 1:
                primes.append(PrimeOrbit(orbit.word, orbit.amplitude, orbit.action))
        return cls(
            graph_hash=data["graph_hash"],
            l_max=int(data["l_max"]),
            S0=float(data["S0"]),
            orbits=orbits,
            primes=primes,
        )


@dataclass
class StaircaseEval:
    """Spectral staircase value with its Weyl average and eigenphases"""
    k: float
    N: float
    Nbar: float
    eigenphases: np.ndarray


@dataclass
class ExpansionResult:
    """Truncated expansion estimate with the full partial-sum trace"""
    n: int
    estimate: float
    l_max: int
    partial_sums: List[float]
    reference: Optional[float] = None
    formula: str = "orbit"

    @property
    def errors(self) -> List[float]:
        if self.reference is None:
            return []
        return [abs(p - self.reference) for p in self.partial_sums]

    @property
    def error(self) -> Optional[float]:
        if self.reference is None:
            return None
        return abs(self.estimate - self.reference)


@dataclass
class LagrangeProblem:
    """Root of x = a + w * phi(x) near the anchor a"""
    a: float
    w: float
    phi: Callable[[np.ndarray], np.ndarray]
    order: int
    series: Optional[Callable[[int], np.ndarray]] = None  # Taylor coefficients of phi(a + h)
    radius: float = math.pi / 2


@dataclass
class SpacingSample:
    """Nearest-neighbour spacings with histogram; ``unit`` is the divisor applied to raw spacings"""
    roots: np.ndarray
    spacings: np.ndarray
    mode: str
    s_min: float
    s_max: float
    unit: float = 1.0
    degenerate_count: int = 0
    hist_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    hist_density: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hist_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class SpacingBoundReport:
    """Outcome of the s_max <= pi (m + 2) / S0 check"""
    passed: bool
    m: int
    s_max: float
    d_max: float
    margin: float
    mass_above_bound: int = 0


@dataclass(eq=False)
class RegimeDiagram:
    """Irregularity degree on a two-parameter grid"""
    family: str
    p1_values: np.ndarray
    p2_values: np.ndarray
    m_values: np.ndarray
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def max_m(self) -> int:
        return int(np.max(self.m_values))

    def to_records(self) -> List[dict]:
        return [
            {"r2": float(p1), "r3": float(p2), "m": int(self.m_values[i, j])}
            for i, p1 in enumerate(self.p1_values)
            for j, p2 in enumerate(self.p2_values)
        ]


@dataclass
class SweepPoint:
    """One point of a diagonal r2 = r3 = r sweep"""
    r: float
    m: int
    n_roots: int
    s_min: float
    s_max: float
    d_max: float
    margin: float
    degenerate: int = 0


@dataclass(eq=False)
class SpectrumResult:
    """Indexed eigenvalues with per-root metadata"""
    indices: np.ndarray
    roots: np.ndarray
    method: str
    level_m: int
    residuals: np.ndarray
    degenerate: np.ndarray

    @property
    def energies(self) -> np.ndarray:
        return self.roots ** 2

    def to_records(self) -> List[dict]:
        return [
            {
                "n": int(n),
                "k_n": float(k),
                "E_n": float(k * k),
                "method": self.method,
                "level_m": int(self.level_m),
                "residual": float(res),
                "degenerate_flag": bool(deg),
            }
            for n, k, res, deg in zip(self.indices, self.roots, self.residuals, self.degenerate)
        ]


@dataclass
class RunManifest:
    """Provenance record written beside every CLI output"""
    command: str
    inputs: Dict[str, str] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    version: str = LIBRARY_VERSION
    wall_time: float = 0.0
    outputs: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "inputs": self.inputs,
            "parameters": self.parameters,
            "version": self.version,
            "wall_time": round(self.wall_time, 6),
            "outputs": self.outputs,
        }


@dataclass
class AppConfig:
    """Application configuration settings"""
    # Determinant expansion
    expansion_cap: int = 16
    merge_tolerance: float = 1e-9
    drop_tolerance: float = 1e-12

    # Root solving
    degeneracy_tolerance: float = 1e-11
    oracle_samples: int = 1000
    mu_scan_spacings: int = 3

    # Orbits
    max_orbits: int = 10_000_000
    cache_enabled: bool = True
    cache_dir: Optional[str] = None

    # Statistics
    histogram_bins: int = 100
    spacing_roots: int = 10_000
    diagonal_step: float = 0.02

    # Runtime
    threads: Optional[int] = None
    log_level: str = "INFO"

    @classmethod
    def from_yaml(cls, data: dict) -> 'AppConfig':
        """Create config from YAML data"""
        config = cls()
        data = data or {}

        if 'detpoly' in data:
            config.expansion_cap = int(data['detpoly'].get('expansion_cap', config.expansion_cap))
            config.merge_tolerance = float(data['detpoly'].get('merge_tolerance', config.merge_tolerance))
            config.drop_tolerance = float(data['detpoly'].get('drop_tolerance', config.drop_tolerance))

        if 'bootstrap' in data:
            config.degeneracy_tolerance = float(
                data['bootstrap'].get('degeneracy_tolerance', config.degeneracy_tolerance)
            )
            config.oracle_samples = int(data['bootstrap'].get('oracle_samples', config.oracle_samples))
            config.mu_scan_spacings = int(data['bootstrap'].get('mu_scan_spacings', config.mu_scan_spacings))

        if 'orbits' in data:
            config.max_orbits = int(data['orbits'].get('max_orbits', config.max_orbits))
            config.cache_enabled = bool(data['orbits'].get('cache_enabled', config.cache_enabled))
            config.cache_dir = data['orbits'].get('cache_dir', config.cache_dir)

        if 'stats' in data:
            config.histogram_bins = int(data['stats'].get('histogram_bins', config.histogram_bins))
            config.spacing_roots = int(data['stats'].get('spacing_roots', config.spacing_roots))
            config.diagonal_step = float(data['stats'].get('diagonal_step', config.diagonal_step))

        if 'runtime' in data:
            config.threads = data['runtime'].get('threads', config.threads)
            config.log_level = str(data['runtime'].get('log_level', config.log_level))

        return config

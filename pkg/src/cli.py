# ABOUTME: Command-line front end for graph ingestion, root solving, expansions and statistics
# ABOUTME: Writes CSV/JSON results plus a run manifest and maps library errors to exit codes

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.bootstrap import ZERO_CUTOFF, cell_property_check, compute_spectrum, oracle_scan, random_regular_poly
from src.detpoly import classify, expand_determinant, to_real_form
from src.exceptions import InputError, SpectraError
from src.graph_core import load_graph_file
from src.lagrange import two_bond_root
from src.models import AppConfig, Graph, LIBRARY_VERSION, RunManifest, SolveMethod, TrigPoly
from src.orbit_cache import CACHE_FILE, OrbitCatalogCache
from src.orbits import get_orbit_catalog
from src.performance_tracker import performance_tracker
from src.spectral_formulas import (
    level0_separators,
    regular_energy_expansion,
    root_by_orbit_expansion,
    root_by_prime_expansion,
    root_by_staircase_integral,
    spectral_offset,
)
from src.stats import (
    CORNER_DEPTH, FourVertexChainFamily, diagonal_r_values, diagonal_sweep, regime_diagram, spacing_bound_check,
    spacing_sample_for,
)
from src.utils import (
    default_thread_count,
    file_digest,
    parse_float_list,
    parse_index_range,
    read_json_file,
    read_yaml_file,
    resolve_cache_dir,
    write_csv,
    write_json_file,
)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = "config.yaml"
LOG_LEVEL_ENV = "QGSPECTRA_LOG_LEVEL"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FORMULAS = ("staircase", "orbit", "prime", "energy")


def load_config(path: Optional[str]) -> AppConfig:
    """Explicit --config must exist; the default file is optional"""
    if path:
        return AppConfig.from_yaml(read_yaml_file(path))
    if Path(DEFAULT_CONFIG).is_file():
        return AppConfig.from_yaml(read_yaml_file(DEFAULT_CONFIG))
    return AppConfig()


def configure_logging(config: AppConfig, verbose: bool):
    level = "DEBUG" if verbose else os.getenv(LOG_LEVEL_ENV, config.log_level)
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT,
                        stream=sys.stderr, force=True)


class RunContext:
    """Parsed arguments, configuration and the manifest being filled in"""

    def __init__(self, args: argparse.Namespace, config: AppConfig):
        self.args = args
        self.config = config
        self.threads = default_thread_count(args.threads or config.threads)
        self.manifest = RunManifest(command=args.command, version=LIBRARY_VERSION)
        self._graph: Optional[Graph] = None

    def record_input(self, path: str):
        self.manifest.inputs[path] = file_digest(path)

    def graph(self) -> Graph:
        if self._graph is None:
            if not getattr(self.args, 'graph', None):
                raise InputError("--graph is required for this command", invariant="missing file")
            self._graph = load_graph_file(self.args.graph)
            self.record_input(self.args.graph)
            logger.info(f"Loaded graph {self.args.graph}: {self._graph.n_bonds} bonds, S0={self._graph.S0:.12g}")
        return self._graph

    def trigpoly(self) -> TrigPoly:
        if getattr(self.args, 'trigpoly', None):
            p = TrigPoly.from_dict(read_json_file(self.args.trigpoly))
            self.record_input(self.args.trigpoly)
        elif getattr(self.args, 'graph', None):
            expansion = expand_determinant(self.graph(), cap=self.config.expansion_cap,
                                           merge_tolerance=self.config.merge_tolerance)
            p = to_real_form(expansion, self.graph(), drop_tolerance=self.config.drop_tolerance)
        else:
            raise InputError("one of --graph or --trigpoly is required", invariant="missing file")
        dump = getattr(self.args, 'dump_trigpoly', None)
        if dump:
            write_json_file(dump, p.to_dict())
            self.manifest.outputs[dump] = file_digest(dump)
        return p

    def orbit_cache(self) -> Optional[OrbitCatalogCache]:
        if not self.config.cache_enabled:
            return None
        return OrbitCatalogCache(str(resolve_cache_dir(self.config.cache_dir) / CACHE_FILE))

    def emit(self, frame: pd.DataFrame, out: Optional[str] = None):
        """CSV to --out (or stdout); the manifest is written when the run finishes"""
        out = out or self.args.out
        if out:
            write_csv(frame, out)
            self.manifest.outputs[out] = file_digest(out)
            logger.info(f"Wrote {len(frame)} rows to {out}")
        else:
            frame.to_csv(sys.stdout, index=False, float_format="%.17g")


def cmd_solve(ctx: RunContext) -> int:
    p = ctx.trigpoly()
    n_range = parse_index_range(ctx.args.n)
    result = compute_spectrum(p, n_range, method=ctx.args.method, samples=ctx.config.oracle_samples,
                              degeneracy_tolerance=ctx.config.degeneracy_tolerance)
    ctx.emit(pd.DataFrame(result.to_records()))
    return 0


def cmd_classify(ctx: RunContext) -> int:
    summary = classify(ctx.trigpoly())
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_oracle(ctx: RunContext) -> int:
    p = ctx.trigpoly()
    samples = ctx.args.samples or ctx.config.oracle_samples
    roots = oracle_scan(p, 0.0, ctx.args.k_max, samples)
    roots = roots[roots > ZERO_CUTOFF * p.mean_spacing]
    ctx.emit(pd.DataFrame({"n": np.arange(1, len(roots) + 1), "k_n": roots}))
    return 0


def cmd_expand(ctx: RunContext) -> int:
    graph = ctx.graph()
    p = ctx.trigpoly()
    a, b = parse_index_range(ctx.args.n)
    formula = ctx.args.formula
    reference = compute_spectrum(p, (a, b), method=SolveMethod.BOOTSTRAP.value,
                                 degeneracy_tolerance=ctx.config.degeneracy_tolerance)
    ref_by_n = dict(zip(reference.indices.tolist(), reference.roots.tolist()))
    offset = spectral_offset(graph)
    rows: List[Dict] = []

    if formula == "staircase":
        separators = level0_separators(graph, (a, b), p)
        for n in range(a, b + 1):
            estimate = root_by_staircase_integral(graph, n, separators, offset=offset)
            rows.append({"n": n, "formula": formula, "l_max": 0, "estimate": estimate,
                         "reference": ref_by_n[n], "error": abs(estimate - ref_by_n[n])})
    else:
        catalog = get_orbit_catalog(graph, ctx.args.lmax, cache=ctx.orbit_cache(),
                                    max_orbits=ctx.config.max_orbits, threads=ctx.threads)
        for n in range(a, b + 1):
            if formula == "energy":
                result = regular_energy_expansion(graph, n, ctx.args.lmax, catalog, reference=ref_by_n[n] ** 2)
            elif formula == "prime":
                result = root_by_prime_expansion(graph, n, ctx.args.lmax, catalog, reference=ref_by_n[n], offset=offset)
            else:
                result = root_by_orbit_expansion(graph, n, ctx.args.lmax, catalog, reference=ref_by_n[n], offset=offset)
            row = {"n": n, "formula": formula, "l_max": result.l_max, "estimate": result.estimate,
                   "reference": result.reference, "error": result.error}
            row.update({f"partial_l{l}": v for l, v in enumerate(result.partial_sums, start=1)})
            rows.append(row)

    ctx.emit(pd.DataFrame(rows))
    return 0


def cmd_lagrange(ctx: RunContext) -> int:
    a, b = parse_index_range(ctx.args.n)
    rows = []
    for n in range(a, b + 1):
        x = two_bond_root(ctx.args.s0, ctx.args.s1, ctx.args.r, n, ctx.args.order)
        rows.append({"n": n, "x_n": x, "k_n": x / ctx.args.s0, "order": ctx.args.order})
    ctx.emit(pd.DataFrame(rows))
    return 0


def cmd_orbits(ctx: RunContext) -> int:
    graph = ctx.graph()
    catalog = get_orbit_catalog(graph, ctx.args.lmax, cache=ctx.orbit_cache(),
                                max_orbits=ctx.config.max_orbits, threads=ctx.threads)
    rows = [
        {
            "canonical_word": "-".join(str(i) for i in orbit.word),
            "l": orbit.length,
            "l_P": orbit.prime_length,
            "nu": orbit.repetitions,
            "Re(A)": orbit.amplitude.real,
            "Im(A)": orbit.amplitude.imag,
            "L0": orbit.action,
        }
        for l in sorted(catalog.orbits)
        for orbit in catalog.orbits[l]
    ]
    columns = ["canonical_word", "l", "l_P", "nu", "Re(A)", "Im(A)", "L0"]
    ctx.emit(pd.DataFrame(rows, columns=columns))
    return 0


def cmd_stats(ctx: RunContext) -> int:
    p = ctx.trigpoly()
    n_roots = ctx.args.roots or ctx.config.spacing_roots
    sample, m = spacing_sample_for(p, n_roots, bins=ctx.config.histogram_bins,
                                   degeneracy_tolerance=ctx.config.degeneracy_tolerance)
    report = spacing_bound_check(sample, m, p.S0)

    ctx.emit(pd.DataFrame({
        "n": np.arange(2, len(sample.roots) + 1),
        "k_n": sample.roots[1:],
        "s_n": sample.spacings,
    }))
    if ctx.args.out:
        histogram = pd.DataFrame({
            "bin_lo": sample.hist_edges[:-1],
            "bin_hi": sample.hist_edges[1:],
            "count": sample.hist_counts,
            "density": sample.hist_density,
        })
        ctx.emit(histogram, str(Path(ctx.args.out).with_suffix(".histogram.csv")))
    # stdout carries the CSV when there is no --out
    print(json.dumps(asdict(report), indent=2, sort_keys=True), file=sys.stdout if ctx.args.out else sys.stderr)
    return 0


def cmd_diagram(ctx: RunContext) -> int:
    if ctx.args.family != FourVertexChainFamily.name:
        raise InputError(f"unknown family {ctx.args.family!r}")
    family = FourVertexChainFamily(parse_float_list(ctx.args.actions, expected=3))
    diagram = regime_diagram(family, grid=ctx.args.grid, threads=ctx.threads)
    ctx.emit(pd.DataFrame(diagram.to_records()))
    return 0


def cmd_sweep(ctx: RunContext) -> int:
    family = FourVertexChainFamily(parse_float_list(ctx.args.actions, expected=3))
    step = ctx.args.step or ctx.config.diagonal_step
    r_values = diagonal_r_values(step, corner_depth=ctx.args.corner_depth)
    points = diagonal_sweep(family, r_values, n_roots=ctx.args.roots or ctx.config.spacing_roots,
                            threads=ctx.threads)
    ctx.emit(pd.DataFrame([asdict(point) for point in points]))
    return 0


def cmd_selftest(ctx: RunContext) -> int:
    rng = np.random.default_rng(ctx.args.seed)
    cells = ctx.args.cells
    miscounted, worst = 0, 0.0
    for _ in range(ctx.args.polys):
        bad, deviation = cell_property_check(random_regular_poly(rng), cells)
        miscounted += bad
        worst = max(worst, deviation)
    passed = miscounted == 0 and worst < 1e-12
    summary = {"seed": ctx.args.seed, "polys": ctx.args.polys, "cells": cells,
               "miscounted_cells": miscounted, "max_fixed_point_deviation": worst, "passed": passed}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if passed else 1


COMMANDS: Dict[str, Callable[[RunContext], int]] = {
    "solve": cmd_solve,
    "expand": cmd_expand,
    "lagrange": cmd_lagrange,
    "orbits": cmd_orbits,
    "stats": cmd_stats,
    "diagram": cmd_diagram,
    "classify": cmd_classify,
    "oracle": cmd_oracle,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='Path to config file (default: ./config.yaml if present)')
    common.add_argument('--threads', type=int, default=None, help='Worker cap (default: logical CPU count)')
    common.add_argument('--seed', type=int, default=0, help='Seed for randomised drivers')
    common.add_argument('--verbose', action='store_true', help='Debug logging')
    common.add_argument('--out', type=str, default=None, help='Output CSV (default: stdout)')

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument('--graph', type=str, help='Graph YAML file')
    source.add_argument('--trigpoly', type=str, help='TrigPoly JSON file')
    source.add_argument('--dump-trigpoly', type=str, default=None, help='Write the reduced form as JSON')

    parser = argparse.ArgumentParser(prog='qgspectra', description='Spectra of scaling quantum graphs')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', parents=[common, source], help='Roots k_a..k_b')
    solve.add_argument('--n', required=True, help='Index range a..b')
    solve.add_argument('--method', choices=[m.value for m in SolveMethod], default=SolveMethod.BOOTSTRAP.value)

    sub.add_parser('classify', parents=[common, source], help='Print S0, gamma0, N_Gamma, alpha, m, m_bound')

    oracle = sub.add_parser('oracle', parents=[common, source], help='Dense-scan roots on (0, k_max]')
    oracle.add_argument('--k-max', type=float, required=True)
    oracle.add_argument('--samples', type=int, default=None, help='Samples per mean spacing')

    expand = sub.add_parser('expand', parents=[common, source], help='Explicit root formulas')
    expand.add_argument('--n', required=True, help='Index range a..b')
    expand.add_argument('--lmax', type=int, default=12)
    expand.add_argument('--formula', choices=FORMULAS, default='orbit')

    lagrange = sub.add_parser('lagrange', parents=[common], help='Two-bond roots by Lagrange inversion')
    lagrange.add_argument('--s0', type=float, required=True)
    lagrange.add_argument('--s1', type=float, required=True)
    lagrange.add_argument('--r', type=float, required=True)
    lagrange.add_argument('--n', required=True, help='Index range a..b')
    lagrange.add_argument('--order', type=int, default=2)

    orbits = sub.add_parser('orbits', parents=[common, source], help='Periodic orbit catalog')
    orbits.add_argument('--lmax', type=int, required=True)

    stats = sub.add_parser('stats', parents=[common, source], help='Nearest-neighbour spacings')
    stats.add_argument('--roots', type=int, default=None)

    diagram = sub.add_parser('diagram', parents=[common], help='Irregularity regime diagram')
    diagram.add_argument('--family', default=FourVertexChainFamily.name)
    diagram.add_argument('--actions', required=True, help='Comma separated bond actions')
    diagram.add_argument('--grid', type=int, default=64)

    sweep = sub.add_parser('sweep', parents=[common], help='Spacing extremes along r2 = r3')
    sweep.add_argument('--actions', required=True, help='Comma separated bond actions')
    sweep.add_argument('--step', type=float, default=None)
    sweep.add_argument('--roots', type=int, default=None)
    sweep.add_argument('--corner-depth', type=int, default=CORNER_DEPTH, help='Add r = 1 - 10^-j for j up to this depth')

    selftest = sub.add_parser('selftest', parents=[common], help='Randomised one-root-per-cell check')
    selftest.add_argument('--polys', type=int, default=20)
    selftest.add_argument('--cells', type=int, default=200)

    return parser


def dispatch(argv: List[str]) -> int:
    """Run one subcommand; 0 on success, 2 on invalid input, 1 on unexpected failure"""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = load_config(args.config)
    except SpectraError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    configure_logging(config, args.verbose)

    ctx = RunContext(args, config)
    ctx.manifest.parameters = {k: v for k, v in sorted(vars(args).items()) if k not in ('command', 'verbose')}
    started = time.perf_counter()
    try:
        with performance_tracker.track_operation(args.command):
            code = COMMANDS[args.command](ctx)
    except SpectraError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e} (violated: {e.invariant})", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}: {e}")
        return 1

    ctx.manifest.wall_time = time.perf_counter() - started
    if args.out:
        write_json_file(f"{args.out}.manifest.json", ctx.manifest.to_dict())
    return code


def main():
    sys.exit(dispatch(sys.argv[1:]))

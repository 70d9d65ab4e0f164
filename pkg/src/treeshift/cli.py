"""Command-line entry point.

stdout carries data (JSON; CSV goes to files), stderr carries logs.  Exit
codes: 2 parse error, 3 validation error, 4 numeric failure, 5 resource
guard.  Every JSON artifact embeds a run manifest (command, input hash,
configuration, version, wall time).
"""
from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import dataclass, asdict

import click
import numpy as np

from . import __version__
from .alphabet_graph import (
    A1Violated,
    find_a0_and_period,
    is_irreducible,
    load_model,
    reachability,
    reduce_a0,
)
from .dimension import (
    general_upper_bound,
    hausdorff_dimension,
    optimal_markov_measure,
)
from .errors import (
    ModelParseError,
    ModelValidationError,
    NoConvergence,
    Overflow,
    SearchFailed,
    TooLarge,
    TreeShiftError,
    ValidationFailed,
)
from .oracle import enumerate_type_classes, exact_mean_distribution
from .rate_function import (
    domain_endpoints,
    lln_beta_bounds,
    lln_limit,
    parse_weighted,
    rate_curve,
)
from .stochastic import SampleConfig, lln_experiment
from .transfer_op import entropy_iterate

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4
EXIT_RESOURCE = 5


@dataclass
class RunManifest:
    command: str
    input_sha256: str
    config: dict
    tool_version: str
    wall_time_s: float


def _hash_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _emit(payload: dict, command: str, path: str, config: dict, started: float) -> None:
    payload["manifest"] = asdict(
        RunManifest(
            command=command,
            input_sha256=_hash_file(path),
            config=config,
            tool_version=__version__,
            wall_time_s=round(time.perf_counter() - started, 6),
        )
    )
    json.dump(_sanitize(payload), sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")


def _sanitize(obj):
    """Strict-JSON form: arrays to lists, non-finite floats to sentinels."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def _load_reduced(path):
    model = load_model(path)
    reduced = reduce_a0(model)
    return model, reduced


def _read_raw(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _run(fn):
    """Translate package errors into the uniform exit-code map."""
    try:
        fn()
    except ModelParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_PARSE)
    except (ModelValidationError, A1Violated) as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (NoConvergence, SearchFailed, ValidationFailed) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    except (TooLarge, Overflow, MemoryError) as exc:
        click.echo(f"resource guard: {exc}", err=True)
        sys.exit(EXIT_RESOURCE)
    except TreeShiftError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


@click.group()
@click.version_option(__version__)
def main():
    """Analyze Markov chains indexed by rooted d-trees."""


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
def analyze(model_file):
    """Structure report: reductions, a0, period, classes, reachability."""
    started = time.perf_counter()

    def go():
        model, reduced = _load_reduced(model_file)
        payload = {
            "symbols": list(reduced.symbols),
            "d": reduced.arity,
            "a0_reduction_removed": sorted(set(model.symbols) - set(reduced.symbols)),
            "a0_holds": reduced.satisfies_a0(),
        }
        rep = reachability(reduced)
        payload["recurrent"] = sorted(rep.recurrent)
        payload["closures"] = {
            reduced.symbols[a]: sorted(reduced.symbols[b] for b in rep.closures[a])
            for a in range(reduced.n_symbols)
        }
        payload["scc_list"] = [sorted(c) for c in rep.scc_list]
        payload["irreducible"] = is_irreducible(reduced)
        try:
            period = find_a0_and_period(reduced)
            payload["a1_holds"] = True
            payload["a0_symbol"] = reduced.symbols[period.a0]
            payload["period"] = period.period
            payload["classes"] = [
                sorted(reduced.symbols[a] for a in cls) for cls in period.classes
            ]
        except A1Violated as exc:
            payload["a1_holds"] = False
            payload["a1_violation"] = str(exc)
        _emit(payload, "analyze", model_file, {}, started)

    _run(go)


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--eigen-tol", default=1e-11, show_default=True,
              help="Collatz-Wielandt bracket width for eigenpairs.")
@click.option("--grid-denom", default=None, type=int,
              help="Simplex grid denominator (default 50 for p<=3, 12 for p<=5).")
@click.option("--entropy-n", default=40, show_default=True,
              help="Depth for the topological-entropy recursion.")
@click.option("--threads", default=1, show_default=True,
              help="Workers for the grid scan; output independent of the count.")
@click.option("--scan-csv", type=click.Path(), default=None,
              help="Also write the objective over the coarse s-grid to this CSV.")
def dimension(model_file, eigen_tol, grid_denom, entropy_n, threads, scan_csv):
    """Hausdorff dimension (exact when irreducible, upper bound otherwise)."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        if is_irreducible(reduced):
            report = hausdorff_dimension(
                reduced, eigen_tol=eigen_tol, grid_denom=grid_denom,
                entropy_n=entropy_n, threads=threads,
            )
        else:
            report = general_upper_bound(
                reduced, eigen_tol=eigen_tol, grid_denom=grid_denom, entropy_n=entropy_n
            )
        if scan_csv and report.period > 1:
            _write_scan_csv(scan_csv, reduced, report, eigen_tol, grid_denom)
        col_sums = reduced.adjacency.sum(axis=0)
        payload = {
            "dim": report.dim,
            "argmin_s": report.argmin_s,
            "argmin_r": report.argmin_r,
            "class_values": list(report.class_values),
            "h_top": report.h_top,
            "log_rho_linear": report.log_rho_linear,
            "method": report.method,
            "iterations": report.iterations,
            "a0": report.a0,
            "period": report.period,
            "spectral_equality_predicate": bool((col_sums == col_sums[0]).all()),
        }
        _emit(payload, "dimension", model_file,
              {"eigen_tol": eigen_tol, "grid_denom": grid_denom,
               "entropy_n": entropy_n, "threads": threads},
              started)

    _run(go)


def _write_scan_csv(path, model, report, eigen_tol, grid_denom):
    from .dimension import _grid_denominator, _simplex_grid, dim_objective

    period = find_a0_and_period(model)
    denom = grid_denom if grid_denom is not None else _grid_denominator(period.period)
    with open(path, "w") as fh:
        header = ",".join(f"s{i}" for i in range(period.period))
        fh.write(f"{header},objective\n")
        for s in _simplex_grid(period.period, denom):
            val = dim_objective(model, period, s, 0, eigen_tol=eigen_tol)
            fh.write(",".join(repr(float(x)) for x in s) + f",{val!r}\n")


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--class-index", "-j", default=0, show_default=True)
@click.option("--grid-points", default=200, show_default=True)
@click.option("--pressure-tol", default=1e-10, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), required=True,
              help="Destination for the alpha,rate,argmax_mu,finite table.")
def rate(model_file, class_index, grid_points, pressure_tol, csv_path):
    """Sanov rate curve for conditional sample means (CSV + JSON summary)."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        chain, _ = parse_weighted(_read_raw(model_file), reduced)
        curve = rate_curve(
            chain, class_index, n_points=grid_points, pressure_tol=pressure_tol
        )
        with open(csv_path, "w") as fh:
            curve.to_csv(fh)
        payload = dict(curve.summary())
        payload["csv"] = csv_path
        _emit(payload, "rate", model_file,
              {"class": class_index, "grid_points": grid_points,
               "pressure_tol": pressure_tol}, started)

    _run(go)


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
def lln(model_file):
    """Almost-sure phase limits of the sample mean, and expectation bounds."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        chain, pi = parse_weighted(_read_raw(model_file), reduced)
        period = find_a0_and_period(reduced)
        phases = [lln_limit(chain, j, period) for j in range(period.period)]
        a1, a2 = domain_endpoints(chain, 0, period)
        payload = {
            "period": period.period,
            "alpha_star": phases,
            "alpha1": a1,
            "alpha2": a2,
        }
        if pi is not None:
            lo, hi = lln_beta_bounds(chain, pi, period)
            payload["beta_minus"] = lo
            payload["beta_plus"] = hi
        _emit(payload, "lln", model_file, {}, started)

    _run(go)


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--trials", default=50, show_default=True)
@click.option("--depth", default=12, show_default=True)
@click.option("--root", default=None, type=int,
              help="Root symbol index (default: the distinguished symbol a0).")
@click.option("--threads", default=1, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Optional per-trial CSV output.")
def simulate(model_file, seed, trials, depth, root, threads, csv_path):
    """Monte-Carlo sample-mean experiment against the phase limits."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        chain, _ = parse_weighted(_read_raw(model_file), reduced)
        period = find_a0_and_period(reduced)
        root_sym = period.a0 if root is None else root
        config = SampleConfig(depth=depth, trials=trials, seed=seed, root=root_sym)
        report = lln_experiment(chain, config, period, threads=threads)
        if csv_path:
            with open(csv_path, "w") as fh:
                fh.write("trial,sample_mean\n")
                for t, m in enumerate(report.trial_means):
                    fh.write(f"{t},{m!r}\n")
        payload = {
            "empirical_mean": report.empirical_mean,
            "stderr": report.stderr,
            "generator": report.generator,
            "seed": report.seed,
            "passed": report.passed,
            "phase_checks": [asdict(c) for c in report.phase_checks],
        }
        _emit(payload, "simulate", model_file,
              {"seed": seed, "trials": trials, "depth": depth,
               "root": root_sym, "threads": threads}, started)

    _run(go)


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--n", "depth", default=2, show_default=True)
@click.option("--root", default=None, type=int)
@click.option("--class-guard", default=10**6, show_default=True,
              help="Abort when the enumeration exceeds this many type classes.")
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Optional CSV of the exact sample-mean distribution.")
def oracle(model_file, depth, root, class_guard, csv_path):
    """Exact type-class enumeration at small depth."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        chain, _ = parse_weighted(_read_raw(model_file), reduced)
        root_sym = root if root is not None else find_a0_and_period(reduced).a0
        classes = enumerate_type_classes(chain, depth, root_sym, class_guard=class_guard)
        dist = exact_mean_distribution(chain, depth, root_sym, class_guard=class_guard)
        if csv_path:
            with open(csv_path, "w") as fh:
                fh.write("mean,probability\n")
                for atom in dist.atoms:
                    fh.write(f"{atom.mean!r},{atom.prob!r}\n")
        payload = {
            "depth": depth,
            "root": root_sym,
            "n_classes": len(classes),
            "total_probability": dist.total_prob(),
            "classes": [
                {
                    "levels": [list(level) for level in cls.levels],
                    "count": str(cls.count),  # decimal string: counts overflow JSON numbers
                    "log_prob": cls.log_prob,
                }
                for cls in classes
            ],
            "mean_atoms": [
                {"mean": atom.mean, "probability": atom.prob} for atom in dist.atoms
            ],
        }
        _emit(payload, "oracle", model_file, {"n": depth, "root": root_sym}, started)

    _run(go)


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--n-max", default=40, show_default=True)
def entropy(model_file, n_max):
    """Topological-entropy recursion and its extrapolated limit."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        seq = entropy_iterate(reduced, n_max)
        payload = {
            "depths": list(seq.depths),
            "values": list(seq.values),
            "h_top": seq.h_top,
        }
        _emit(payload, "entropy", model_file, {"n_max": n_max}, started)

    _run(go)


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--eigen-tol", default=1e-11, show_default=True)
@click.option("--tol", default=1e-6, show_default=True,
              help="Certificate tolerance: |min phase - dim|.")
def measure(model_file, eigen_tol, tol):
    """Optimal Markov measure attaining the dimension, with certificate."""
    started = time.perf_counter()

    def go():
        _, reduced = _load_reduced(model_file)
        report = hausdorff_dimension(reduced, eigen_tol=eigen_tol)
        om = optimal_markov_measure(reduced, report, tol=tol, eigen_tol=eigen_tol)
        payload = {
            "M_star": om.M,
            "pi_star": om.pi,
            "phases": list(om.phases),
            "validation_value": om.validation_value,
            "dim": om.dim,
        }
        _emit(payload, "measure", model_file, {"eigen_tol": eigen_tol, "tol": tol}, started)

    _run(go)


if __name__ == "__main__":
    main()

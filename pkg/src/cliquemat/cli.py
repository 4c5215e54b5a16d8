"""Command-line front end.

Every command reads its inputs, computes everything in memory and only then
writes its output files, so a failing run leaves nothing behind.  Exit codes:
0 success, 1 unreadable or malformed input, 2 invalid configuration,
3 numerical failure (e.g. a covariance that is not positive semidefinite).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections import Counter
from typing import Dict, List, Optional

import numpy as np

from . import covfit, formats
from .graph import (AdjacencyMatrix, CliqueMatrix, DimensionError, incidence_matrix,
                    is_valid_clique_matrix, stats)
from .meanfield import ModelParams, SolverConfig, log_likelihood, solve_fixed_c
from .select import solve_auto_c

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
FIELDS = {"zero": "zero_variance", "gaussian": "gaussian"}


class ConfigError(ValueError):
    pass


def _positive_int(name, value, minimum=1):
    if value is None or value < minimum:
        raise ConfigError(f"--{name} must be at least {minimum}")
    return value


def _positive(name, value):
    if value is None or not value > 0 or not math.isfinite(value):
        raise ConfigError(f"--{name} must be a positive number")
    return value


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def histogram_csv(z: CliqueMatrix) -> str:
    """Clique sizes as ``size,count,log2_count_plus_1`` rows."""
    hist = Counter(z.bits.sum(axis=0).tolist())
    lines = ["size,count,log2_count_plus_1"]
    for size in sorted(hist):
        lines.append(f"{size},{hist[size]},{math.log2(hist[size] + 1)!r}")
    return "\n".join(lines) + "\n"


def text_histogram(values, bins: int = 20, width: int = 50) -> str:
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins)
    top = max(int(counts.max()), 1)
    lines = []
    for n, lo, hi in zip(counts, edges[:-1], edges[1:]):
        bar = "#" * int(round(width * n / top))
        lines.append(f"{lo:10.4g} {hi:10.4g} {int(n):6d} {bar}")
    return "\n".join(lines) + "\n"


def _write_outputs(out_dir: str, files: Dict[str, str]):
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_graph(args) -> AdjacencyMatrix:
    if args.input is None:
        raise ConfigError("--input is required")
    return formats.read_graph(args.input, args.format)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        max_epochs=_positive_int("max-epochs", args.max_epochs),
        tol=_positive("tol", args.tol),
        seed=args.seed,
        restarts=_positive_int("restarts", args.restarts),
        field_mode=FIELDS[args.field],
    )


def _clique_outputs(a: AdjacencyMatrix, z: CliqueMatrix, extra: dict) -> Dict[str, str]:
    summary = stats(a, z).to_dict()
    summary.update(extra)
    return {
        "cliques.txt": formats.format_clique_sparse(z, a.labels),
        "cliques.csv": formats.format_clique_csv(z),
        "stats.json": _dumps(summary),
        "histogram.csv": histogram_csv(z),
    }


# ---------------------------------------------------------------- commands


def cmd_decompose(args) -> Dict[str, str]:
    _positive_int("c", args.c)
    _positive("beta", args.beta)
    config = _solver_config(args)
    a = _read_graph(args)
    z, state, ll = solve_fixed_c(a, ModelParams(beta=args.beta, c=args.c), config)
    return _clique_outputs(a, z, {"log_likelihood": ll, "converged": bool(state.converged)})


def cmd_select(args) -> Dict[str, str]:
    _positive_int("cmax", args.cmax)
    _positive("beta", args.beta)
    _positive("a", args.a)
    _positive("b", args.b)
    config = _solver_config(args)
    a = _read_graph(args)
    z, ind = solve_auto_c(a, args.cmax, args.beta, config, args.a, args.b)
    extra = {
        "retained": z.c,
        "alpha": [float(x) for x in ind.alpha_mean],
        "log_likelihood": log_likelihood(a, z, args.beta),
    }
    return _clique_outputs(a, z, extra)


def _read_mask(path: str, v: Optional[int]) -> CliqueMatrix:
    try:
        return formats.read_clique_matrix(path, v)
    except formats.ParseError:
        raise
    except DimensionError:
        raise
    except ValueError as exc:
        # e.g. an all-zero column: the file is malformed rather than the settings
        raise formats.ParseError(str(exc)) from None


def cmd_expand(args) -> Dict[str, str]:
    _positive_int("max-columns", args.max_columns)
    if args.input is None:
        raise ConfigError("--input is required")
    z = _read_mask(args.input, args.vertices)
    big = covfit.expand_clique_matrix(z, args.max_columns)
    return {"expanded.txt": formats.format_clique_sparse(big), "expanded.csv": formats.format_clique_csv(big)}


def cmd_stats(args) -> Dict[str, str]:
    a = _read_graph(args)
    z = _read_mask(args.cliques, a.v) if args.cliques else incidence_matrix(a)
    if z.v != a.v:
        raise ConfigError("clique matrix and graph disagree on vertex count")
    return {"stats.json": _dumps(stats(a, z).to_dict()), "histogram.csv": histogram_csv(z)}


def _fit_config(args) -> covfit.FitConfig:
    return covfit.FitConfig(tol=_positive("fit-tol", args.fit_tol),
                            max_iter=_positive_int("max-iter", args.max_iter), seed=args.seed)


def cmd_fitcov(args) -> Dict[str, str]:
    _positive_int("max-columns", args.max_columns)
    if args.covariance is None:
        raise ConfigError("--covariance is required")
    fit_config = _fit_config(args)
    a = _read_graph(args)
    with open(args.covariance, "rb") as fh:
        s = formats.parse_covariance_csv(fh)
    if s.shape[0] != a.v:
        raise ConfigError(f"covariance is {s.shape[0]}x{s.shape[0]} but graph has {a.v} vertices")
    covfit.check_sample_covariance(s)
    if args.mask:
        mask = _read_mask(args.mask, a.v)
        if not is_valid_clique_matrix(a, mask):
            raise ConfigError("--mask is not a clique matrix for the graph")
    else:
        if args.c is not None:
            _positive_int("c", args.c)
        mask = covfit.solver_mask(a, args.c, _positive("beta", args.beta), _solver_config(args),
                                  args.max_columns)
    model, report = covfit.fit_covariance(s, a, mask, fit_config)
    out = report.to_dict()
    out["mask_columns"] = mask.c
    return {"sigma.csv": formats.format_matrix_csv(model.sigma), "fit.json": _dumps(out),
            "mask.txt": formats.format_clique_sparse(mask)}


def cmd_replicate(args) -> Dict[str, str]:
    n = _positive_int("replications", args.replications)
    reps = covfit.replicate_cycle4(n, args.seed, _fit_config(args))
    lines = ["seed,rms_error,kappa,converged"]
    lines += [f"{r.index},{r.rms_error!r},{r.kappa!r},{str(r.converged).lower()}" for r in reps]
    return {"replications.csv": "\n".join(lines) + "\n",
            "histogram.txt": text_histogram([r.rms_error for r in reps])}


COMMANDS = {
    "decompose": cmd_decompose,
    "select": cmd_select,
    "expand": cmd_expand,
    "fitcov": cmd_fitcov,
    "stats": cmd_stats,
    "replicate": cmd_replicate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cliquemat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("--input", help="input graph file")
            sp.add_argument("--format", choices=formats.FORMATS,
                            help="graph format (guessed from the extension if omitted)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", default=".", help="directory for output files")

    def solver(sp):
        sp.add_argument("--beta", type=float, default=10.0)
        sp.add_argument("--restarts", type=int, default=1)
        sp.add_argument("--tol", type=float, default=1e-4)
        sp.add_argument("--max-epochs", type=int, default=100)
        sp.add_argument("--field", choices=sorted(FIELDS), default="zero")

    def fitting(sp):
        sp.add_argument("--fit-tol", type=float, default=covfit.FitConfig.tol)
        sp.add_argument("--max-iter", type=int, default=covfit.FitConfig.max_iter)

    sp = sub.add_parser("decompose", help="fixed-C clique decomposition")
    common(sp)
    solver(sp)
    sp.add_argument("--c", type=int, required=True, help="number of columns")

    sp = sub.add_parser("select", help="decomposition with automatic choice of C")
    common(sp)
    solver(sp)
    sp.add_argument("--cmax", type=int, required=True, help="maximum number of columns")
    sp.add_argument("--a", type=float, default=1.0, help="Beta prior a")
    sp.add_argument("--b", type=float, default=3.0, help="Beta prior b")

    sp = sub.add_parser("expand", help="expanded clique matrix of a clique-matrix file")
    sp.add_argument("--input", help="clique matrix (dense CSV or sparse 'c<k>:' text)")
    sp.add_argument("--vertices", type=int, help="vertex count, needed for sparse input")
    sp.add_argument("--max-columns", type=int, default=covfit.DEFAULT_MAX_COLUMNS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=".")

    sp = sub.add_parser("fitcov", help="fit a zero-constrained covariance")
    common(sp)
    solver(sp)
    fitting(sp)
    sp.add_argument("--covariance", help="sample covariance CSV")
    sp.add_argument("--mask", help="clique matrix to parameterise with (default: solver + expansion)")
    sp.add_argument("--c", type=int, help="solver columns when no --mask is given")
    sp.add_argument("--max-columns", type=int, default=covfit.DEFAULT_MAX_COLUMNS)

    sp = sub.add_parser("stats", help="graph and clique-matrix summary")
    common(sp)
    sp.add_argument("--cliques", help="clique matrix file (default: incidence matrix)")

    sp = sub.add_parser("replicate", help="repeat the 4-cycle covariance experiment")
    common(sp, graph=False)
    fitting(sp)
    sp.add_argument("--replications", type=int, default=1000)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        files = COMMANDS[args.command](args)
    except (formats.ParseError, OSError, UnicodeDecodeError) as exc:
        print(f"cliquemat: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except covfit.NumericalError as exc:
        print(f"cliquemat: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DimensionError, ValueError) as exc:
        print(f"cliquemat: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _write_outputs(args.out_dir, files)
    except OSError as exc:
        print(f"cliquemat: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

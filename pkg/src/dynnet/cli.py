"""Command-line interface: build networks, simulate, compare, sweep.

Exit codes: 0 success, 1 I/O or parse failure, 2 violated mathematical
precondition (forced cluster split, overlapping spectra, malformed
blocks, dimension mismatch), 3 integration failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import io as dio
from . import systems
from .exceptions import (
    DynnetError,
    ForcedSplitError,
    GMembershipError,
    InseparableBlocksError,
    IntegrationError,
    SpectraNotSeparatedError,
    UnreducedBlockError,
)
from .network import build_dynn
from .oracle import lsim_exact
from .preprocess import preprocess_lti
from .simulate import SolverConfig, forward_pass_stepped, forward_pass_whole

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_MATH = 2
EXIT_INTEGRATION = 3

_MATH_ERRORS = (
    ForcedSplitError,
    SpectraNotSeparatedError,
    GMembershipError,
    InseparableBlocksError,
    UnreducedBlockError,
)


class _ParseFailure(Exception):
    """Input file could not be parsed or validated."""


def _load_checked(loader, path, what):
    try:
        return loader(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise _ParseFailure(f"cannot read {what} {path}: {exc}") from exc


def _add_system_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--model", help="state-space model JSON file")
    g.add_argument(
        "--system",
        choices=["diffusion2d", "convdiff2d", "ladder", "mixed"],
        help="built-in example system",
    )
    p.add_argument("--gen-seed", type=int, default=None, help="generator seed")
    p.add_argument("--nx", type=int, default=20)
    p.add_argument("--ny", type=int, default=20)
    p.add_argument("--lx", type=float, default=None)
    p.add_argument("--ly", type=float, default=None)
    p.add_argument("--diffusivity", type=float, default=None)
    p.add_argument("--vx", type=float, default=0.6)
    p.add_argument("--vy", type=float, default=0.0)


def _add_grid_args(p):
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--tf", type=float, default=10.0)
    p.add_argument("--grid-step", type=float, default=0.1)


def _add_solver_args(p):
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-10)
    p.add_argument("--mode", choices=["whole", "stepped"], default="whole")
    p.add_argument("--step-dt", type=float, default=0.1,
                   help="interval length for stepped mode")


def _resolve_system(args):
    """Returns (state space, default input builder or None)."""
    if args.model:
        return _load_checked(dio.load_model, args.model, "model file"), None
    if args.system == "diffusion2d":
        grid = systems.GridSpec(
            nx=args.nx, ny=args.ny,
            lx=args.lx if args.lx is not None else 10.0,
            ly=args.ly if args.ly is not None else 10.0,
        )
        ss, src = systems.make_diffusion2d(
            grid, diffusivity=args.diffusivity if args.diffusivity is not None else 0.8
        )
        return ss, src
    if args.system == "convdiff2d":
        grid = systems.GridSpec(
            nx=args.nx, ny=args.ny,
            lx=args.lx if args.lx is not None else 10.0,
            ly=args.ly if args.ly is not None else 9.5,
        )
        ss, src = systems.make_convdiff2d(
            grid,
            diffusivity=args.diffusivity if args.diffusivity is not None else 1.4,
            vx=args.vx, vy=args.vy,
        )
        return ss, src
    if args.system == "ladder":
        seed = args.gen_seed if args.gen_seed is not None else 1386
        ss = systems.make_conditioning_ladder(seed)
        return ss, lambda: systems.make_sine_input(ss.n_inputs)
    seed = args.gen_seed if args.gen_seed is not None else 0
    ss = systems.make_mixed_cluster_system(seed)
    return ss, lambda: systems.make_sine_input(ss.n_inputs)


def _resolve_input(args, ss, default_builder):
    if getattr(args, "input", None):
        sig = _load_checked(dio.load_input, args.input, "input file")
    elif default_builder is not None:
        sig = default_builder()
    else:
        raise ValueError("no input file given and the model has no default input")
    if sig.dim != ss.n_inputs:
        raise ValueError(
            f"input has {sig.dim} channels, the system expects {ss.n_inputs}"
        )
    return sig


def _grid(args):
    n = int(round((args.tf - args.t0) / args.grid_step))
    return np.round(args.t0 + args.grid_step * np.arange(n + 1), 10)


def _nearest_indices(times, grid, tol=1e-9):
    idx = np.clip(np.searchsorted(times, grid), 0, len(times) - 1)
    below = np.clip(idx - 1, 0, len(times) - 1)
    idx = np.where(
        np.abs(times[below] - grid) < np.abs(times[idx] - grid), below, idx
    )
    if np.max(np.abs(times[idx] - grid)) > tol:
        raise ValueError("comparison grid must be a subset of the input sample grid")
    return idx


def _layer_summary(params, t_lti):
    return {
        "cond_t": t_lti.cond_t,
        "diagonalizable_path": t_lti.diagonalizable_path,
        "block_classes": [b.clazz for b in t_lti.blocks],
        "layer_sizes": list(params.layer_sizes),
        "n_first_order": params.n_first_order,
        "n_second_order": params.n_second_order,
    }


def cmd_build(args):
    ss, _ = _resolve_system(args)
    t_start = time.perf_counter()
    params, t_lti = build_dynn(
        ss, args.clusters if args.clusters is not None else ss.n_states,
        algorithm=args.clustering, seed=args.seed, max_cond=args.max_cond,
    )
    elapsed = time.perf_counter() - t_start
    summary = _layer_summary(params, t_lti)
    dio.save_params(args.out, params, summary=summary)
    if args.dump_model:
        dio.save_model(args.dump_model, ss)
    if args.manifest:
        dio.write_manifest(args.manifest, {
            "command": "build",
            "config": {
                "clusters": args.clusters,
                "clustering": args.clustering,
                "seed": args.seed,
                "max_cond": args.max_cond,
            },
            "files": {"model": args.model, "system": args.system, "params": args.out},
            "timing_s": elapsed,
            **summary,
        })
    print(json.dumps(summary))
    return EXIT_OK


def _nfe_table(report):
    return report.to_table()


def cmd_simulate(args):
    ss, default_builder = _resolve_system(args)
    params = _load_checked(dio.load_params, args.params, "parameter file")
    if params.n_inputs != ss.n_inputs or params.n_outputs != ss.n_outputs:
        raise ValueError("parameter file dimensions do not match the model")
    sig = _resolve_input(args, ss, default_builder)
    grid = _grid(args)
    cfg = SolverConfig(rtol=args.rtol, atol=args.atol)
    span = (args.t0, args.tf)
    t_start = time.perf_counter()
    if args.mode == "whole":
        out, report = forward_pass_whole(params, sig, span, cfg)
    else:
        out, report = forward_pass_stepped(params, sig, span, args.step_dt, cfg)
    y = out(grid)
    elapsed = time.perf_counter() - t_start
    dio.write_trace(args.out, grid, y)
    if args.manifest:
        dio.write_manifest(args.manifest, {
            "command": "simulate",
            "config": {
                "rtol": args.rtol, "atol": args.atol,
                "mode": args.mode, "step_dt": args.step_dt,
                "t0": args.t0, "tf": args.tf, "grid_step": args.grid_step,
            },
            "files": {"params": args.params, "input": getattr(args, "input", None),
                      "trace": args.out},
            "timing_s": elapsed,
            "nfe": _nfe_table(report),
            "nfe_total": report.total,
        })
    print(f"wrote {args.out} ({len(grid)} rows, total nfe {report.total})")
    return EXIT_OK


def cmd_compare(args):
    ss, default_builder = _resolve_system(args)
    params = _load_checked(dio.load_params, args.params, "parameter file")
    if params.n_inputs != ss.n_inputs or params.n_outputs != ss.n_outputs:
        raise ValueError("parameter file dimensions do not match the model")
    sig = _resolve_input(args, ss, default_builder)
    if sig.kind != "sampled":
        raise ValueError("compare requires a sampled input")
    grid = _grid(args)
    cfg = SolverConfig(rtol=args.rtol, atol=args.atol)
    span = (args.t0, args.tf)
    t_start = time.perf_counter()
    if args.mode == "whole":
        out, report = forward_pass_whole(params, sig, span, cfg)
    else:
        out, report = forward_pass_stepped(params, sig, span, args.step_dt, cfg)
    y = out(grid)
    ref = lsim_exact(ss, sig.times, sig.values, interpolation=sig.mode)
    # oracle outputs at the requested grid: exact at its own sample times
    ref_idx = _nearest_indices(sig.times, grid)
    y_ref = ref.outputs[ref_idx]
    elapsed = time.perf_counter() - t_start
    abs_err = np.abs(y - y_ref)
    rel_err = abs_err / np.maximum(np.abs(y_ref), 1e-12)
    with open(args.out, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["t", "max_abs_err", "max_rel_err"])
        for t, a, r in zip(grid, abs_err.max(axis=1), rel_err.max(axis=1)):
            writer.writerow([repr(float(t)), repr(float(a)), repr(float(r))])
    summary = {
        "max_abs_per_dim": abs_err.max(axis=0).tolist(),
        "max_rel_per_dim": rel_err.max(axis=0).tolist(),
        "max_abs": float(abs_err.max()),
        "max_rel": float(rel_err.max()),
    }
    if args.trace:
        dio.write_trace(args.trace, grid, y)
    if args.svg:
        dio.write_svg(args.svg, grid, abs_err.max(axis=1),
                      labels=["max_abs_err"])
    if args.manifest:
        dio.write_manifest(args.manifest, {
            "command": "compare",
            "config": {"rtol": args.rtol, "atol": args.atol, "mode": args.mode},
            "files": {"params": args.params, "errors": args.out,
                      "svg": args.svg, "trace": args.trace},
            "timing_s": elapsed,
            "nfe_total": report.total,
            "error_summary": summary,
        })
    print(json.dumps({"max_abs": summary["max_abs"], "max_rel": summary["max_rel"]}))
    return EXIT_OK


def cmd_sweep(args):
    ss, _ = _resolve_system(args)
    rows = []
    for n_clusters in range(args.l_min, args.l_max + 1):
        try:
            t_lti = preprocess_lti(
                ss, n_clusters, algorithm=args.clustering, seed=args.seed
            )
            rows.append(
                (n_clusters, t_lti.cond_t, len(t_lti.blocks), "ok")
            )
        except _MATH_ERRORS as exc:
            rows.append((n_clusters, float("nan"), 0, type(exc).__name__))
    with open(args.out, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["L", "cond_t", "layer_count", "status"])
        for row in rows:
            writer.writerow([row[0], repr(float(row[1])), row[2], row[3]])
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dynnet",
        description="Construct and simulate dynamic neural networks from LTI systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="construct network parameters")
    _add_system_args(p)
    p.add_argument("--clusters", "-L", type=int, default=None,
                   help="number of eigenvalue clusters (default: one per state)")
    p.add_argument("--clustering", default="kmeans")
    p.add_argument("--seed", type=int, default=0, help="clustering seed")
    p.add_argument("--max-cond", type=float, default=None)
    p.add_argument("--out", required=True, help="output parameter JSON")
    p.add_argument("--dump-model", default=None, help="also write the model JSON")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("simulate", help="run a forward pass, write a trace CSV")
    _add_system_args(p)
    p.add_argument("--params", required=True)
    p.add_argument("--input", default=None, help="sampled input JSON")
    _add_grid_args(p)
    _add_solver_args(p)
    p.add_argument("--out", required=True, help="output CSV trace")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="forward pass vs the exact propagator")
    _add_system_args(p)
    p.add_argument("--params", required=True)
    p.add_argument("--input", default=None)
    _add_grid_args(p)
    _add_solver_args(p)
    p.add_argument("--out", required=True, help="error curves CSV")
    p.add_argument("--trace", default=None, help="also write the network trace")
    p.add_argument("--svg", default=None, help="error plot as raw SVG polylines")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="condition number across cluster counts")
    _add_system_args(p)
    p.add_argument("--l-min", type=int, default=1)
    p.add_argument("--l-max", type=int, required=True)
    p.add_argument("--clustering", default="kmeans")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _MATH_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_MATH
    except IntegrationError as exc:
        print(json.dumps({
            "error": "IntegrationError", "message": str(exc),
            "t": exc.t, "layer": exc.layer, "neuron": exc.neuron,
        }), file=sys.stderr)
        return EXIT_INTEGRATION
    except (_ParseFailure, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, DynnetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())

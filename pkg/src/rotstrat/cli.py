"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import kernel, lab
from .linear import propagate
from .qg import decompose, potential_vorticity
from .solver import SolverError, run_coupled, write_trajectory
from .spectral import PhysicalParams, l2_norm, read_snapshot, write_snapshot

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _params(args) -> PhysicalParams:
    return PhysicalParams(epsilon=args.epsilon, nu=args.nu, froude=args.froude)


def _physics_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--froude", type=float, default=2.0)


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if path:
        Path(path).write_text(text)
    print(text)


def cmd_decompose(args) -> int:
    u, grid = read_snapshot(args.input)
    params = _params(args)
    parts = decompose(u, grid, params)
    prefix = Path(args.out_prefix)
    write_snapshot(prefix.with_name(prefix.name + "_qg.rlb"), parts.qg_part, grid)
    write_snapshot(prefix.with_name(prefix.name + "_osc.rlb"), parts.osc_part, grid)
    _dump({"L2_qg": l2_norm(parts.qg_part, grid), "L2_osc": l2_norm(parts.osc_part, grid)}, None)
    return EXIT_OK


def cmd_propagate(args) -> int:
    u, grid = read_snapshot(args.input)
    out = propagate(u, args.time, grid, _params(args))
    write_snapshot(args.output, out, grid)
    _dump({"t": args.time, "L2_in": l2_norm(u, grid), "L2_out": l2_norm(out, grid)}, None)
    return EXIT_OK


def cmd_kernel_decay(args) -> int:
    sigmas = np.geomspace(args.sigma_min, args.sigma_max, args.count)
    sampling = kernel.FrequencySampling(h=args.h)
    cutoffs = kernel.CutoffSpec(k0=args.k0)
    phase = kernel.PhaseSpec(args.phase, froude=args.froude)
    rows = kernel.decay_table(sigmas, args.pieces, cutoffs=cutoffs, sampling=sampling, phase=phase,
                              boundary_tol=args.boundary_tol)
    if args.csv:
        kernel.write_decay_csv(args.csv, rows)
    fits = []
    for piece in args.pieces:
        sups = [r.sup_abs for r in rows if r.piece == piece]
        fit = kernel.decay_fit(sigmas, piece, sups=sups)
        rep = kernel.fit_report(fit)
        rep["envelope_C"] = kernel.envelope_constant(sigmas, sups)
        fits.append(rep)
    _dump(fits, args.json)
    return EXIT_OK


def cmd_strichartz_scan(args) -> int:
    rep = kernel.strichartz_measure(args.p, args.r, args.theta, args.epsilons, nu=args.nu, t_end=args.t_end)
    _dump(rep.to_dict(), args.json)
    return EXIT_OK


def _load_config(path: str) -> lab.ExperimentConfig:
    cfg = lab.ExperimentConfig.from_json(path)
    violations = lab.validate_config(cfg)
    if violations:
        raise lab.ConfigError("\n".join(map(str, violations)))
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    eps = args.epsilon if args.epsilon is not None else cfg.epsilons[0]
    grid, params, scfg = cfg.grid_obj(), cfg.params(eps), cfg.solver_config()
    u0, qg0, osc0 = lab.make_initial_data(cfg, eps)
    run = run_coupled(u0, potential_vorticity(qg0, grid, params), osc0, grid, params, scfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"epsilon": eps, "blowup_monitor": run.blowup, "gb_time_integral": run.gb_integral}
    for name in ("pe", "qg", "we", "delta"):
        path = write_trajectory(out / name, getattr(run, name), params, scfg)
        summary[name] = str(path)
    summary["delta_E_half"] = lab._es_norm(run.delta.norms, run.delta.times, 0.5, cfg.physics.nu)
    _dump(summary, str(out / "summary.json"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)

    def progress(eps, rows):
        vals = ", ".join(f"s={r['s']:g}: {r['delta_Es_norm']}" for r in rows)
        print(f"epsilon={eps:g}  {vals}", file=sys.stderr)

    report = lab.epsilon_sweep(cfg, progress=progress)
    paths = lab.emit_report(report, args.out_dir, args.format)
    print(json.dumps({"slopes": report.slopes, "predicted": report.predicted, "monotone": report.monotone,
                      "failures": report.failures, "files": [str(p) for p in paths]}, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = lab.ExperimentConfig.from_json(args.config)
    violations = lab.validate_config(cfg)
    for v in violations:
        print(v)
    if violations:
        return EXIT_CONFIG
    print("ok: configuration admissible")
    print(f"eta0 = {lab.eta0(cfg.delta, cfg.gamma):g}, alpha = {0.5 - 2 * cfg.delta:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotstrat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="split a snapshot into quasi-geostrophic and oscillating parts")
    p.add_argument("input")
    p.add_argument("--out-prefix", required=True)
    _physics_args(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("propagate", help="apply the exact linear flow to a snapshot")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--time", type=float, required=True)
    _physics_args(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("kernel-decay", help="sup-norm decay of the oscillatory kernel pieces")
    p.add_argument("--sigma-min", type=float, default=1e2)
    p.add_argument("--sigma-max", type=float, default=1e4)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--pieces", nargs="+", default=list(kernel.PIECES), choices=list(kernel.PIECES))
    p.add_argument("--h", type=float, default=1 / 64)
    p.add_argument("--k0", type=float, default=0.25)
    p.add_argument("--froude", type=float, default=2.0)
    p.add_argument("--phase", choices=["primitive", "rotating"], default="primitive")
    p.add_argument("--boundary-tol", type=float, default=math.inf)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_kernel_decay)

    p = sub.add_parser("strichartz-scan", help="epsilon scaling of free-flow space-time norms")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--r", type=float, default=6.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--epsilons", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--t-end", type=float, default=2.0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_strichartz_scan)

    p = sub.add_parser("simulate", help="one coupled run for a single epsilon")
    p.add_argument("config")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="epsilon sweep with rate regression and report files")
    p.add_argument("config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", nargs="+", default=["csv", "json"], choices=["csv", "json"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a configuration against the admissibility windows")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (lab.ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, kernel.KernelWindowError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

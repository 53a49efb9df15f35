"""Command line: ``cogarch-ii {simulate,estimate,binding,grid,study}``.

Exit codes: 0 success, 2 invalid configuration, 3 infeasible or degenerate input.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings

from .aux_ar import aux_estimate
from .binding import Analytic, MonteCarlo, binding, moment_map
from .cogarch import SimConfig, read_returns_csv, simulate_returns, write_returns_csv
from .errors import CogarchError, ConfigError
from .estimators import IIEConfig, WeightMatrix, iie_sim, iie_star, mm_estimate
from .levy import CogarchParams, VarianceGamma
from .rng import DATA, child
from .bench.grid import build_grid, default_bounds, load_grid
from .bench.study import StudyConfig, run_study, write_outputs

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _floats(text: str, count: int = 3):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers") from exc
    if len(vals) != count:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {len(vals)}")
    return tuple(vals)


def _bounds(text: str):
    vals = _floats(text, 6)
    return tuple(zip(vals[0::2], vals[1::2]))


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default, help="master seed (default 2024)")
    p.add_argument("--threads", type=int, default=default, help="worker processes (default: all cores)")
    p.add_argument("--config", default=default, help="JSON file with study-style settings")


def _model_flags(p):
    p.add_argument("--theta", type=_floats, help="beta,eta,phi (default from config or 0.04,0.053,0.038)")
    p.add_argument("--C", type=float, help="variance gamma parameter C (default 1)")
    p.add_argument("--delta", type=float, help="observation spacing (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cogarch-ii", description="COGARCH(1,1) simulation and estimation")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate returns and write CSV")
    _global_flags(p, suppress=True)
    _model_flags(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--substeps", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--with-vol", action="store_true", help="add t,sigma2 columns")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")

    p = sub.add_parser("estimate", help="estimate theta from a returns CSV")
    _global_flags(p, suppress=True)
    _model_flags(p)
    p.add_argument("--input", required=True, help="CSV with columns index,G")
    p.add_argument("--method", choices=["mm", "iie-star", "iie-sim"], default="iie-star")
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--omega", choices=["identity"], default="identity")
    p.add_argument("--grid", help="grid JSON (bounds, spacing); default from config")
    p.add_argument("--substeps", type=int, default=None, help="simulation substeps for iie-sim")
    p.add_argument("--burn-in", type=int, default=None, help="simulation burn-in for iie-sim")

    p = sub.add_parser("binding", help="print pi_theta and the moment summary")
    _global_flags(p, suppress=True)
    _model_flags(p)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--backend", choices=["analytic", "mc"], default="analytic")
    p.add_argument("--paths", type=int, default=16)
    p.add_argument("--n-per-path", type=int, default=200_000)

    p = sub.add_parser("grid", help="build the Psi(4) < 0 lattice and summarise it")
    _global_flags(p, suppress=True)
    _model_flags(p)
    p.add_argument("--bounds", type=_bounds, help="blo,bhi,elo,ehi,flo,fhi")
    p.add_argument("--spacing", type=_floats)
    p.add_argument("--out", help="write the grid definition as JSON")

    p = sub.add_parser("study", help="run the replication study")
    _global_flags(p, suppress=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--methods", help="comma-separated subset of mm,iie-star,iie-sim")
    p.add_argument("--out", help="output directory (default: config output_dir or ./study_out)")
    return parser


def _base_config(args, **extra) -> StudyConfig:
    cfg = StudyConfig.from_file(args.config) if args.config else StudyConfig()
    over = dict(extra)
    if getattr(args, "theta", None):
        over["theta_true"] = CogarchParams.from_array(args.theta)
    if getattr(args, "C", None):
        over["model"] = VarianceGamma(C=args.C)
    if getattr(args, "delta", None):
        over["delta"] = args.delta
    if args.seed is not None:
        over["master_seed"] = (args.seed,)
    for name in ("n", "reps", "K", "r"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if getattr(args, "burn_in", None) is not None:
        over["burn_in"] = args.burn_in
    if getattr(args, "substeps", None) is not None:
        over["substeps"] = args.substeps
    if getattr(args, "methods", None):
        over["methods"] = tuple(m.strip() for m in args.methods.split(","))
    if not over:
        return cfg
    d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    if "theta_true" in over and (not args.config or "bounds" not in _raw(args.config)):
        d["bounds"] = None
    d.update(over)
    try:
        return StudyConfig(**d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _raw(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_simulate(args):
    # r plays no role here; the smallest order keeps the n > 2r check from rejecting short series
    cfg = _base_config(args, r=2)
    sim = SimConfig(cfg.delta, cfg.n, cfg.substeps, cfg.burn_in, child(cfg.master_seed, DATA, 0))
    series, vol = simulate_returns(cfg.theta_true, cfg.model, sim)
    write_returns_csv(sys.stdout if args.out == "-" else args.out, series, vol if args.with_vol else None)
    return 0


def cmd_estimate(args):
    cfg = _base_config(args)
    series = read_returns_csv(args.input, cfg.delta)
    if args.method == "mm":
        res = mm_estimate(series, cfg.r, cfg.model, cfg.bounds, cfg.mm_method)
    elif args.method == "iie-star":
        try:
            start = mm_estimate(series, cfg.r, cfg.model, cfg.bounds, cfg.mm_method).theta_hat
        except CogarchError:
            start = None
        res = iie_star(aux_estimate(series, cfg.r), cfg.model, cfg.delta, WeightMatrix.identity(cfg.r + 2),
                       cfg.bounds, start=start)
    else:
        grid = load_grid(args.grid, cfg.model) if args.grid else build_grid(cfg.bounds, cfg.spacing, cfg.model)
        icfg = IIEConfig(grid, cfg.K, sim_seed=cfg.master_seed, substeps=cfg.substeps, burn_in=cfg.burn_in,
                         threads=args.threads or 1)
        res = iie_sim(series, cfg.model, cfg.r, icfg)
    _emit(res.to_dict())
    return 0


def cmd_binding(args):
    cfg = _base_config(args)
    be = Analytic() if args.backend == "analytic" else MonteCarlo(args.paths, args.n_per_path,
                                                                  child(cfg.master_seed, 0))
    ms = moment_map(cfg.theta_true, cfg.model, cfg.delta, be)
    pi = binding(cfg.theta_true, cfg.model, cfg.delta, cfg.r, be)
    _emit({"theta": cfg.theta_true.to_dict(), "moments": ms.to_dict(), "pi": pi.to_dict(),
           "backend": args.backend})
    return 0


def cmd_grid(args):
    cfg = _base_config(args)
    spacing = args.spacing or cfg.spacing
    bounds = args.bounds or (default_bounds(cfg.theta_true, spacing) if args.spacing else cfg.bounds)
    grid = build_grid(bounds, spacing, cfg.model)
    info = {**grid.to_dict(), "points": len(grid), "lattice": grid.lattice_size, "filtered": grid.n_filtered,
            "betas": len(grid.betas), "eta_phi_pairs": len(grid.eta_phi)}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(grid.to_dict(), fh, indent=2)
    _emit(info)
    return 0


def cmd_study(args):
    cfg = _base_config(args)
    report = run_study(cfg, threads=args.threads)
    out = args.out or cfg.output_dir or "study_out"
    paths = write_outputs(report, out)
    _emit({"metrics": report.rows, "n_excluded": report.n_excluded,
           "outputs": {k: str(v) for k, v in paths.items()}})
    return 0


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "binding": cmd_binding, "grid": cmd_grid,
            "study": cmd_study}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CogarchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

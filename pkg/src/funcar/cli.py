"""Simulate ARH(1) paths, estimate rho by Tikhonov regularization, and run rate experiments.

Subcommands::

    funcar simulate     --config CFG --n N [--seed S] [--burn-in B] --out path.csv
    funcar estimate     (--path PATH.csv | --sparse DESIGN.csv) [--config CFG] [--alpha A] [--p P ...]
    funcar rates        --config CFG [--out DIR] [--workers W]
    funcar check-source --config CFG [--p P] [--tol T] [--budget M]

Exit codes: 0 success, 1 invalid config or input, 2 numerical failure.
The environment variable ``FUNCAR_SEED`` overrides ``experiment.base_seed``.
"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from funcar import __version__
from funcar.arh import SamplePath, lag_cov, simulate
from funcar.config import SEED_ENV, ExperimentConfig, _p_label, build_model, load_config, parse_config
from funcar.errors import ConfigError, NumericalError, ReplicationError
from funcar.estimators import SparseDesign, complete_cov_estimate, sparse_cov_estimate
from funcar.hilbert import BasisSpec, schatten_norm
from funcar.rates import alpha_for, emit_report, run_rate_experiment
from funcar.tikhonov import estimate_rho, source_condition_check

log = logging.getLogger("funcar")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


def _p_arg(s):
    if s.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid Schatten index {s!r}") from None
    if p < 1:
        raise argparse.ArgumentTypeError(f"Schatten index must be >= 1, got {s!r}")
    return p


def _config(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    raw = parse_config("")
    if os.environ.get(SEED_ENV, "").strip():
        raw["experiment.base_seed"] = os.environ[SEED_ENV].strip()
    return ExperimentConfig.from_mapping(raw, source="<defaults>")


def _dump(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    cfg = _config(args)
    model = build_model(cfg)
    seed = cfg.base_seed if args.seed is None else args.seed
    burn_in = cfg.burn_in if args.burn_in is None else args.burn_in
    path = simulate(model, args.n, burn_in, seed)
    path.to_csv(args.out)
    log.info("wrote %d states of dimension %d to %s", path.n, path.basis.dimension, args.out)
    return EXIT_OK


def cmd_estimate(args):
    cfg = _config(args) if args.config else None
    if args.path:
        if cfg is not None:
            basis = cfg.basis
        else:
            probe = SamplePath.from_csv(args.path)
            basis = BasisSpec(probe.basis.dimension, args.sobolev_order)
        path = SamplePath.from_csv(args.path, basis)
        cov = complete_cov_estimate(path)
        regime, n, m = "complete", path.n, None
    else:
        if cfg is not None:
            basis = cfg.basis
        elif args.dimension is not None:
            basis = BasisSpec(args.dimension, args.sobolev_order)
        else:
            raise ConfigError("--sparse needs --dimension or --config to fix the basis")
        design = SparseDesign.from_csv(args.sparse, noise_sd=args.noise_sd)
        cov = sparse_cov_estimate(design, basis, args.ridge)
        regime, n, m = "sparse", design.n, design.m
    if args.alpha is not None:
        alpha = args.alpha
    else:
        base = cfg if cfg is not None else ExperimentConfig(dimension=basis.dimension, sobolev_order=basis.sobolev_order)
        tuned = base.with_overrides(regime=regime, alpha_rule="tuned", alpha_gamma="auto", m=m or base.m)
        alpha, _ = alpha_for(tuned, n)
    est = estimate_rho(cov, alpha)
    p_norms = args.p or [2.0]
    out = {
        "regime": regime,
        "n": n,
        "m": m,
        "alpha": alpha,
        "dimension": basis.dimension,
        "sobolev_order": basis.sobolev_order,
        "meta": cov.meta,
        "r0_hat": cov.r0_hat.coords.tolist(),
        "r1_hat": cov.r1_hat.coords.tolist(),
        "rho_hat": est.rho_hat.coords.tolist(),
        "rho_hat_norm": {_p_label(p): schatten_norm(est.rho_hat, p) for p in p_norms},
    }
    if args.truth:
        if cfg is None:
            raise ConfigError("--truth needs --config describing the true model")
        model = build_model(cfg)
        out["errors_sq"] = {
            _p_label(p): {
                "rho": schatten_norm(est.rho_hat.coords - model.rho.coords, p) ** 2,
                "r0": schatten_norm(cov.r0_hat.coords - lag_cov(model, 0).coords, p) ** 2,
                "r1": schatten_norm(cov.r1_hat.coords - lag_cov(model, 1).coords, p) ** 2,
            }
            for p in p_norms
        }
    _dump(out, args.out)
    return EXIT_OK


def cmd_rates(args):
    cfg = _config(args)
    overrides = {}
    if args.out:
        overrides["output_path"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    report = run_rate_experiment(cfg)
    written = emit_report(report, cfg.output_formats, cfg.output_path)
    for p in report.p_norms:
        key = _p_label(p)
        for metric in ("rho", "r0", "r1"):
            fit = report.slopes[metric][key]["mean"]
            if fit is not None:
                log.info("p=%s %s: slope of mean error^2 = %.3f (se %.3f)", key, metric, fit["slope"], fit["stderr"])
    for w in written:
        log.info("wrote %s", w)
    return EXIT_OK


def cmd_check_source(args):
    cfg = _config(args)
    model = build_model(cfg)
    chk = source_condition_check(lag_cov(model, 0), model.rho, p=args.p, tol=args.tol, budget=args.budget)
    _dump(
        {
            "p": _p_label(chk.p) if chk.p in (1.0, 2.0) or math.isinf(chk.p) else chk.p,
            "satisfied": chk.satisfied,
            "w_norm": chk.w_norm,
            "residual": chk.residual,
            "tolerance": chk.tolerance,
            "budget": chk.budget,
            "growth_slope": chk.growth_slope,
            "appears_unbounded": chk.appears_unbounded,
            "partial_norms": chk.partial_norms.tolist(),
        },
        args.out,
    )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="funcar", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"funcar {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a sample path and write it as CSV")
    p.add_argument("--config", help="config file describing basis and model")
    p.add_argument("--n", type=int, required=True, help="number of states")
    p.add_argument("--seed", type=int, help="seed (default: experiment.base_seed)")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--out", "-o", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate covariances and rho from a path or sparse CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--path", help="complete sample path CSV (t,coord_1..coord_J)")
    src.add_argument("--sparse", help="sparse design CSV (t,u,y)")
    p.add_argument("--config", help="config file fixing basis (and the true model for --truth)")
    p.add_argument("--alpha", type=float, help="regularization parameter (default: tuned rule)")
    p.add_argument("--p", type=_p_arg, action="append", help="Schatten index for reported norms; repeatable")
    p.add_argument("--dimension", type=int, help="basis dimension for --sparse without --config")
    p.add_argument("--sobolev-order", type=float, default=0.0, dest="sobolev_order")
    p.add_argument("--ridge", type=float, help="stage-1 ridge weight for --sparse (default: auto)")
    p.add_argument("--noise-sd", type=float, dest="noise_sd", help="known measurement error sd for --sparse")
    p.add_argument("--truth", action="store_true", help="report errors against the config model")
    p.add_argument("--out", "-o", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("rates", help="run a Monte-Carlo rate experiment")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", "-o", help="output directory (overrides output.path)")
    p.add_argument("--workers", type=int, help="worker processes (overrides experiment.workers)")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("check-source", help="test the source condition for a model")
    p.add_argument("--config", help="config file describing the model")
    p.add_argument("--p", type=_p_arg, default=2.0)
    p.add_argument("--tol", type=float, help="residual tolerance (default 1e-8 * ||rho*||_2)")
    p.add_argument("--budget", type=float, help="bound M on ||w||_p")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_check_source)
    return parser


def _exit_code(exc):
    if isinstance(exc, ReplicationError):
        exc = exc.cause
    if isinstance(exc, (NumericalError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, NumericalError, ReplicationError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"funcar {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())

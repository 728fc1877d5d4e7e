"""Command line interface: ``dpvb simulate|privatize|fit|experiment|summarize``.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from .dpmech import privatize
from .estimators import bayes_estimate, naive_estimate, squared_error, vb_estimate
from .experiment import (ExperimentConfig, emit_plot_data, outer_rep_means, read_records,
                         run_experiment, summarize, summary_to_csv, write_records)
from .nbmodel import ModelShape, default_prior, sample_counts, sample_model_params
from .statdist import RngStream
from .validation import ConfigurationError
from .vbengine import FitConfig, PriorSpec

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("dpvb")


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


def _cmd_simulate(args) -> None:
    shape = ModelShape.uniform(args.classes, args.features, args.levels, args.n)
    root = RngStream(args.seed)
    class_prior, cond_prior = default_prior(shape, args.alpha)
    params = sample_model_params(shape, root.child("params"), class_prior, cond_prior)
    truth = sample_counts(params, shape, root.child("counts"))
    dio.write_dataset(args.out, truth, params)


def _cmd_privatize(args) -> None:
    truth, _ = dio.read_dataset(args.input)
    noisy = privatize(truth, args.epsilon, RngStream(args.seed).child("noise"))
    dio.write_noisy(args.out, noisy)


def _cmd_fit(args) -> None:
    config = {"method": args.method, "tol": args.tol, "max_iter": args.max_iter, "alpha": args.alpha}
    if args.method == "bayes":
        truth, _ = dio.read_dataset(args.input)
        estimate = bayes_estimate(truth, PriorSpec.uniform(truth.shape, args.alpha))
    else:
        noisy = dio.read_noisy(args.input)
        if not all(np.all(np.isfinite(v)) for v in noisy.values):
            raise NumericError("released tables contain non-finite values")
        priors = PriorSpec.uniform(noisy.shape, args.alpha)
        if args.method == "naive":
            estimate = naive_estimate(noisy, conjugate=args.conjugate, priors=priors)
            config["conjugate"] = args.conjugate
        else:
            fit_cfg = FitConfig(tol=args.tol, max_iter=args.max_iter, init_mode=args.init)
            estimate = vb_estimate(noisy, priors, fit_cfg)
            config.update(fit_cfg.to_dict())
            if not estimate.meta["converged"]:
                log.warning("vb fit stopped at max_iter=%d without meeting tol", args.max_iter)
    if not np.all(np.isfinite(estimate.point.flat())):
        raise NumericError("estimate contains non-finite values")
    sq_error = None
    if args.truth:
        _, params = dio.read_dataset(args.truth)
        if params is None:
            raise UsageError(f"{args.truth} has no true parameters to score against")
        sq_error = squared_error(estimate.point, params)
    dio.write_posterior(args.out, estimate, config, sq_error)


def _cmd_experiment(args) -> None:
    overrides = {"seed": args.seed, "outer_reps": args.outer_reps, "inner_reps": args.inner_reps,
                 "jobs": args.jobs, "out_csv": args.out_csv}
    if args.n_grid:
        overrides["n_grid"] = args.n_grid
    if args.epsilon_grid:
        overrides["epsilon_grid"] = args.epsilon_grid
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})
    if not cfg.out_csv:
        raise UsageError("an output CSV is required (--out-csv or out_csv in the config)")
    records = run_experiment(cfg)
    write_records(cfg.out_csv, records)


def _cmd_summarize(args) -> None:
    records = read_records(args.input)
    if not records:
        raise UsageError(f"{args.input} contains no records")
    rows = summarize(records)
    Path(args.out).write_text(summary_to_csv(rows), encoding="utf-8", newline="")
    if args.outer_means:
        lines = ["n,epsilon,estimator,outer_rep,mean_sq_error"]
        lines += [f"{n},{e!r},{m},{r},{v!r}" for n, e, m, r, v in outer_rep_means(records)]
        Path(args.outer_means).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.plot:
        emit_plot_data(rows, args.plot)


def _float_list(text: str):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _int_list(text: str):
    return tuple(int(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpvb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw parameters and exact marginal tables")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--features", type=int, default=5)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0, help="Dirichlet concentration of the generator")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("privatize", help="release the tables through the Laplace mechanism")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_privatize)

    p = sub.add_parser("fit", help="estimate parameters with one of the three estimators")
    p.add_argument("--method", choices=("vb", "naive", "bayes"), required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--truth", help="dataset file with true parameters, to report squared error")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--alpha", type=float, default=1.0, help="prior concentration")
    p.add_argument("--init", choices=("from-naive", "uniform"), default="from-naive")
    p.add_argument("--conjugate", action="store_true", help="naive: Dirichlet update on clamped counts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("experiment", help="run the simulation study")
    p.add_argument("--config")
    p.add_argument("--out-csv")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--outer-reps", type=int)
    p.add_argument("--inner-reps", type=int)
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--epsilon-grid", type=_float_list)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("summarize", help="per-cell statistics and box-plot data")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="box-plot data file; a .svg rendering is written next to it")
    p.add_argument("--outer-means", help="also write per-outer-replicate means here")
    p.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except OSError as exc:
        print(f"dpvb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"dpvb: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigurationError, ValueError, KeyError, TypeError) as exc:
        print(f"dpvb: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

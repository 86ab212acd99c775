"""Command-line front end.

Verbs: ``fit`` (stage 1 per model, writes palette stores), ``weigh`` (stage 2
from stores), ``example`` (end-to-end built-in analysis), ``report``
(re-render a saved report). Exit codes: 0 success, 1 validation error,
2 numerical degeneracy, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataio, run
from .config import build_model_set, load_config, validate_config
from .errors import DegeneracyError, ValidationError


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; route them through the
    # validation-error path instead so exit codes stay meaningful.
    def error(self, message):
        raise ValidationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="palettemc",
                     description="Posterior model probabilities and Bayes factors "
                                 "from model-specific MCMC output")
    sub = parser.add_subparsers(dest="verb", required=True)

    fit = sub.add_parser("fit", help="run stage 1 for every model and write palette stores")
    fit.add_argument("--config", required=True)
    fit.add_argument("--output-dir", default=None, help="defaults to <config output_dir>/stores")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--iterations", type=int, default=None)
    fit.add_argument("--burnin", type=int, default=None)
    fit.add_argument("--chains", type=int, default=None)

    weigh = sub.add_parser("weigh", help="run stage 2 from stored palette samples")
    weigh.add_argument("--config", required=True)
    weigh.add_argument("--stores", required=True, help="directory holding store_model*.csv")
    weigh.add_argument("--method", choices=("1", "2", "both"), default=None)
    weigh.add_argument("--iters", type=int, default=None)
    weigh.add_argument("--burnin", type=float, default=None,
                       help="burn-in fraction of each indicator chain")
    weigh.add_argument("--seed", type=int, default=None)
    weigh.add_argument("--draws-per-model", type=int, default=None)
    weigh.add_argument("--tune-priors", action="store_true")
    weigh.add_argument("--output-dir", default=None)

    example = sub.add_parser("example", help="run a built-in example end to end")
    example.add_argument("name", choices=("binomial", "pine", "trout"))
    example.add_argument("--data", default=None, help="CSV file for examples that need one")
    example.add_argument("--output-dir", default=None)
    example.add_argument("--seed", type=int, default=None)
    example.add_argument("--method", choices=("1", "2", "both"), default=None)
    example.add_argument("--iters", type=int, default=None,
                         help="stage-2 iterations per chain")
    example.add_argument("--stage1-iters", type=int, default=None)

    report = sub.add_parser("report", help="re-render a saved report")
    report.add_argument("--input", required=True, help="report JSON file")
    report.add_argument("--format", choices=("text", "csv"), default="text")
    report.add_argument("--output-dir", default=".")
    return parser


def _cmd_fit(args) -> int:
    config = validate_config(load_config(args.config), Path(args.config).parent)
    stage1 = dict(config.stage1)
    for key, value in (("iterations", args.iterations), ("burnin", args.burnin),
                       ("chains", args.chains)):
        if value is not None:
            stage1[key] = value
    from dataclasses import replace
    config = replace(config, stage1=stage1)
    models = build_model_set(config)
    data = run.build_dataset(config, Path(args.config).parent)
    stores = run.fit_models(config, models, data, Path(args.config).parent,
                            seed=args.seed)
    out = Path(args.output_dir) if args.output_dir else Path(config.output_dir) / "stores"
    paths = run.write_stores(stores, out)
    for path in paths:
        print(path)
    return 0


def _cmd_weigh(args) -> int:
    base = Path(args.config).parent
    config = validate_config(load_config(args.config), base)
    models = build_model_set(config)
    data = run.build_dataset(config, base)
    stores = run.load_stores(args.stores, models)
    overrides = {
        "method": args.method,
        "iterations": args.iters,
        "burnin_fraction": args.burnin,
        "seed": args.seed,
        "draws_per_model": args.draws_per_model,
    }
    if args.tune_priors:
        overrides["tune_priors"] = True
    report = run.weigh(config, models, stores, data, **overrides)
    out = Path(args.output_dir) if args.output_dir else Path(config.output_dir)
    paths = dataio.emit_report(report, out, formats=("text", "csv", "json"))
    print(dataio.render_report_text(report))
    for path in paths:
        print(path)
    return 0


def _cmd_example(args) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides.setdefault("stage2", {})["seed"] = args.seed
    if args.method is not None:
        overrides.setdefault("stage2", {})["method"] = args.method
    if args.iters is not None:
        overrides.setdefault("stage2", {})["iterations"] = args.iters
    if args.stage1_iters is not None:
        overrides.setdefault("stage1", {})["iterations"] = args.stage1_iters
    report = run.run_example(args.name, data_path=args.data, overrides=overrides,
                             output_dir=args.output_dir)
    print(dataio.render_report_text(report))
    return 0


def _cmd_report(args) -> int:
    report = dataio.load_report_json(args.input)
    if args.format == "text":
        print(dataio.render_report_text(report))
    paths = dataio.emit_report(report, args.output_dir, formats=(args.format,))
    for path in paths:
        print(path)
    return 0


_COMMANDS = {"fit": _cmd_fit, "weigh": _cmd_weigh, "example": _cmd_example,
             "report": _cmd_report}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ValidationError):
        return 1
    if isinstance(exc, DegeneracyError):
        return 2
    if isinstance(exc, OSError):
        return 3
    raise exc


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.verb](args)
    except (ValidationError, DegeneracyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())

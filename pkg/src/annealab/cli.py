"""Command-line interface.

Subcommands: ``bounds-report``, ``run sgld|sa``, ``gen-gap``,
``sa-convergence``, ``sa-discretization``, ``rademacher-study``,
``lemma-suite``, ``emit``.  Each experiment reads one JSON config file
(``--config``); individual flags override config fields.  The environment
variable ``ANNEALAB_OUTPUT_ROOT`` prefixes relative output directories.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dynamics import NoiseStream, run_sde
from .errors import AnnealabError
from .experiments import (EXPERIMENTS, ExperimentConfig, ExperimentResult,
                          derive_seed, emit, run_experiment)

OUTPUT_ROOT_ENV = "ANNEALAB_OUTPUT_ROOT"


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--output", help="output directory override")
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--draws", type=int)
    parser.add_argument("--sample-size", type=int, dest="sample_size")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--x0", type=_float_list)
    parser.add_argument("--n-values", type=_int_list, dest="n_values")
    parser.add_argument("--s-values", type=_float_list, dest="s_values")
    parser.add_argument("--t-values", type=_float_list, dest="t_values")
    parser.add_argument("--h-values", type=_float_list, dest="h_values")
    parser.add_argument("--resume", action="store_true",
                        help="reuse per-grid-point partial results")
    parser.add_argument("--no-emit", action="store_true",
                        help="skip writing result files")


def _resolve_output(path: str) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def load_config(experiment: str, args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {"experiment": experiment}
    if args.config:
        with open(args.config) as fh:
            base.update(json.load(fh))
        base["experiment"] = experiment
    config = ExperimentConfig.from_dict(base)
    overrides = {
        "master_seed": args.seed,
        "output_dir": args.output,
        "replicas": args.replicas,
        "draws": args.draws,
        "sample_size": args.sample_size,
        "beta": args.beta,
        "x0": args.x0,
        "n_values": args.n_values,
        "s_values": args.s_values,
        "t_values": args.t_values,
        "h_values": args.h_values,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    config.output_dir = _resolve_output(config.output_dir)
    return config


def _print_result(result: ExperimentResult) -> None:
    for row in result.rows:
        ci = ""
        if row.ci_lo is not None:
            ci = f" [{row.ci_lo:.6g}, {row.ci_hi:.6g}]"
        print(f"{row.metric} x={row.x:g} value={row.value:.8g}{ci}")
    for v in result.verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"{status} {v.check} margin={v.margin:.6g} {v.detail}")
    print(f"wall_clock={result.wall_clock:.2f}s")


def _cmd_experiment(experiment: str, args: argparse.Namespace) -> int:
    config = load_config(experiment, args)
    result = run_experiment(config, resume=args.resume)
    _print_result(result)
    if not args.no_emit:
        for path in emit(result):
            print(f"wrote {path}")
    return 0 if result.all_passed() else 1


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config("bounds-report", args)  # reuse field plumbing
    model = config.build_model()
    sched = config.build_schedule()
    sample = model.draw_sample(
        config.sample_size, seed=derive_seed(config.master_seed, "run", "sample"))
    record = [float(t) for t in config.t_values]
    noise = NoiseStream(seed=derive_seed(config.master_seed, "run", "noise"),
                        h=float(args.h))
    if args.process == "sgld":
        if config.beta is None:
            raise AnnealabError("run sgld needs beta")
        ens = run_sde(model, sample, "sgld-continuous", config.x0,
                      record_times=record, noise=noise, beta=config.beta,
                      replicas=config.replicas)
    else:
        process = "sa-discrete" if args.discretized else "sa-continuous"
        ens = run_sde(model, sample, process, config.x0, record_times=record,
                      noise=noise, schedule=sched, replicas=config.replicas)
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, f"trajectory_{ens.process}.csv")
    ens.to_csv(csv_path)
    summary = ens.summary_dict()
    json_path = os.path.join(outdir, f"trajectory_{ens.process}_summary.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    moments = summary["moments"]
    for t, m2 in zip(summary["times"], moments):
        print(f"t={t:g} E|X|^2={m2:.6g}")
    return 0


def _cmd_emit(args: argparse.Namespace) -> int:
    with open(args.result) as fh:
        result = ExperimentResult.from_dict(json.load(fh))
    formats = tuple(args.formats.split(","))
    outdir = _resolve_output(args.output) if args.output else None
    for path in emit(result, formats=formats, output_dir=outdir):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annealab",
        description="Langevin dynamics and simulated annealing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    for experiment in EXPERIMENTS:
        if experiment == "lemma-suite":
            p = sub.add_parser(experiment, help="run the inequality suite")
            p.add_argument("--quick", action="store_true",
                           help="smaller Monte Carlo sizes")
        else:
            p = sub.add_parser(experiment, help=f"run the {experiment} experiment")
        _add_common(p)

    p = sub.add_parser("run", help="simulate one process and dump trajectories")
    p.add_argument("process", choices=("sgld", "sa"))
    p.add_argument("--h", type=float, default=1e-3, help="internal step")
    p.add_argument("--discretized", action="store_true",
                   help="step-size discretized annealing instead of continuous")
    _add_common(p)

    p = sub.add_parser("emit", help="re-emit files from a stored result JSON")
    p.add_argument("--result", required=True)
    p.add_argument("--formats", default="csv,json,plot-data")
    p.add_argument("--output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "emit":
            return _cmd_emit(args)
        if args.command == "lemma-suite" and getattr(args, "quick", False):
            config = load_config("lemma-suite", args)
            result = run_experiment(config, resume=args.resume, quick=True)
            _print_result(result)
            if not args.no_emit:
                for path in emit(result):
                    print(f"wrote {path}")
            return 0 if result.all_passed() else 1
        return _cmd_experiment(args.command, args)
    except AnnealabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: run (train a sweep), eval (score a saved snapshot), report
(aggregate a finished run directory), rules (dump the Boolean rule sets).
Exit codes: 0 success, 1 configuration error, 2 degenerate statistics,
3 I/O failure.

Configuration precedence for `run`, lowest to highest: profile defaults,
INI config file (--config), the INFOMAX_RESERVOIR_OUT_DIR environment
variable (out_dir only), then command-line flags.  Every config field is
a flag of the same name, e.g. n_neurons in the INI equals --n_neurons.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

from .benchmarks import BenchmarkPhases, enumerate_rules
from .errors import ConfigurationError, DegenerateStatsError
from .io import write_csv
from .runner import (ExperimentConfig, evaluate_checkpoint, full_profile,
                     reduced_profile, run_experiment, sweep_report)

OUT_DIR_ENV = "INFOMAX_RESERVOIR_OUT_DIR"

def _parse_int_tuple(text):
    return tuple(int(v) for v in str(text).replace(",", " ").split())

def _parse_str_tuple(text):
    return tuple(v for v in str(text).replace(",", " ").split())

# field -> (ini section, parser)
FIELD_SPECS = {
    "out_dir": ("run", str),
    "master_seed": ("run", int),
    "n_trials": ("run", int),
    "k_sweep": ("run", _parse_int_tuple),
    "eval_every": ("run", int),
    "tasks": ("run", _parse_str_tuple),
    "n_neurons": ("network", int),
    "sigma2_init": ("network", float),
    "p_max": ("network", float),
    "p_bar": ("network", float),
    "input_rate": ("network", float),
    "epsilon": ("network", float),
    "eta": ("ri", float),
    "block_steps": ("ri", int),
    "settle_fraction": ("ri", float),
    "n_blocks": ("ri", int),
    "washout": ("benchmark", int),
    "learning": ("benchmark", int),
    "testing": ("benchmark", int),
    "tau_max": ("benchmark", int),
}

PROFILES = {"full": full_profile, "reduced": reduced_profile}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as configuration errors."""

    def error(self, message):
        raise ConfigurationError(message)


def _config_to_ini(cfg: ExperimentConfig) -> str:
    ini = configparser.ConfigParser()
    for name, (section, _) in FIELD_SPECS.items():
        if not ini.has_section(section):
            ini.add_section(section)
        v = getattr(cfg, name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        ini.set(section, name, str(v))
    buf = []
    for section in ini.sections():
        buf.append(f"[{section}]")
        for key, val in ini.items(section):
            buf.append(f"{key} = {val}")
        buf.append("")
    return "\n".join(buf)


def _load_ini(path):
    ini = configparser.ConfigParser()
    read = ini.read(path)
    if not read:
        raise ConfigurationError(f"config file {path} not found or unreadable")
    values = {}
    known = {name: section for name, (section, _) in FIELD_SPECS.items()}
    for section in ini.sections():
        for key, raw in ini.items(section):
            if key not in known:
                raise ConfigurationError(f"unknown config field {key!r}")
            if known[key] != section:
                raise ConfigurationError(
                    f"field {key!r} belongs in section [{known[key]}]")
            values[key] = FIELD_SPECS[key][1](raw)
    return values


def _resolve_run_config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(_load_ini(args.config))
    env_out = os.environ.get(OUT_DIR_ENV)
    if env_out:
        values["out_dir"] = env_out
    for name in FIELD_SPECS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if "out_dir" not in values:
        raise ConfigurationError(
            f"out_dir is required (flag --out_dir, config file, or {OUT_DIR_ENV})")
    if args.profile:
        return PROFILES[args.profile](values.pop("out_dir"), **values)
    return ExperimentConfig(**values)


def _add_field_flags(p):
    for name, (_, parse) in FIELD_SPECS.items():
        if parse in (_parse_int_tuple, _parse_str_tuple):
            p.add_argument(f"--{name}", type=parse, default=None,
                           metavar="LIST")
        else:
            p.add_argument(f"--{name}", type=parse, default=None)


def build_parser():
    parser = _Parser(prog="infomax-reservoir",
                     description="Recurrent infomax training and benchmarks "
                                 "for stochastic binary networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train a K sweep and evaluate it")
    p_run.add_argument("--config", help="INI config file")
    p_run.add_argument("--profile", choices=sorted(PROFILES),
                       help="named defaults; explicit fields still override")
    _add_field_flags(p_run)
    p_run.add_argument("--print-config", action="store_true",
                       help="print the resolved config as INI and exit")
    p_run.add_argument("--stop_before_block", type=int, default=None,
                       help="end each trial before this block (partial run)")
    p_run.add_argument("--fresh", action="store_true",
                       help="ignore existing checkpoints instead of resuming")
    p_run.add_argument("--quiet", action="store_true")

    p_eval = sub.add_parser("eval", help="benchmark one saved checkpoint")
    p_eval.add_argument("--snapshot", required=True)
    p_eval.add_argument("--tasks", type=_parse_str_tuple, default=("memory",))
    p_eval.add_argument("--tau_max", type=int, default=50)
    p_eval.add_argument("--washout", type=int, default=50_000)
    p_eval.add_argument("--learning", type=int, default=1500)
    p_eval.add_argument("--testing", type=int, default=1500)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default="-", help="JSON path or - for stdout")

    p_rep = sub.add_parser("report", help="aggregate a run directory")
    p_rep.add_argument("--run_dir", required=True)

    p_rules = sub.add_parser("rules", help="dump a Boolean rule set as CSV")
    p_rules.add_argument("--arity", type=int, choices=(2, 3), required=True)
    p_rules.add_argument("--out", default="-", help="CSV path or - for stdout")
    return parser


def _cmd_run(args) -> int:
    cfg = _resolve_run_config(args)
    if args.print_config:
        sys.stdout.write(_config_to_ini(cfg))
        return 0
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    run_experiment(cfg, stop_before_block=args.stop_before_block,
                   resume=not args.fresh)
    if args.stop_before_block is None:
        sweep_report(cfg.out_dir)
    return 0


def _cmd_eval(args) -> int:
    phases = BenchmarkPhases(washout=args.washout, learning=args.learning,
                             testing=args.testing)
    report = evaluate_checkpoint(args.snapshot, tasks=args.tasks,
                                 phases=phases, tau_max=args.tau_max,
                                 seed=args.seed)
    payload = {}
    for task, score in report.scores.items():
        payload[task] = {
            "total": score.total,
            "per_delay": [float(v) for v in score.per_delay],
        }
        if task in report.rules:
            payload[task]["rules"] = [
                {"rule_id": r.rule_id, "separable": bool(r.separable),
                 "total_test": r.total_test}
                for r in report.rules[task]]
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    return 0


def _cmd_report(args) -> int:
    sweep_report(args.run_dir)
    return 0


def _cmd_rules(args) -> int:
    rows = [(r.arity, r.rule_id, int(r.separable),
             "".join(str(int(b)) for b in r.truth_table))
            for r in enumerate_rules(args.arity)]
    header = ("arity", "rule_id", "separable", "truth_table")
    if args.out == "-":
        sys.stdout.write(",".join(header) + "\n")
        for row in rows:
            sys.stdout.write(",".join(str(v) for v in row) + "\n")
    else:
        write_csv(args.out, header, rows)
    return 0


_COMMANDS = {"run": _cmd_run, "eval": _cmd_eval, "report": _cmd_report,
             "rules": _cmd_rules}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except DegenerateStatsError as err:
        print(f"degenerate statistics: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

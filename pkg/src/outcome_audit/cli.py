"""``outcome-audit`` command line.

Precedence for every setting: command-line flag, then config file, then the
built-in default. Exit status is 0 on success, 1 on a data error and 2 on a
configuration error; each exit writes one ``key=value`` status line to
standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baselines import compare_metrics, infra_marginality_demo
from .counterfactual import counterfactual
from .domain import validate_dataset
from .estimation import SingularDesignError
from .io import (FORMATS, SUBCOMMANDS, DataError, RunConfig, build_run_config,
                 emit_dataset, emit_report, ingest_dataset, load_config_file)
from .outcome_test import AuditError, OffSupportError, audit
from .simulator import ConfigError, simulate

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2
DATA_ERRORS = (DataError, SingularDesignError, OffSupportError, AuditError)


class _Parser(argparse.ArgumentParser):
    # argparse would exit 2 on its own; route through ConfigError for the status line
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="outcome-audit", description=__doc__.split("\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("fixture", nargs="?", help="fixture name (demo only)")
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--input", help="dataset CSV (overrides the config's input)")
    p.add_argument("--seed", type=int, help="scenario seed")
    p.add_argument("--bins", type=int, dest="n_bins", help="number of quantile bins")
    p.add_argument("--level", type=float, help="significance level")
    p.add_argument("--reference", help="reference group label")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", dest="output", help="output path (default: stdout)")
    return p


def _load_dataset(cfg: RunConfig):
    if cfg.input is not None:
        return ingest_dataset(cfg.input, cfg.kind, threshold=cfg.threshold,
                              objective_alpha=cfg.objective_alpha,
                              outcome_scale=cfg.outcome_scale)
    d = simulate(cfg.scenario)
    problems = validate_dataset(d)
    if problems:
        raise DataError(f"simulated dataset failed validation: {problems[0]}")
    return d


def run(cfg: RunConfig) -> int:
    """Execute one validated run; errors propagate to :func:`main`."""
    if cfg.subcommand == "simulate":
        emit_dataset(simulate(cfg.scenario), cfg.output)
        return EXIT_OK
    if cfg.subcommand == "demo":
        emit_report(infra_marginality_demo(cfg.fixture), cfg.format, cfg.output)
        return EXIT_OK
    d = _load_dataset(cfg)
    report = audit(d, n_bins=cfg.n_bins, reference=cfg.reference, level=cfg.level,
                   covariance=cfg.covariance)
    if cfg.subcommand == "audit":
        out = report
    elif cfg.subcommand == "counterfactual":
        out = counterfactual(d, report, cfg.below_threshold)
    else:
        out = compare_metrics(d, report, eo_bins=cfg.eo_bins, eo_tolerance=cfg.eo_tolerance,
                              precision_tolerance=cfg.precision_tolerance)
    emit_report(out, cfg.format, cfg.output)
    return EXIT_OK


def _status(code: int, subcommand: str | None, **extra) -> str:
    state = {EXIT_OK: "ok", EXIT_DATA: "data_error", EXIT_CONFIG: "config_error"}[code]
    parts = [f"status={state}", f"exit={code}", f"subcommand={subcommand or '-'}"]
    parts += [f"{k}={json.dumps(str(v))}" for k, v in extra.items()]
    return "outcome-audit " + " ".join(parts)


def main(argv: list[str] | None = None) -> int:
    sub = None
    try:
        args = build_parser().parse_intermixed_args(argv)
        sub = args.subcommand
        if args.fixture is not None and sub != "demo":
            raise ConfigError(f"unexpected positional argument {args.fixture!r}")
        file_cfg = load_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k) for k in
                     ("input", "seed", "n_bins", "level", "reference", "format", "output",
                      "fixture")}
        cfg = build_run_config(sub, file_cfg, overrides)
        code = run(cfg)
        print(_status(code, sub, out=cfg.output or "stdout"), file=sys.stderr)
        return code
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, exc
    except DATA_ERRORS as exc:
        code, msg = EXIT_DATA, exc
    except (KeyError, ValueError, OSError) as exc:
        # anything else raised while reading or fitting the data
        code, msg = EXIT_DATA, exc
    print(f"error: {msg}", file=sys.stderr)
    print(_status(code, sub, message=str(msg).splitlines()[0] if str(msg) else type(msg).__name__),
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

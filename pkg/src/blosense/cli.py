"""Command-line front end.

    blosense [--scenario FILE] [--seed N] [--out DIR] [--format csv|json] COMMAND

Commands: analytic, fit SQ_DB ANTI_DB, sweep-gain, sweep-phase, spectrum,
calibrate-sql. Reports go to ``--out`` (default ``$BLOSENSE_OUT`` or
``./blosense-out``). Failures print one JSON line on stderr and exit with
2 (usage/parse), 3 (validation) or 4 (runtime).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiments, model
from .report import ReportError, write_report
from .scenario import Scenario, ScenarioError, parse_scenario, scenario_from_mapping
from .timesim import TrialError

log = logging.getLogger("blosense")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4
OUT_ENV = "BLOSENSE_OUT"
COMMANDS = ("analytic", "fit", "sweep-gain", "sweep-phase", "spectrum", "calibrate-sql")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blosense", description="Bichromatic-LO squeezed-light detection simulator")
    p.add_argument("--scenario", type=Path, help="INI scenario file (defaults apply to missing keys)")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="override the scenario seed")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV} or ./blosense-out)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analytic", help="closed-form variances only (no Monte Carlo)")
    a.add_argument("--squeezing-db", type=float)
    a.add_argument("--antisqueezing-db", type=float, help="defaults to --squeezing-db, i.e. Ne = 0")
    f = sub.add_parser("fit", help="invert measured dB levels into (r, Ne)")
    f.add_argument("squeezing_db", type=float)
    f.add_argument("antisqueezing_db", type=float)
    sub.add_parser("sweep-gain", help="conditional quadratures against g^2")
    sub.add_parser("sweep-phase", help="normalised variance against LO phase")
    s = sub.add_parser("spectrum", help="vacuum / squeezed / optimised spectra")
    s.add_argument("--gain", type=float, help="idler gain for the optimised trace (default: closed-form g_opt)")
    sub.add_parser("calibrate-sql", help="SQL reference spectrum")
    return p


def _load(args) -> Scenario:
    scn = parse_scenario(args.scenario) if args.scenario else Scenario()
    if args.seed is not None:
        try:
            scn = scn.with_(seed=args.seed)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
    return scn


def _print(pairs: dict) -> None:
    for k, v in pairs.items():
        print(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")


def dispatch(command: str, scenario: Scenario, out: Path, fmt: str = "csv", args=None) -> list[Path]:
    """Run one command and write its report; returns the written paths."""
    if command == "analytic":
        if args is not None and args.squeezing_db is not None:
            anti = args.antisqueezing_db if args.antisqueezing_db is not None else args.squeezing_db
            m = {"source": {"squeezing_db": str(args.squeezing_db), "antisqueezing_db": str(anti)}}
            scenario = scenario.with_(params=scenario_from_mapping(m).params)
        table = experiments.analytic_table(scenario)
        md = table.metadata
        _print({k: md[k] for k in model.VarianceReport.__dataclass_fields__})
        _print({"min_conditional_db": md["min_conditional_db"]})
    elif command == "fit":
        table = experiments.fit_table(args.squeezing_db, args.antisqueezing_db)
        md = table.metadata
        _print({"e_minus_2r": md["e_minus_2r"], "extra_noise": md["extra_noise"], "r": md["r"],
                "g_opt": md["g_opt"], "min_conditional_db": md["min_conditional_db"]})
    elif command == "sweep-gain":
        table = experiments.sweep_gain(scenario)
        _print({"g_opt_squared": table.metadata["g_opt_squared"],
                "measured_argmin_g2": table.metadata["measured_argmin_g2"]})
    elif command == "sweep-phase":
        table = experiments.sweep_phase(scenario)
        _print({"gain_g": table.metadata["gain_g"], "measured_min_db": table.metadata["measured_min_db"],
                "analytic_min_db": model.variance_to_dB(table.metadata["analytic_phase_quadrature"])})
    elif command == "spectrum":
        run = experiments.spectrum_run(scenario, gain=getattr(args, "gain", None))
        table = run.to_table()
        md = table.metadata
        for role in experiments.SPECTRUM_ROLES:
            _print({f"{role}.floor_db": md[f"{role}.floor_db"], f"{role}.snr_db": md[f"{role}.snr_db"],
                    f"{role}.signal_detected": md[f"{role}.signal_detected"]})
        _print({"snr_improvement_db": run.snr_improvement, "peak_spread_db": run.peak_spread_db})
    elif command == "calibrate-sql":
        table = experiments.calibration_table(experiments.calibrate_sql(scenario), scenario)
        _print({"mean_level": table.metadata["mean_level"], "n_eff": table.metadata["n_eff"]})
    else:
        raise UsageError(f"unknown command {command!r}")
    files = write_report(table, out, fmt)
    for path in files:
        log.info("wrote %s", path)
    return files


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": " ".join(str(message).split())}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out or Path(os.environ.get(OUT_ENV, "blosense-out"))
    try:
        scenario = _load(args)
        dispatch(args.command, scenario, out, args.format, args)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except ScenarioError as exc:
        code = EXIT_USAGE if exc.kind == "parse" else EXIT_VALIDATION
        return _fail(exc.kind, code, exc)
    except ReportError as exc:
        return _fail("io", EXIT_RUNTIME, exc)
    except (TrialError, RuntimeError, ArithmeticError, MemoryError) as exc:
        return _fail("runtime", EXIT_RUNTIME, exc)
    except ValueError as exc:
        return _fail("validation", EXIT_VALIDATION, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

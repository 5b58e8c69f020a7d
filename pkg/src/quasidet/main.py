from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from . import __version__
from .commands import cmd_analyze, cmd_demo_pauli, cmd_simulate, cmd_tomography
from .config import AppConfig, load_config
from .errors import ParameterError, QuasidetError
from .logging_setup import setup_logging
from .report_store import ReportBundle
from .reporter import Reporter


logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_IDENTITY_FAILURE = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become input errors (exit 1); exit 2 is reserved for failed identity checks."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ParameterError(f"{self.prog}: {message}")


def parse_couplings(text: str) -> List[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ParameterError(f"--couplings expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise ParameterError("--couplings is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="Output directory (default: paths.out_dir).")
    common.add_argument("--config", type=Path, default=None, help="App config YAML (default: $QUASIDET_CONFIG or quasidet.yaml).")
    common.add_argument("--format", choices=["csv", "json"], default=None, help="Table file format.")
    common.add_argument("--tol-identity", type=float, default=None, help="Tolerance for the identity checks.")
    common.add_argument("--tol-basis", type=float, default=None, help="Orthonormality tolerance for final bases.")
    common.add_argument("--log-level", default=None)
    common.add_argument("--quiet", action="store_true", help="Do not print tables to stdout.")

    sim = _ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--shots", type=int, default=None)
    sim.add_argument("--couplings", default=None, help="Extrapolation couplings in units of sigma, e.g. 0.05,0.1,0.2.")

    ap = _ArgumentParser(prog="quasidet", description="Weak values and conditional uncertainties of post-selected ensembles.")
    ap.add_argument("--version", action="version", version=f"quasidet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("analyze", parents=[common], help="Exact weak values, quasi-probabilities and identity checks.")
    p.add_argument("scenario", help="Scenario YAML file, or 'pauli_demo'.")

    p = sub.add_parser("simulate", parents=[common, sim], help="Monte Carlo weak measurement and extrapolation.")
    p.add_argument("scenario")

    p = sub.add_parser("tomography", parents=[common, sim], help="Reconstruct the transient density operator.")
    p.add_argument("scenario")
    p.add_argument("--mode", choices=["complex", "hermitian-part"], default=None)
    p.add_argument("--source", choices=["exact", "simulated"], default=None)

    sub.add_parser("demo", parents=[common, sim], help="Built-in Pauli paradox scenario: analyze + simulate.")
    return ap


def _apply_overrides(cfg: AppConfig, args: argparse.Namespace) -> AppConfig:
    tol_update = {}
    if args.tol_identity is not None:
        tol_update["identity"] = args.tol_identity
    if args.tol_basis is not None:
        tol_update["basis"] = args.tol_basis
    update = {}
    if tol_update:
        update["tolerances"] = type(cfg.tolerances).model_validate({**cfg.tolerances.model_dump(), **tol_update})
    if args.format is not None:
        update["output"] = cfg.output.model_copy(update={"format": args.format})
    if args.log_level is not None:
        update["log_level"] = args.log_level
    return cfg.model_copy(update=update) if update else cfg


def _describe(exc: BaseException) -> str:
    if isinstance(exc, ValidationError):
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        return f"{loc}: {err['msg']}" if loc else str(err["msg"])
    return str(exc)


def run(args: argparse.Namespace) -> ReportBundle:
    cfg = _apply_overrides(load_config(args.config), args)
    setup_logging(cfg.paths.logs_dir, level=os.environ.get("QUASIDET_LOG_LEVEL", cfg.log_level))
    out_dir = args.out if args.out is not None else cfg.paths.out_dir
    logger.info("command=%s out=%s", args.command, out_dir)

    couplings = parse_couplings(args.couplings) if getattr(args, "couplings", None) else None
    sim_overrides = dict(
        shots=getattr(args, "shots", None),
        seed=getattr(args, "seed", None),
        couplings=couplings,
    )
    if args.command == "analyze":
        return cmd_analyze(args.scenario, out_dir, cfg)
    if args.command == "simulate":
        return cmd_simulate(args.scenario, out_dir, cfg, **sim_overrides)
    if args.command == "tomography":
        return cmd_tomography(args.scenario, out_dir, cfg, mode=args.mode, source=args.source, **sim_overrides)
    if args.command == "demo":
        return cmd_demo_pauli(out_dir, cfg, **sim_overrides)
    raise ParameterError(f"unknown command {args.command!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()

    try:
        args = build_parser().parse_args(argv)
        bundle = run(args)
    except (QuasidetError, ValidationError, yaml.YAMLError, OSError) as exc:
        print(f"error: {_describe(exc)}", file=sys.stderr)
        logger.error("input error: %s", _describe(exc))
        return EXIT_INPUT_ERROR

    if not args.quiet:
        print(Reporter().render_bundle(bundle))
    if not bundle.identity_passed:
        logger.error("identity checks failed; see identity_checks in %s", args.out or "the output directory")
        return EXIT_IDENTITY_FAILURE
    logger.info("done")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

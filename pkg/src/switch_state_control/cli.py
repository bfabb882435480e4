"""
Command-line interface for switch-state control.

Subcommands:
    synth            synthesize the controller and print its gains
    sim              simulate a configuration or a named preset
    sweep-beta       steady-window metrics over a list of transition penalties
    oracle-compare   compare the policy with exhaustive search and value iteration

Exit codes: 0 on success, 2 for configuration or parameter errors, 3 for
numeric failures (instability, divergence, singularity, non-convergence).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .errors import ConfigError, MetricsError, NumericalError, ParameterError
from .oracle import MAX_AGREEMENT_HORIZON, compare_horizon, first_action_agreement
from .oracle import grid_policy_agreement, grid_value_iteration
from .report import build_summary, synthesis_summary
from .scenarios import PRESETS, design, run_config, run_preset, sweep_beta
from .utils.config_loader import RunConfig, apply_overrides, config_hash, load_document
from .utils.config_loader import parse_document, reference_document
from .utils.custom_logger import setup_run_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# Grid box (p.u.) covering the startup trajectory and its successors.
ORACLE_BOX = ((-0.5, 1.5), (-1.5, 2.5))


def _split_inputs(inputs: Sequence[str]) -> Tuple[Optional[str], List[str]]:
    """Separate an optional config path from key=value overrides."""
    config_path = None
    overrides = []
    for item in inputs:
        if "=" in item:
            overrides.append(item)
        elif config_path is None:
            config_path = item
        else:
            raise ConfigError(f"unexpected argument '{item}' (overrides look like key=value)")
    return config_path, overrides


def _document(config_path: Optional[str]) -> Dict[str, Any]:
    return load_document(config_path) if config_path else reference_document()


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config_path, overrides = _split_inputs(args.inputs)
    if args.seed is not None:
        overrides.append(f"sim.seed={args.seed}")
    return parse_document(apply_overrides(_document(config_path), overrides))


def _print_json(data: Dict[str, Any]) -> None:
    print(json.dumps(data, indent=2))


def _write_json(path: Path, data: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")
    logger.info(f"Report written to {path}")


def cmd_synth(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    d = design(config, literal_signs=args.literal_signs)
    summary = synthesis_summary(config, d)
    _write_json(Path(args.out) / "synth.json", summary)
    _print_json(summary)
    return EXIT_OK


def cmd_sim(args: argparse.Namespace) -> int:
    config_path, overrides = _split_inputs(args.inputs)
    if args.seed is not None:
        overrides.append(f"sim.seed={args.seed}")

    if args.preset:
        base = load_document(config_path) if config_path else None
        result = run_preset(
            args.preset, overrides, literal_signs=args.literal_signs, base_document=base
        )
    else:
        config = parse_document(apply_overrides(_document(config_path), overrides))
        result = run_config(config, literal_signs=args.literal_signs)

    config = result.config
    out = Path(args.out)
    csv_path = out / config.output.csv_path
    result.trace.to_csv(csv_path, config_hash=config_hash(config))
    logger.info(f"Trace written to {csv_path}")
    summary = build_summary(result)
    summary.write(out / config.output.summary_path)

    if args.plot:
        from .plotting import plot_trace

        plot_trace(
            result.trace,
            csv_path.with_suffix(".png"),
            r_v=config.controller.vref_pu,
            title=result.name,
        )

    if result.metrics is not None:
        _print_json({"scenario": result.name, "metrics": result.metrics.to_dict()})
    else:
        _print_json({"scenario": result.name, "metrics_error": result.metrics_error})
    return EXIT_OK


def _parse_values(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ParameterError(f"--values must be a comma-separated list of numbers: {e}") from e
    if not values:
        raise ParameterError("--values is empty")
    return values


def cmd_sweep_beta(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    rows = sweep_beta(
        _parse_values(args.values),
        config,
        max_workers=args.workers,
        literal_signs=args.literal_signs,
    )
    report = {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "seed": config.sim.seed,
        "rows": [row.to_dict() for row in rows],
    }
    _write_json(Path(args.out) / "sweep_beta.json", report)
    print(f"{'beta':>10} {'switches':>9} {'ripple_pp':>12} {'settling_s':>12} {'f_sw_hz':>10}")
    for row in rows:
        settling = f"{row.settling_time:.6g}" if row.settling_time is not None else "-"
        print(
            f"{row.beta:>10g} {row.switch_count:>9d} {row.ripple_pp:>12.6g} "
            f"{settling:>12} {row.mean_switching_frequency:>10.1f}"
        )
    return EXIT_OK


def cmd_oracle_compare(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    d = design(config, literal_signs=args.literal_signs)
    N = args.horizon

    start = compare_horizon(d.model, d.spec, d.pol, config.sim.x0, config.sim.z0, N)
    rng = np.random.default_rng(config.sim.seed)
    lows = np.array([lo for lo, _ in ORACLE_BOX])
    highs = np.array([hi for _, hi in ORACLE_BOX])
    states = rng.uniform(lows, highs, size=(args.samples, d.model.n))

    gaps = [compare_horizon(d.model, d.spec, d.pol, x, 0, N).gap for x in states]
    agreement = first_action_agreement(
        d.model, d.spec, d.pol, states, N=min(N, MAX_AGREEMENT_HORIZON)
    )
    report: Dict[str, Any] = {
        "horizon": N,
        "best_cost": start.best_cost,
        "policy_cost": start.policy_cost,
        "gap": start.gap,
        "tail_bound": agreement.tail_bound,
        "agreement_fraction": agreement.fraction,
        "strict_agreement_fraction": agreement.strict_fraction,
        "agreement_horizon": agreement.horizon,
        "samples": args.samples,
        "sample_gap_min": float(min(gaps)) if gaps else None,
        "sample_gap_max": float(max(gaps)) if gaps else None,
        "clamped_successor_count": None,
    }
    if args.grid_resolution > 0:
        grid = grid_value_iteration(
            d.model, d.spec, ORACLE_BOX, args.grid_resolution, max_sweeps=args.grid_sweeps
        )
        report.update(
            {
                "clamped_successor_count": grid.clamped_successor_count,
                "grid_resolution": grid.resolution,
                "grid_sweeps": grid.sweeps,
                "grid_converged": grid.converged,
                "grid_last_change": grid.history[-1],
                "grid_policy_agreement": grid_policy_agreement(grid, d.pol),
                "grid_hysteresis_violations": grid.hysteresis_violations(),
            }
        )
    _write_json(Path(args.out) / "oracle_compare.json", report)
    _print_json(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "inputs",
        nargs="*",
        help="optional config path followed by key=value overrides (e.g. controller.beta=100)",
    )
    common.add_argument("--seed", type=int, default=None, help="noise generator seed")
    common.add_argument(
        "--literal-signs",
        action="store_true",
        help="build the continuous model with +1/L coupling (fails the stability gate)",
    )
    common.add_argument("--out", default="out", help="output directory (created if absent)")
    common.add_argument("--plot", action="store_true", help="write PNG figures (needs matplotlib)")
    common.add_argument("--verbose", "-v", action="store_true", help="show debug logs")
    common.add_argument("--log-file", default=None, help="log file (default: <out>/run.log)")

    parser = argparse.ArgumentParser(
        prog="switch-control",
        description="Optimal switch-state on-off control of binary-actuated plants",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesize and print controller gains")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sim", parents=[common], help="simulate a configuration or preset")
    p.add_argument("--preset", choices=PRESETS, default=None, help="named experiment")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("sweep-beta", parents=[common], help="sweep the transition penalty")
    p.add_argument("--values", required=True, help="comma-separated beta values")
    p.add_argument("--workers", type=int, default=1, help="parallel runs")
    p.set_defaults(func=cmd_sweep_beta)

    p = sub.add_parser("oracle-compare", parents=[common], help="compare against exact references")
    p.add_argument("--horizon", type=int, default=12, help="enumeration horizon (<= 20)")
    p.add_argument("--samples", type=int, default=200, help="random initial states")
    p.add_argument(
        "--grid-resolution", type=int, default=41, help="value-iteration points per axis, 0 skips"
    )
    p.add_argument("--grid-sweeps", type=int, default=300, help="value-iteration sweep limit")
    p.set_defaults(func=cmd_oracle_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    log_path = args.log_file or str(Path(args.out) / "run.log")
    setup_run_logging(log_path, verbose=args.verbose)

    try:
        return int(args.func(args))
    except (ConfigError, ParameterError, MetricsError) as e:
        logger.debug("Configuration failure", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        logger.debug("Numeric failure", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC

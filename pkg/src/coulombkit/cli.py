"""Command-line front end.

Three workflows over a scenario JSON file:

    coulombkit allocate scenario.json      one allocation, JSON on stdout
    coulombkit sweep scenario.json         per-epsilon diagnostics, CSV on stdout
    coulombkit simulate scenario.json --out DIR
                                           maneuver run; writes trajectory.csv
                                           and summary.json

Exit codes: 0 success, 2 validation error, 3 solver failure with
thruster-only fallback (the result is still printed). Charges print in
microcoulombs; forces in newtons; positions in meters.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .allocator import allocate, default_epsilon_set
from .scenario import Scenario, ScenarioError, dump_normalized, load_scenario
from .sim import TrajectoryLog, run_maneuver
from . import sdp

_AXES = "xyz"


def _fmt(value: float) -> str:
    """CSV number format: 9 significant digits."""
    return f"{value:.9g}"


def _parse_epsilon_list(text: str) -> np.ndarray:
    try:
        values = np.array([float(tok) for tok in text.split(",") if tok.strip()])
    except ValueError as exc:
        raise ScenarioError(f"bad --epsilon-list: {exc}") from exc
    if values.size == 0:
        raise ScenarioError("--epsilon-list is empty")
    return values


def _resolve_epsilons(args, scenario: Scenario, f_norm: float) -> np.ndarray:
    """Flag overrides, then the scenario's epsilon_set, then the default grid."""
    if args.epsilon_list is not None:
        return _parse_epsilon_list(args.epsilon_list)
    if args.epsilon_count is not None:
        return default_epsilon_set(f_norm, args.epsilon_count)
    spec = scenario.epsilon_set
    if spec is not None:
        if spec.mode == "explicit":
            return spec.values
        return default_epsilon_set(f_norm, spec.count)
    return default_epsilon_set(f_norm)


def _require_command(scenario: Scenario) -> np.ndarray:
    if scenario.command is None:
        raise ScenarioError("this workflow needs a 'command' section in the scenario")
    return scenario.command


def cmd_allocate(args, scenario: Scenario) -> int:
    f_cmd = _require_command(scenario)
    f_norm = float(np.linalg.norm(f_cmd))
    epsilons = None if f_norm == 0.0 else _resolve_epsilons(args, scenario, f_norm)
    result = allocate(scenario.formation, f_cmd, epsilons=epsilons, tol=args.tol)
    payload = {
        "charges_microcoulomb": (result.charges * 1e6).tolist(),
        "thrusts_newton": result.thrusts.tolist(),
        "chosen_epsilon": result.chosen_epsilon,
        "thrust_norm_newton": result.thrust_norm,
        "percent_error": result.percent_error,
        "propellant_newton": result.propellant,
        "thruster_only_propellant_newton": result.thruster_only_propellant,
        "reduction_percent": result.reduction_percent,
        "all_epsilon_failed": result.all_failed,
    }
    print(json.dumps(payload, indent=2))
    if result.all_failed:
        print("warning: no epsilon admitted a Coulomb fit; thruster-only fallback",
              file=sys.stderr)
        return 3
    return 0


def cmd_sweep(args, scenario: Scenario) -> int:
    f_cmd = _require_command(scenario)
    f_norm = float(np.linalg.norm(f_cmd))
    if f_norm == 0.0:
        raise ScenarioError("sweep needs a nonzero command")
    epsilons = _resolve_epsilons(args, scenario, f_norm)
    result = allocate(scenario.formation, f_cmd, epsilons=epsilons, tol=args.tol)
    n = scenario.formation.count
    header = (
        ["epsilon", "residual", "trace"]
        + [f"eig{k + 1}" for k in range(n)]
        + ["percent_error", "thrust_norm"]
    )
    lines = [",".join(header)]
    for diag in result.diagnostics:
        eigs = list(diag.eigenvalues) if diag.eigenvalues.size else [float("nan")] * n
        row = [diag.epsilon, diag.residual, diag.trace, *eigs,
               diag.percent_error, diag.thrust_norm]
        lines.append(",".join(_fmt(v) for v in row))
    print("\n".join(lines))
    return 3 if result.all_failed else 0


def _trajectory_csv(log: TrajectoryLog, n: int, d: int) -> str:
    axes = _AXES[:d]
    header = (
        ["t"]
        + [f"xi{i + 1}_{a}" for i in range(n - 1) for a in axes]
        + [f"fcmd_{k + 1}" for k in range(d * (n - 1))]
        + [f"q{i + 1}_microC" for i in range(n)]
        + [f"T{i + 1}_{a}" for i in range(n) for a in axes]
        + ["percent_error", "propellant_cum"]
    )
    lines = [",".join(header)]
    cumulative = 0.0
    for rec in log.records:
        cumulative += rec.propellant_increment
        row = (
            [rec.time]
            + list(rec.xi.reshape(-1))
            + list(rec.f_cmd)
            + list(rec.charges * 1e6)
            + list(rec.thrusts.reshape(-1))
            + [rec.percent_error, cumulative]
        )
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def cmd_simulate(args, scenario: Scenario) -> int:
    if scenario.maneuver is None:
        raise ScenarioError("simulate needs a 'maneuver' section in the scenario")
    cfg = scenario.maneuver
    if args.epsilon_count is not None:
        cfg = dataclasses.replace(cfg, epsilon_count=args.epsilon_count,
                                  epsilon_values=None)
    if args.epsilon_list is not None:
        cfg = dataclasses.replace(cfg, epsilon_values=_parse_epsilon_list(args.epsilon_list))
    log, summary = run_maneuver(cfg, tol=args.tol)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trajectory.csv").write_text(
        _trajectory_csv(log, cfg.count, cfg.dimension)
    )
    summary_text = json.dumps(summary, indent=2)
    (out_dir / "summary.json").write_text(summary_text + "\n")
    print(summary_text)
    fallback_steps = sum(1 for rec in log.records if rec.fallback)
    if fallback_steps == len(log.records) and log.records:
        print("warning: every step fell back to thruster-only allocation",
              file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coulombkit",
        description="Control allocation for hybrid Coulomb spacecraft formations",
    )
    sub = parser.add_subparsers(dest="workflow", required=True)
    for name, func, helptext in (
        ("allocate", cmd_allocate, "split one relative-force command"),
        ("sweep", cmd_sweep, "per-epsilon diagnostics as CSV"),
        ("simulate", cmd_simulate, "run a reconfiguration maneuver"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("scenario", type=Path, help="scenario JSON file")
        p.add_argument("--epsilon-count", type=int, default=None,
                       help="size of the linear epsilon grid")
        p.add_argument("--epsilon-list", type=str, default=None,
                       help="comma-separated explicit epsilon values")
        p.add_argument("--tol", type=float, default=sdp.DEFAULT_TOL,
                       help="solver convergence tolerance")
        p.add_argument("--dump-normalized", action="store_true",
                       help="print the normalized scenario and exit")
        if name == "simulate":
            p.add_argument("--out", type=Path, default=Path("."),
                           help="output directory for trajectory.csv and summary.json")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.dump_normalized:
            print(dump_normalized(scenario))
            return 0
        return args.func(args, scenario)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

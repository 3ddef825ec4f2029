"""Command line front end.

Subcommands::

    run       run a preset experiment and write its CSV
    ruin      evaluate one ruin probability (analytic series or Monte Carlo)
    solve     association + offloading on a single scenario, decisions to CSV
    validate  check a config file and report per-field errors

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from . import harness
from .ruin import SurplusParams, ruin_probability_analytic, ruin_probability_mc
from .scenario import ConfigValidationError, validate_config

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecsim",
        description="Buffer-aware user association and task offloading simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset experiment and emit CSV")
    run.add_argument("--preset", required=True,
                     help=f"preset name ({', '.join(harness.PRESET_NAMES)}) or TOML path")
    run.add_argument("--config", help="optional config TOML overriding preset sections")
    run.add_argument("--reps", type=int, help="override preset replication count")
    run.add_argument("--seed", type=int, help="override preset master seed")
    run.add_argument("--out", required=True, help="destination CSV path")

    ruin = sub.add_parser("ruin", help="evaluate a single ruin probability")
    ruin.add_argument("--initial", type=float, required=True, help="initial surplus")
    ruin.add_argument("--premium", type=float, required=True, help="surplus gained per slot")
    ruin.add_argument("--mu", type=float, required=True, help="exponential claim rate (1/size)")
    ruin.add_argument("--lambda", dest="lam", type=float, default=1.0,
                      help="claim intensity per slot (Monte Carlo only)")
    ruin.add_argument("--horizon", type=float, default=50.0, help="slots simulated (Monte Carlo only)")
    ruin.add_argument("--epsilon", type=float, default=0.0, help="ruin threshold (Monte Carlo only)")
    ruin.add_argument("--schedule", choices=("poisson", "per_slot"), default="poisson",
                      help="claim arrival model (Monte Carlo only)")
    ruin.add_argument("--seed", type=int, default=0)
    ruin.add_argument("--digits", type=int, default=6, help="significant digits printed")
    mode = ruin.add_mutually_exclusive_group()
    mode.add_argument("--analytic-terms", type=int, help="evaluate the analytic series with N terms")
    mode.add_argument("--paths", type=int, help="Monte Carlo with N paths")

    solve = sub.add_parser("solve", help="association + offloading on one scenario")
    solve.add_argument("--config", required=True)
    solve.add_argument("--out", required=True)
    solve.add_argument("--seed", type=int, help="override config experiment seed")
    solve.add_argument("--method", choices=("ruin", "greedy", "uncapped"), default="ruin")

    validate = sub.add_parser("validate", help="validate a config file")
    validate.add_argument("--config", required=True)

    return parser


def _load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _cmd_run(args) -> int:
    override = _load_toml(args.config) if args.config else None
    preset = harness.load_preset(
        args.preset, replications=args.reps, seed=args.seed, config_override=override
    )
    result = harness.run_experiment(preset)
    n_bytes = harness.emit_csv(result, args.out)
    print(f"wrote {n_bytes} bytes ({len(result.rows)} rows) to {args.out}")
    return 0


def _cmd_ruin(args) -> int:
    if args.analytic_terms is not None:
        estimate = ruin_probability_analytic(args.initial, args.premium, args.mu, args.analytic_terms)
    else:
        params = SurplusParams(
            initial_surplus=args.initial,
            premium_rate=args.premium,
            claim_intensity=args.lam,
            claim_mean_param=args.mu,
            horizon=args.horizon,
            epsilon=args.epsilon,
            claim_schedule=args.schedule,
        )
        estimate = ruin_probability_mc(params, args.paths or 10_000, args.seed)
    print(f"{estimate.probability:.{args.digits}g}")
    if estimate.method == "monte_carlo":
        print(f"std_error {estimate.std_error:.{args.digits}g}", file=sys.stderr)
    if estimate.clamped:
        print("warning: series clamped into [0, 1]", file=sys.stderr)
    return 0


def _cmd_solve(args) -> int:
    config = validate_config(_load_toml(args.config))
    seed = args.seed if args.seed is not None else config.seed
    _, assoc, records = harness.solve_scenario(config, seed, args.method)
    n_bytes = harness.write_solve_csv(records, args.out)
    associated = sum(1 for r in records if r["server"] >= 0)
    print(f"associated {associated}/{len(records)} users; wrote {n_bytes} bytes to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    validate_config(_load_toml(args.config))
    print("configuration valid")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold into the config-error code
        return 0 if exc.code in (0, None) else 1

    commands = {
        "run": _cmd_run,
        "ruin": _cmd_ruin,
        "solve": _cmd_solve,
        "validate": _cmd_validate,
    }
    try:
        return commands[args.command](args)
    except ConfigValidationError as exc:
        for path, reason in exc.errors:
            print(f"config error: {path}: {reason}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except tomllib.TOMLDecodeError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

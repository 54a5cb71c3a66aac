"""Command-line interface.

    bq run --config <path>      execute a scenario from a config file
    bq audit --model <name> [k=v ...]   coefficient assumption audit
    bq mms                      manufactured-solution convergence suite
    bq list-scenarios           print the available scenario names

Exit codes: 0 pass, 1 assertion failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .coefficients import audit_assumptions, get_model
from .harness import (
    ConfigError,
    HarnessConfig,
    SCENARIO_NAMES,
    parse_config,
    run_scenario,
)


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    report = run_scenario(cfg)
    print(report.summary())
    return 0 if report.ok else 1


def _cmd_audit(args) -> int:
    params = {}
    for item in args.params:
        if "=" not in item:
            raise ConfigError(f"model parameter must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            params[key] = float(raw)
        except ValueError:
            raise ConfigError(f"cannot parse parameter value {raw!r} for {key}") from None
    try:
        model = get_model(args.model, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    report = audit_assumptions(model, args.tau_lo, args.tau_hi, args.samples)
    print(f"model {model.name}: {'PASS' if report.ok else 'FAIL'}")
    for name, margin in sorted(report.margins.items()):
        print(f"  {name}: worst margin {margin:.6g}")
    for v in report.violations:
        print(f"  VIOLATION {v.assumption} at tau={v.tau:.6g}: lhs={v.lhs:.6g} rhs={v.rhs:.6g}")
    return 0 if report.ok else 1


def _cmd_mms(args) -> int:
    cfg = HarnessConfig(scenario={"name": "mms_convergence"}, output={"dir": args.outdir})
    report = run_scenario(cfg)
    print(report.summary())
    return 0 if report.ok else 1


def _cmd_list(args) -> int:
    for name in SCENARIO_NAMES:
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario from a config file")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.set_defaults(func=_cmd_run)

    p_audit = sub.add_parser("audit", help="audit a coefficient model's assumptions")
    p_audit.add_argument("--model", required=True)
    p_audit.add_argument("params", nargs="*", help="model parameters as key=value")
    p_audit.add_argument("--tau-lo", type=float, default=-20.0)
    p_audit.add_argument("--tau-hi", type=float, default=20.0)
    p_audit.add_argument("--samples", type=int, default=10_000)
    p_audit.set_defaults(func=_cmd_audit)

    p_mms = sub.add_parser("mms", help="manufactured-solution convergence suite")
    p_mms.add_argument("--outdir", default="bq_out_mms")
    p_mms.set_defaults(func=_cmd_mms)

    p_list = sub.add_parser("list-scenarios", help="print available scenarios")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())

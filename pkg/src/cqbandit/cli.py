"""``cqbandit`` command line.

Exit codes: 0 success, 1 I/O error, 2 infeasible or invalid input, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .acceptance import SUITES, run_suite
from .dual import ScheduleError
from .experiment import PRESETS, ConfigError, load_config, override, resolve_instance, run_experiment
from .instances import InstanceError
from .oracle import LpInfeasible, slater_margin, solve_tightened

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_USAGE = 0, 1, 2, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _err(msg: str, code: int) -> int:
    print(f"cqbandit: {msg}", file=sys.stderr)
    return code


def _load(source: str, T: int = 10_000):
    if source not in PRESETS and not Path(source).is_file():
        raise FileNotFoundError(f"no such instance file or preset: {source}")
    return resolve_instance(source, T)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        return _err(f"cannot read config: {exc}", EXIT_IO)
    except ConfigError as exc:
        return _err(f"invalid config: {exc}", EXIT_INVALID)
    try:
        cfg = override(
            cfg, T=args.T, n_replications=args.replications, base_seed=args.base_seed, policy=args.policy,
            schedule=args.schedule, output_dir=args.output_dir, workers=args.workers, delta=args.delta,
            trace_confidence=True if args.trace_confidence else None,
            realized_regret=True if args.realized_regret else None,
        )
        summary = run_experiment(cfg)
    except OSError as exc:
        return _err(str(exc), EXIT_IO)
    except (ConfigError, InstanceError, ScheduleError, LpInfeasible, ValueError) as exc:
        return _err(f"invalid experiment: {exc}", EXIT_INVALID)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_baseline(args) -> int:
    try:
        inst = _load(args.instance)
    except OSError as exc:
        return _err(str(exc), EXIT_IO)
    except InstanceError as exc:
        return _err(f"invalid instance: {exc}", EXIT_INVALID)
    sol = solve_tightened(inst, args.eps)
    if not sol.optimal:
        print(f"status: infeasible (eps={args.eps!r})")
        return EXIT_INVALID
    try:
        margin = slater_margin(inst)
    except LpInfeasible:
        margin = float("nan")
    print("status: optimal")
    print(f"objective: {sol.objective!r}")
    print(f"margin: {' '.join(repr(float(m)) for m in sol.active_margin)}")
    print(f"delta_star: {margin!r}")
    print("x:")
    print("context," + ",".join(f"a{j}" for j in range(inst.J)))
    for c, row in enumerate(sol.x):
        print(f"{c}," + ",".join("%.17g" % v for v in row))
    return EXIT_OK


def cmd_instance_validate(args) -> int:
    try:
        inst = _load(args.file)
    except OSError as exc:
        return _err(str(exc), EXIT_IO)
    except (InstanceError, LpInfeasible, ValueError) as exc:
        return _err(f"invalid instance: {exc}", EXIT_INVALID)
    r = inst.mean_rewards
    w = inst.mean_costs
    print(f"ok: {inst.name}: |C|={inst.n_contexts} J={inst.J} d={inst.d} K={inst.K} T={inst.T} "
          f"cost={'linear' if inst.linear_cost else 'tabular'} delta={inst.delta}")
    print(f"mean reward range [{r.min():.6g}, {r.max():.6g}], mean cost range [{w.min():.6g}, {w.max():.6g}]")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suite(args.suite)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return EXIT_OK if n_pass == len(results) else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cqbandit", description="Constrained linear bandit simulations with anytime cumulative constraints.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--T", type=int)
    p.add_argument("--replications", type=int, help="number of seeds starting at base_seed")
    p.add_argument("--base-seed", type=int)
    p.add_argument("--policy")
    p.add_argument("--schedule")
    p.add_argument("--delta", type=float)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--trace-confidence", action="store_true")
    p.add_argument("--realized-regret", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="solve the baseline or tightened LP")
    p.add_argument("instance", help=f"instance file or preset ({', '.join(PRESETS)})")
    p.add_argument("--eps", type=float, default=0.0)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("instance", help="instance utilities")
    isub = p.add_subparsers(dest="instance_command", parser_class=_Parser)
    v = isub.add_parser("validate", help="check every instance invariant")
    v.add_argument("file")
    v.set_defaults(func=cmd_instance_validate)

    p = sub.add_parser("verify", help="run the acceptance battery")
    p.add_argument("suite", choices=SUITES)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.command == "baseline" and args.eps < 0:
        return _err("--eps must be >= 0", EXIT_USAGE)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

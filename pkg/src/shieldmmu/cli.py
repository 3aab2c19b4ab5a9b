"""Command-line front end: ``simulate``, ``sweep-arity`` and ``replay``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .cost import ConfigError, CostModel
from .ddforest import SUPPORTED_ARITIES
from .harness import (
    DEFAULT_FRAMES,
    Mode,
    ScenarioConfig,
    arity_sweep,
    emit_report,
    render_report,
    simulate,
)
from .mmu import SimulationHalt
from .tlb import DEFAULT_TLB_ENTRIES
from .workloads import AccessTrace, WorkloadError, WorkloadSpec

EXIT_CONFIG = 2


def _scenario_options(parser: argparse.ArgumentParser, with_arity: bool = True) -> None:
    parser.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.DEFEND.value)
    if with_arity:
        parser.add_argument("--arity", type=int, default=8, help="DD-Tree fan-out (2, 4, 6 or 8)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tlb", type=int, default=DEFAULT_TLB_ENTRIES, help="TLB entries")
    parser.add_argument("--frames", type=int, default=DEFAULT_FRAMES, help="physical frames")
    parser.add_argument("--target-frac", type=float, default=1.0,
                        help="fraction of pages the attacker traps")
    parser.add_argument("--unwarmed-frac", type=float, default=0.0,
                        help="fraction of pages populated behind the MMU's back")
    parser.add_argument("--rearm", action="store_true",
                        help="attacker re-traps each page after the next fault")
    parser.add_argument("--cost-model", type=Path, help="JSON file overriding tick costs")
    parser.add_argument("--out", type=Path, help="report file (stdout if omitted)")
    parser.add_argument("--format", choices=["json", "csv"], default="json")


def _config(args: argparse.Namespace, workload: WorkloadSpec | None, trace: AccessTrace | None) -> ScenarioConfig:
    cost = CostModel.from_file(args.cost_model) if args.cost_model else CostModel()
    kwargs = {}
    if workload is not None:
        kwargs["workload"] = workload
    return ScenarioConfig(
        mode=Mode(args.mode),
        arity=getattr(args, "arity", 8),
        tlb_capacity=args.tlb,
        frame_capacity=args.frames,
        target_fraction=args.target_frac,
        unwarmed_fraction=args.unwarmed_frac,
        rearm=args.rearm,
        seed=args.seed,
        cost_model=cost,
        trace=trace,
        **kwargs,
    )


def _write(reports, args: argparse.Namespace) -> None:
    if args.out:
        emit_report(reports, args.format, args.out)
    else:
        sys.stdout.write(render_report(reports, args.format))


def _run_one(config: ScenarioConfig, args: argparse.Namespace) -> int:
    run = simulate(config)
    if args.events:
        with open(args.events, "w") as fp:
            run.mmu.export_events(fp)
    if args.leakage:
        if run.attacker is None:
            raise ConfigError("--leakage needs an attack mode")
        run.attacker.export_csv(args.leakage)
    _write([run.report], args)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    workload = WorkloadSpec.parse(args.workload, seed=args.seed)
    return _run_one(_config(args, workload, None), args)


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        trace = AccessTrace.load(args.trace_file)
    except OSError as exc:
        raise ConfigError(f"cannot read trace {args.trace_file}: {exc}") from exc
    if not len(trace):
        raise ConfigError(f"trace {args.trace_file} has no accesses")
    return _run_one(_config(args, None, trace), args)


def cmd_sweep(args: argparse.Namespace) -> int:
    workload = WorkloadSpec.parse(args.workload, seed=args.seed)
    base = _config(args, workload, None)
    for m in args.arities:
        if m not in SUPPORTED_ARITIES:
            raise ConfigError(f"arity must be one of {SUPPORTED_ARITIES}, got {m}")
    reports = arity_sweep(replace(base, arity=args.arities[0]), args.arities, jobs=args.jobs)
    _write(reports, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shieldmmu",
        description="Simulate controlled-channel attacks against a page-table integrity defense.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("--workload", default="ntimes:100",
                     help="ntimes:N, btree:OPS, hash:OPS, rbtree:OPS, sdg:OPS, sps:OPS or ssca2:SCALE")
    _scenario_options(sim)
    sim.add_argument("--events", type=Path, help="write MMU events as JSON lines")
    sim.add_argument("--leakage", type=Path, help="write the attacker's fault log as CSV")
    sim.set_defaults(func=cmd_simulate)

    sweep = sub.add_parser("sweep-arity", help="run one scenario at several arities")
    sweep.add_argument("--workload", default="ntimes:100")
    _scenario_options(sweep, with_arity=False)
    sweep.add_argument("--arities", type=int, nargs="+", default=list(SUPPORTED_ARITIES))
    sweep.add_argument("--jobs", type=int, default=1, help="worker processes")
    sweep.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("replay", help="run a scenario over an external trace file")
    rep.add_argument("--trace-file", type=Path, required=True, help="lines of 'R|W <hex va>'")
    _scenario_options(rep)
    rep.add_argument("--events", type=Path)
    rep.add_argument("--leakage", type=Path)
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, WorkloadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationHalt as exc:
        print(f"simulation halted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

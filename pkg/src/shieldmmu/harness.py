"""Scenario runner and report writers.

A scenario replays one workload trace three times over:

* warm  - every page is touched once through the MMU so it is mapped
          (and, with the defense on, recorded in its tree).  Pages picked
          by ``unwarmed_fraction`` are instead populated by the OS
          directly, so the MMU never sees them being created.
* arm   - in attack modes the malicious kernel clears the present bits
          of the target pages.
* measure - the trace is replayed again; this is what ``sim_ticks``
          counts (arm phase included).
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .cost import ConfigError, CostModel, SimClock
from .ddforest import SUPPORTED_ARITIES, DefenseForest, storage_breakdown
from .mmu import EventKind, MmuContext
from .os_sim import AttackController, OsKernel
from .paging import PageTableStore, page_base
from .tlb import DEFAULT_TLB_ENTRIES, Tlb
from .workloads import AccessTrace, Kind, WorkloadSpec, generate_trace

SCHEMA_VERSION = 1
DEFAULT_FRAMES = 4096


class Mode(str, Enum):
    BASELINE = "baseline"
    ATTACK = "attack"
    DEFEND = "defend"
    ATTACK_SWAP = "attack-swap"

    @property
    def attacked(self) -> bool:
        return self is not Mode.BASELINE


@dataclass(frozen=True)
class ScenarioConfig:
    mode: Mode = Mode.BASELINE
    workload: WorkloadSpec = field(default_factory=lambda: WorkloadSpec(Kind.NTIMES, 100))
    arity: int = 8
    tlb_capacity: int = DEFAULT_TLB_ENTRIES
    frame_capacity: int = DEFAULT_FRAMES
    target_fraction: float = 1.0
    unwarmed_fraction: float = 0.0
    rearm: bool = False
    seed: int = 0
    cost_model: CostModel = field(default_factory=CostModel)
    trace: AccessTrace | None = None

    def __post_init__(self) -> None:
        if self.arity not in SUPPORTED_ARITIES:
            raise ConfigError(f"arity must be one of {SUPPORTED_ARITIES}, got {self.arity}")
        if self.tlb_capacity < 1:
            raise ConfigError("TLB capacity must be at least 1")
        if self.frame_capacity < 1:
            raise ConfigError("frame capacity must be at least 1")
        for name in ("target_fraction", "unwarmed_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")

    @property
    def workload_label(self) -> str:
        return self.trace.kind if self.trace is not None else self.workload.label


@dataclass(frozen=True)
class MetricsReport:
    schema_version: int
    mode: str
    workload: str
    seed: int
    arity: int
    pages: int
    accesses: int
    targets: int
    sim_ticks: int
    warm_ticks: int
    defense_ticks: int
    hash_ops: int
    os_faults: int
    measure_faults: int
    leakage: int
    leakage_events: int
    attacks_detected: int
    undefended_leakage: int | None
    defended_failures: int | None
    success_rate: float | None
    forest_trees: int
    forest_memory_bytes: int
    overhead_ratio: float
    events: dict[str, int]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> MetricsReport:
        return cls(**{f.name: data[f.name] for f in fields(cls)})


@dataclass
class ScenarioRun:
    """Everything a scenario produced, for tests and exports beyond the report."""

    config: ScenarioConfig
    report: MetricsReport
    trace: AccessTrace
    translations: list[tuple[int, int]]
    targets: list[int]
    mmu: MmuContext
    os: OsKernel
    attacker: AttackController | None


def _pick(rng: random.Random, pages: Sequence[int], count: int) -> set[int]:
    return set(rng.sample(list(pages), count)) if count else set()


def simulate(config: ScenarioConfig, paired: bool = True) -> ScenarioRun:
    trace = config.trace if config.trace is not None else generate_trace(config.workload)
    pages = trace.pages()
    rng = random.Random(f"scenario:{config.seed}")

    tables = PageTableStore()
    cr3 = tables.new_root()
    tlb = Tlb(config.tlb_capacity)
    clock = SimClock(config.cost_model)
    forest = DefenseForest(config.arity) if config.mode is Mode.DEFEND else None
    mmu = MmuContext(tables, cr3, tlb, clock, forest)
    kernel = OsKernel(tables, cr3, tlb, clock, config.frame_capacity, valid_pages=set(pages))
    kernel.evict_hook = mmu.page_evicted

    # Rounded down so "at most this fraction" holds for any footprint.
    unwarmed = _pick(rng, pages, math.floor(config.unwarmed_fraction * len(pages) + 1e-9))
    for vpn in pages:
        if vpn in unwarmed:
            kernel.prefault(page_base(vpn))
    for va, _ in trace:
        mmu.access(va, kernel)
        kernel.touch(va)
    warm_ticks = clock.ticks
    warm_faults = kernel.fault_count

    attacker = None
    targets: list[int] = []
    if config.mode.attacked:
        count = round(config.target_fraction * len(pages))
        mapped = [vpn for vpn in pages if tables.leaf_entry(cr3, page_base(vpn)) is not None]
        targets = sorted(_pick(rng, mapped, min(count, len(mapped))))
        attacker = AttackController(swap_mode=config.mode is Mode.ATTACK_SWAP, rearm=config.rearm)
        kernel.attack_arm(attacker, set(targets))

    translations = []
    for va, _ in trace:
        phys = mmu.access(va, kernel)
        kernel.touch(va)
        translations.append((va, phys.frame))

    leakage = len(attacker.leaked_pages()) if attacker else 0
    undefended = defended_failures = success = None
    if config.mode is Mode.ATTACK:
        undefended = leakage
    elif config.mode is Mode.DEFEND:
        defended_failures = leakage
        if paired:
            twin = simulate(replace(config, mode=Mode.ATTACK), paired=False)
            undefended = twin.report.leakage
            success = 1.0 - defended_failures / undefended if undefended else 1.0

    histogram = Counter(event.kind.value for event in mmu.events)
    report = MetricsReport(
        schema_version=SCHEMA_VERSION,
        mode=config.mode.value,
        workload=config.workload_label,
        seed=config.seed,
        arity=config.arity,
        pages=len(pages),
        accesses=len(trace),
        targets=len(targets),
        sim_ticks=clock.ticks - warm_ticks,
        warm_ticks=warm_ticks,
        defense_ticks=clock.by_tag["defense"],
        hash_ops=forest.hash_ops if forest else 0,
        os_faults=kernel.fault_count,
        measure_faults=kernel.fault_count - warm_faults,
        leakage=leakage,
        leakage_events=len(attacker.trace) if attacker else 0,
        attacks_detected=histogram[EventKind.ATTACK_DETECTED.value],
        undefended_leakage=undefended,
        defended_failures=defended_failures,
        success_rate=success,
        forest_trees=len(forest.trees) if forest else 0,
        forest_memory_bytes=forest.memory_bytes() if forest else 0,
        overhead_ratio=measured_overhead(forest) if forest else 0.0,
        events={kind.value: histogram[kind.value] for kind in EventKind},
    )
    return ScenarioRun(config, report, trace, translations, targets, mmu, kernel, attacker)


def measured_overhead(forest: DefenseForest) -> float:
    """Storage overhead of the whole forest, summed over its live trees."""
    index = hashes = data = 0
    for tree in forest.trees.values():
        part = storage_breakdown(tree)
        index += part.index_bytes
        hashes += part.hash_bytes
        data += part.data_bytes
    return (index + hashes) / data if data else 0.0


def run_scenario(config: ScenarioConfig) -> MetricsReport:
    return simulate(config).report


def arity_sweep(
    config: ScenarioConfig, arities: Iterable[int] = SUPPORTED_ARITIES, jobs: int = 1
) -> list[MetricsReport]:
    """One report per arity, same seed and workload; order follows ``arities``."""
    configs = [replace(config, arity=m) for m in arities]
    if jobs <= 1:
        return [run_scenario(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_scenario, configs))


# Reports ------------------------------------------------------------------------

CSV_FIELDS = [f.name for f in fields(MetricsReport) if f.name != "events"] + [
    f"events.{kind.value}" for kind in EventKind
]


def render_report(reports: Sequence[MetricsReport], fmt: str) -> str:
    if fmt == "json":
        payload = {"schema_version": SCHEMA_VERSION, "reports": [r.to_dict() for r in reports]}
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for report in reports:
            row = report.to_dict()
            events = row.pop("events")
            writer.writerow([_csv_cell(row[name]) for name in CSV_FIELDS if name in row]
                            + [events[kind.value] for kind in EventKind])
        return buffer.getvalue()
    raise ConfigError(f"unknown report format {fmt!r}")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(reports: MetricsReport | Sequence[MetricsReport], fmt: str, path: str | Path) -> None:
    if isinstance(reports, MetricsReport):
        reports = [reports]
    text = render_report(reports, fmt)
    Path(path).write_text(text)


def load_reports(path: str | Path) -> list[MetricsReport]:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported report schema {payload.get('schema_version')!r}")
        return [MetricsReport.from_dict(r) for r in payload["reports"]]
    return [_from_csv_row(row) for row in csv.DictReader(io.StringIO(text))]


def _from_csv_row(row: dict[str, str]) -> MetricsReport:
    types = {f.name: f.type for f in fields(MetricsReport)}
    data: dict = {"events": {}}
    for name, raw in row.items():
        if name.startswith("events."):
            data["events"][name[len("events."):]] = int(raw)
            continue
        kind = types[name]
        if raw == "":
            data[name] = None
        elif "float" in kind:
            data[name] = float(raw)
        elif "int" in kind:
            data[name] = int(raw)
        else:
            data[name] = raw
    return MetricsReport.from_dict(data)

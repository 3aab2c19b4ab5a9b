"""Page-table integrity defense against controlled-channel attacks, in simulation.

A four-level page-table walker and TLB, a kernel that can turn malicious
and clear present bits to trace an application's pages, and an MMU that
keeps a Merkle-style tree per PUD so it can tell genuine faults from
tampered PTEs and repair the latter without telling the kernel.
"""

from .cost import ConfigError, CostModel, SimClock
from .ddforest import (
    AuthenticRecord,
    DefenseForest,
    DefenseTree,
    LeafRecord,
    NoRecord,
    ProtocolViolation,
    Remove,
    TamperDetected,
    Update,
    storage_overhead,
)
from .harness import MetricsReport, Mode, ScenarioConfig, arity_sweep, emit_report, run_scenario, simulate
from .mmu import EventKind, MmuContext, SimulationHalt
from .os_sim import AttackController, OsKernel, attack_arm, leakage_report
from .paging import NotMapped, NotPresent, PageTableStore, Translated, split_vaddr
from .tlb import Tlb
from .workloads import AccessTrace, Kind, WorkloadError, WorkloadSpec, benchmark_suite, generate_trace

__all__ = [
    "AccessTrace", "AttackController", "AuthenticRecord", "ConfigError", "CostModel",
    "DefenseForest", "DefenseTree", "EventKind", "Kind", "LeafRecord", "MetricsReport",
    "MmuContext", "Mode", "NoRecord", "NotMapped", "NotPresent", "OsKernel",
    "PageTableStore", "ProtocolViolation", "Remove", "ScenarioConfig", "SimClock",
    "SimulationHalt", "TamperDetected", "Tlb", "Translated", "Update", "WorkloadError",
    "WorkloadSpec", "arity_sweep", "attack_arm", "benchmark_suite", "emit_report",
    "generate_trace", "leakage_report", "run_scenario", "simulate", "split_vaddr",
    "storage_overhead",
]

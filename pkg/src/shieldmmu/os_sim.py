"""Simulated kernel: demand paging, LRU reclaim, and a controlled-channel attacker.

The kernel owns the page tables and frame pool.  In ``BENIGN`` mode it
services faults honestly.  :meth:`OsKernel.attack_arm` models a
malicious kernel: it clears the present bit of chosen PTEs (leaving the
entries otherwise intact), drops them from the TLB, and switches the
fault handler to one that logs every fault on a target page before
putting the bit back.  Each trap fires once by default; with ``rearm``
the attacker re-clears the previous target whenever a new one faults,
so repeated visits keep leaking.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .cost import SimClock
from .mmu import SimulationHalt
from .paging import PAGE_SIZE, PageTableStore, page_base, vpn_of
from .tlb import Tlb


class HandlerMode(str, Enum):
    BENIGN = "benign"
    ATTACKER = "attacker"


class Resolution(str, Enum):
    LOADED_NEW = "LoadedNew"
    SWAPPED_IN = "SwappedIn"
    ATTACK_RESTORED = "AttackRestored"
    SEGFAULT = "Segfault"


@dataclass(frozen=True)
class FaultRecord:
    tick: int
    va: int
    resolution: Resolution


class OutOfFrames(SimulationHalt):
    pass


@dataclass
class AttackController:
    """What the malicious kernel wants to watch and what it has seen so far."""

    targets: set[int] = field(default_factory=set)
    swap_mode: bool = False
    rearm: bool = False
    trace: list[tuple[int, int]] = field(default_factory=list)
    last_restored: int | None = None

    def leakage_report(self) -> list[int]:
        return [vpn for _, vpn in self.trace]

    def leaked_pages(self) -> set[int]:
        return {vpn for _, vpn in self.trace}

    def export_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fp:
            writer = csv.writer(fp)
            writer.writerow(["tick", "vpn_hex"])
            for tick, vpn in self.trace:
                writer.writerow([tick, f"{vpn:#x}"])


def _page_pattern(vpn: int) -> bytes:
    # Deterministic, page-distinct contents so swap copies move real bytes.
    return (vpn.to_bytes(8, "little") * (PAGE_SIZE // 8))


class OsKernel:
    def __init__(
        self,
        tables: PageTableStore,
        cr3: int,
        tlb: Tlb,
        clock: SimClock,
        frame_capacity: int,
        valid_pages: set[int] | None = None,
    ) -> None:
        if frame_capacity < 1:
            raise ValueError("frame capacity must be at least 1")
        self.tables = tables
        self.cr3 = cr3
        self.tlb = tlb
        self.clock = clock
        self.frame_capacity = frame_capacity
        self.valid_pages = valid_pages
        self.free_frames: list[int] = list(range(frame_capacity - 1, -1, -1))
        self.memory: dict[int, bytes] = {}
        self.backing: dict[int, bytes] = {}
        self.resident: OrderedDict[int, int] = OrderedDict()  # vpn -> frame, LRU first
        self.mode = HandlerMode.BENIGN
        self.attacker: AttackController | None = None
        self.faults: list[FaultRecord] = []
        self.io_writes = 0
        self.io_reads = 0
        self.evict_hook: Callable[[int], None] | None = None

    @property
    def fault_count(self) -> int:
        return len(self.faults)

    def _record(self, va: int, resolution: Resolution) -> FaultRecord:
        record = FaultRecord(self.clock.ticks, va, resolution)
        self.faults.append(record)
        return record

    def touch(self, va: int) -> None:
        """Note a use of va's page for LRU purposes."""
        vpn = vpn_of(va)
        if vpn in self.resident:
            self.resident.move_to_end(vpn)

    # Frames and swap ------------------------------------------------------

    def _allocate_frame(self) -> int:
        if not self.free_frames:
            if not self.resident:
                raise OutOfFrames("no free frame and nothing to reclaim")
            self.swap_out_victim()
        return self.free_frames.pop()

    def _write_back(self, vpn: int, frame: int) -> None:
        self.backing[vpn] = bytes(self.memory[frame])
        self.io_writes += 1
        self.clock.charge("swap_io")

    def _read_in(self, vpn: int, frame: int) -> None:
        self.memory[frame] = bytes(self.backing[vpn])
        self.io_reads += 1
        self.clock.charge("swap_io")

    def swap_out_victim(self) -> int:
        """Reclaim the least recently used resident page; returns its vpn."""
        if not self.resident:
            raise OutOfFrames("nothing resident to swap out")
        vpn, frame = self.resident.popitem(last=False)
        va = page_base(vpn)
        self._write_back(vpn, frame)
        if self.evict_hook is not None:
            self.evict_hook(va)
        self.tables.unmap_page(self.cr3, va)
        self.tlb.invalidate(vpn)
        del self.memory[frame]
        self.free_frames.append(frame)
        if self.attacker is not None and self.attacker.last_restored == vpn:
            self.attacker.last_restored = None
        return vpn

    def _load(self, va: int) -> FaultRecord:
        vpn = vpn_of(va)
        if self.valid_pages is not None and vpn not in self.valid_pages and vpn not in self.backing:
            return self._record(va, Resolution.SEGFAULT)
        frame = self._allocate_frame()
        if vpn in self.backing:
            self._read_in(vpn, frame)
            resolution = Resolution.SWAPPED_IN
        else:
            self.memory[frame] = _page_pattern(vpn)
            resolution = Resolution.LOADED_NEW
        self.tables.map_page(self.cr3, page_base(vpn), frame, is_user=True)
        self.resident[vpn] = frame
        self.tlb.insert(vpn, frame)
        return self._record(va, resolution)

    def prefault(self, va: int) -> int:
        """Populate va's page without any access having faulted (MAP_POPULATE style)."""
        vpn = vpn_of(va)
        if self.tables.leaf_entry(self.cr3, page_base(vpn)) is not None:
            raise ValueError(f"{va:#x} is already mapped")
        frame = self._allocate_frame()
        self.memory[frame] = _page_pattern(vpn)
        self.tables.map_page(self.cr3, page_base(vpn), frame, is_user=True)
        self.resident[vpn] = frame
        return frame

    # Fault handling ---------------------------------------------------------

    def handle_page_fault(self, va: int) -> FaultRecord:
        self.clock.charge("os_fault")
        vpn = vpn_of(va)
        entry = self.tables.leaf_entry(self.cr3, page_base(vpn))
        attacker = self.attacker
        if (
            self.mode is HandlerMode.ATTACKER
            and attacker is not None
            and vpn in attacker.targets
            and entry is not None
            and not entry.present
        ):
            return self._attacker_fault(va, vpn, attacker)
        if entry is not None and not entry.present:
            # Resident PTE with a clear bit and no attacker claiming it: bring it back.
            if vpn in self.backing and vpn in self.resident:
                self._read_in(vpn, entry.frame)
            self.tables.set_present_bit(self.cr3, page_base(vpn), True)
            self.tlb.insert(vpn, entry.frame)
            return self._record(va, Resolution.SWAPPED_IN)
        return self._load(va)

    def _attacker_fault(self, va: int, vpn: int, attacker: AttackController) -> FaultRecord:
        attacker.trace.append((self.clock.ticks, vpn))
        if attacker.swap_mode:
            self._read_in(vpn, self.resident[vpn])
        self.tables.set_present_bit(self.cr3, page_base(vpn), True)
        self.tlb.insert(vpn, self.resident[vpn])
        previous = attacker.last_restored
        attacker.last_restored = vpn
        if attacker.rearm and previous is not None and previous != vpn:
            self._clear(previous, attacker)
        return self._record(va, Resolution.ATTACK_RESTORED)

    # Attack -----------------------------------------------------------------

    def _clear(self, vpn: int, attacker: AttackController) -> None:
        va = page_base(vpn)
        if vpn not in self.resident:
            return
        if attacker.swap_mode:
            self._write_back(vpn, self.resident[vpn])
        self.tables.set_present_bit(self.cr3, va, False)
        self.tlb.invalidate(vpn)

    def attack_arm(self, attacker: AttackController, targets: set[int] | None = None) -> None:
        """Install the attacker's fault handler and clear the targets' present bits.

        Only page-table and TLB state is touched; the kernel has no
        handle on the MMU's defense trees.
        """
        if targets is not None:
            attacker.targets = set(targets)
        for vpn in sorted(attacker.targets):
            if self.tables.leaf_entry(self.cr3, page_base(vpn)) is None:
                raise ValueError(f"target page {vpn:#x} is not mapped")
        self.attacker = attacker
        self.mode = HandlerMode.ATTACKER
        for vpn in sorted(attacker.targets):
            self._clear(vpn, attacker)

    def disarm(self) -> None:
        """Back to the honest handler; restores any bits the attacker left cleared."""
        if self.attacker is not None:
            for vpn in sorted(self.attacker.targets):
                entry = self.tables.leaf_entry(self.cr3, page_base(vpn))
                if entry is not None and not entry.present:
                    entry.present = True
        self.mode = HandlerMode.BENIGN
        self.attacker = None


def attack_arm(os: OsKernel, attacker: AttackController, targets: set[int]) -> None:
    os.attack_arm(attacker, targets)


def leakage_report(attacker: AttackController) -> list[int]:
    return attacker.leakage_report()

"""Address translation with the defense check in the fault path.

:meth:`MmuContext.translate` decides, for one access:

1. TLB hit -> done.  If the page has a pending pre-addition, this is the
   successful retry after the OS fault, so the PTE is committed to its
   tree (Formal Addition).
2. TLB miss, walk translates -> refill TLB, same pending rule.
3. Walk finds no entry -> pre-add the leaf, forward the fault to the OS.
4. Walk finds a user leaf PTE with the present bit clear -> verify the
   leaf against its tree before involving the OS.  A tampered path, or
   an authentic record saying "present", means the bit was cleared
   behind the tree's back: set it again, use the frame from the record
   and never tell the OS.  No record, or a record agreeing the page is
   absent, is a genuine fault and goes to the OS.
5. Anything else (intermediate levels, kernel pages, defense off) goes
   to the OS unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Protocol

from .cost import SimClock
from .ddforest import AuthenticRecord, DefenseForest, LeafRecord, NoRecord, Remove, TamperDetected, leaf_index_of
from .paging import (
    LEVEL_PT,
    NotMapped,
    NotPresent,
    PageTableStore,
    PhysAddr,
    Translated,
    check_vaddr,
    split_vaddr,
    vpn_of,
)
from .tlb import Tlb


class EventKind(str, Enum):
    TLB_HIT = "TlbHit"
    TLB_MISS = "TlbMiss"
    WALK_TRANSLATED = "WalkTranslated"
    SUSPICIOUS_NOT_PRESENT = "SuspiciousNotPresent"
    VERIFY_PASS = "VerifyPass"
    VERIFY_NO_RECORD = "VerifyNoRecord"
    ATTACK_DETECTED = "AttackDetected"
    RESTORED_BYPASS_OS = "RestoredBypassOs"
    FAULT_FORWARDED_TO_OS = "FaultForwardedToOs"
    FORMAL_ADDED = "FormalAdded"
    PRE_ADDED = "PreAdded"


@dataclass(frozen=True)
class TranslationEvent:
    kind: EventKind
    va: int
    level: int
    tick: int

    def to_json(self) -> dict:
        return {"tick": self.tick, "kind": self.kind.value, "va_hex": f"{self.va:#x}", "level": self.level}


@dataclass(frozen=True)
class AccessOutcome:
    phys: PhysAddr | None
    fault_va: int | None
    events: tuple[TranslationEvent, ...]

    @property
    def ok(self) -> bool:
        return self.phys is not None


class SimulationHalt(RuntimeError):
    """The simulated machine cannot make progress (e.g. the OS could not satisfy a fault)."""


class FaultHandler(Protocol):
    def handle_page_fault(self, va: int): ...


DEFENSE = "defense"


def _levels_read(outcome) -> int:
    if isinstance(outcome, Translated):
        return 4
    return 5 - outcome.level


class MmuContext:
    """One hart's MMU.  ``forest=None`` gives a stock MMU with no defense."""

    def __init__(
        self,
        tables: PageTableStore,
        cr3: int,
        tlb: Tlb,
        clock: SimClock,
        forest: DefenseForest | None = None,
    ) -> None:
        self.tables = tables
        self.cr3 = cr3
        self.tlb = tlb
        self.clock = clock
        self.forest = forest
        self.events: list[TranslationEvent] = []
        # vpn -> (PUD address if it existed at fault time, leaf index)
        self._pre_added: dict[int, tuple[int | None, int]] = {}

    @property
    def defended(self) -> bool:
        return self.forest is not None

    def _emit(self, kind: EventKind, va: int, level: int = 0) -> None:
        self.events.append(TranslationEvent(kind, va, level, self.clock.ticks))

    def _outcome(self, start: int, phys: PhysAddr | None, fault_va: int | None = None) -> AccessOutcome:
        return AccessOutcome(phys, fault_va, tuple(self.events[start:]))

    def _charge_hashes(self, before: int) -> None:
        assert self.forest is not None
        self.clock.charge("hash_node", self.forest.hash_ops - before, DEFENSE)

    def _locate(self, va: int) -> tuple[int | None, int]:
        """cr3 -> PGD -> PUD lookup plus leaf linearisation."""
        self.clock.charge("pt_level_access", 2, DEFENSE)
        return self.tables.pud_address(self.cr3, va), leaf_index_of(split_vaddr(va))

    # ------------------------------------------------------------------

    def translate(self, va: int) -> AccessOutcome:
        check_vaddr(va)
        vpn = vpn_of(va)
        start = len(self.events)
        offset = va & 0xFFF

        self.clock.charge("tlb_hit")
        frame = self.tlb.lookup(vpn)
        if frame is not None:
            self._emit(EventKind.TLB_HIT, va)
            self._consume_pending(va, vpn, frame)
            self.clock.charge("mem_access")
            return self._outcome(start, PhysAddr(frame, offset))

        self._emit(EventKind.TLB_MISS, va)
        walked = self.tables.walk(self.cr3, va)
        self.clock.charge("pt_level_access", _levels_read(walked))

        if isinstance(walked, Translated):
            self._emit(EventKind.WALK_TRANSLATED, va, LEVEL_PT)
            self.tlb.insert(vpn, walked.phys.frame)
            self._consume_pending(va, vpn, walked.phys.frame)
            self.clock.charge("mem_access")
            return self._outcome(start, walked.phys)

        if isinstance(walked, NotMapped):
            if self.defended:
                self._pre_add(va, vpn)
            return self._forward(start, va, walked.level)

        assert isinstance(walked, NotPresent)
        entry = self.tables.table(walked.table)[walked.index]
        if walked.level == LEVEL_PT and self.defended and entry is not None and entry.is_user:
            return self._defend(start, va, vpn)
        return self._forward(start, va, walked.level)

    def _forward(self, start: int, va: int, level: int) -> AccessOutcome:
        self._emit(EventKind.FAULT_FORWARDED_TO_OS, va, level)
        return self._outcome(start, None, va)

    def _pre_add(self, va: int, vpn: int) -> None:
        assert self.forest is not None
        pud, leaf = self._locate(va)
        if pud is not None:
            self.forest.pre_add(pud, leaf)
        self._pre_added[vpn] = (pud, leaf)
        self._emit(EventKind.PRE_ADDED, va)

    def _consume_pending(self, va: int, vpn: int, frame: int) -> None:
        if vpn not in self._pre_added:
            return
        assert self.forest is not None
        pud, leaf = self._pre_added.pop(vpn)
        if pud is None:
            # The PGD slot was empty at fault time, so the tree ID only exists now.
            pud, _ = self._locate(va)
            if pud is None:
                return
            self.forest.pre_add(pud, leaf)
        entry = self.tables.leaf_entry(self.cr3, va)
        if entry is None or not entry.is_user:
            self.forest.expire(pud, leaf)
            return
        if (pud, leaf) not in self.forest.pending:
            return
        before = self.forest.hash_ops
        self.forest.formal_add(pud, leaf, True, frame)
        self._charge_hashes(before)
        self._emit(EventKind.FORMAL_ADDED, va)

    def _defend(self, start: int, va: int, vpn: int) -> AccessOutcome:
        assert self.forest is not None
        self._emit(EventKind.SUSPICIOUS_NOT_PRESENT, va, LEVEL_PT)
        pud, leaf = self._locate(va)
        if pud is None:
            self._emit(EventKind.VERIFY_NO_RECORD, va, LEVEL_PT)
            return self._forward(start, va, LEVEL_PT)

        before = self.forest.hash_ops
        verdict = self.forest.verify_leaf(pud, leaf)
        self._charge_hashes(before)

        if isinstance(verdict, NoRecord):
            self._emit(EventKind.VERIFY_NO_RECORD, va, LEVEL_PT)
            return self._forward(start, va, LEVEL_PT)
        if isinstance(verdict, AuthenticRecord) and not verdict.record.present:
            self._emit(EventKind.VERIFY_PASS, va, LEVEL_PT)
            return self._forward(start, va, LEVEL_PT)

        self._emit(EventKind.ATTACK_DETECTED, va, LEVEL_PT)
        if isinstance(verdict, TamperDetected):
            frame = self._salvage_frame(pud, leaf)
            if frame is None:
                return self._forward(start, va, LEVEL_PT)
        else:
            frame = verdict.record.frame

        self.tables.set_present_bit(self.cr3, va, True)
        self.clock.charge("pt_level_access", 1, DEFENSE)
        self.tlb.insert(vpn, frame)
        self._emit(EventKind.RESTORED_BYPASS_OS, va, LEVEL_PT)
        self.clock.charge("mem_access")
        return self._outcome(start, PhysAddr(frame, va & 0xFFF))

    def _salvage_frame(self, pud: int, leaf: int) -> int | None:
        """Frame from a leaf whose path failed verification, if it still decodes."""
        tree = self.forest.tree(pud) if self.forest else None
        raw = tree.leaves.get(leaf) if tree else None
        if raw is None:
            return None
        try:
            record = LeafRecord.unpack(raw)
        except Exception:
            return None
        return record.frame if record.occupied else None

    # ------------------------------------------------------------------

    def resolve_and_retry(self, va: int, os: FaultHandler) -> PhysAddr:
        """Let the OS service a forwarded fault, then retry the access once."""
        record = os.handle_page_fault(va)
        outcome = self.translate(va)
        if not outcome.ok:
            raise SimulationHalt(f"retry of {va:#x} still faults after OS handling ({record})")
        assert outcome.phys is not None
        return outcome.phys

    def access(self, va: int, os: FaultHandler) -> PhysAddr:
        outcome = self.translate(va)
        if outcome.ok:
            assert outcome.phys is not None
            return outcome.phys
        return self.resolve_and_retry(va, os)

    def page_evicted(self, va: int) -> None:
        """Trusted notification that the OS is genuinely reclaiming va's page."""
        vpn = vpn_of(va)
        self.tlb.invalidate(vpn)
        self._pre_added.pop(vpn, None)
        if self.forest is None:
            return
        pud, leaf = self._locate(va)
        if pud is None:
            return
        self.forest.expire(pud, leaf)
        if self.forest.is_occupied(pud, leaf):
            before = self.forest.hash_ops
            self.forest.update_or_remove_leaf(pud, leaf, Remove())
            self._charge_hashes(before)

    def export_events(self, fp: IO[str]) -> None:
        for event in self.events:
            fp.write(json.dumps(event.to_json()) + "\n")

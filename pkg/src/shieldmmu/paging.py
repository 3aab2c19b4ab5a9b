"""Four-level x86-64 style page tables.

A 48-bit virtual address splits into four 9-bit table indices and a
12-bit page offset::

    47      39 38      30 29      21 20      12 11         0
    +---------+----------+----------+----------+------------+
    | PGD idx |  PUD idx |  PMD idx |  PT idx  |   offset   |
    +---------+----------+----------+----------+------------+

Tables live in a :class:`PageTableStore`, which plays the role of the
physical memory that holds them.  Each table gets a simulated physical
address in allocation order; the PGD address is what ``cr3`` holds and
the PUD address doubles as a defense-tree ID.

Levels are numbered the way the walker meets them: 4 = PGD, 3 = PUD,
2 = PMD, 1 = PT (leaf).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

PAGE_SHIFT = 12
PAGE_SIZE = 1 << PAGE_SHIFT
INDEX_BITS = 9
ENTRIES_PER_TABLE = 1 << INDEX_BITS
VA_BITS = 48
VA_LIMIT = 1 << VA_BITS

LEVEL_PGD = 4
LEVEL_PUD = 3
LEVEL_PMD = 2
LEVEL_PT = 1


class PagingError(ValueError):
    """Bad address, bad index, or a mapping request that contradicts the tables."""


class PageTableIntegrityError(RuntimeError):
    """The simulated tables reference something that does not exist."""


@dataclass(frozen=True)
class PageIndices:
    pgd_idx: int
    pud_idx: int
    pmd_idx: int
    pt_idx: int
    offset: int = 0

    def __post_init__(self) -> None:
        for name in ("pgd_idx", "pud_idx", "pmd_idx", "pt_idx"):
            value = getattr(self, name)
            if not 0 <= value < ENTRIES_PER_TABLE:
                raise PagingError(f"{name}={value} outside [0, {ENTRIES_PER_TABLE})")
        if not 0 <= self.offset < PAGE_SIZE:
            raise PagingError(f"offset={self.offset} outside [0, {PAGE_SIZE})")

    def by_level(self, level: int) -> int:
        return (self.pt_idx, self.pmd_idx, self.pud_idx, self.pgd_idx)[level - 1]


@dataclass(frozen=True)
class PhysAddr:
    frame: int
    offset: int = 0

    @property
    def address(self) -> int:
        return (self.frame << PAGE_SHIFT) | self.offset


@dataclass
class PageTableEntry:
    """One 512-way slot.  For intermediate levels ``frame`` is the next table's address."""

    present: bool
    frame: int
    is_user: bool = True


@dataclass(frozen=True)
class Translated:
    phys: PhysAddr
    is_user: bool = True


@dataclass(frozen=True)
class NotPresent:
    """The entry exists but its present bit is clear."""

    level: int
    table: int
    index: int


@dataclass(frozen=True)
class NotMapped:
    """No entry was ever created in the slot (or it was zeroed by unmap)."""

    level: int


WalkOutcome = Union[Translated, NotPresent, NotMapped]


def check_vaddr(va: int) -> int:
    if not 0 <= va < VA_LIMIT:
        raise PagingError(f"virtual address {va:#x} does not fit in {VA_BITS} bits")
    return va


def split_vaddr(va: int) -> PageIndices:
    check_vaddr(va)
    mask = ENTRIES_PER_TABLE - 1
    return PageIndices(
        pgd_idx=(va >> 39) & mask,
        pud_idx=(va >> 30) & mask,
        pmd_idx=(va >> 21) & mask,
        pt_idx=(va >> 12) & mask,
        offset=va & (PAGE_SIZE - 1),
    )


def compose_vaddr(idx: PageIndices) -> int:
    return (
        (idx.pgd_idx << 39)
        | (idx.pud_idx << 30)
        | (idx.pmd_idx << 21)
        | (idx.pt_idx << 12)
        | idx.offset
    )


def vpn_of(va: int) -> int:
    return check_vaddr(va) >> PAGE_SHIFT


def page_base(vpn: int) -> int:
    return vpn << PAGE_SHIFT


class PageTableStore:
    """Physical memory holding page tables, shared by the OS and the MMU."""

    def __init__(self, first_table_address: int = 1) -> None:
        self._tables: dict[int, list[PageTableEntry | None]] = {}
        self._next_address = first_table_address

    def _allocate_table(self) -> int:
        address = self._next_address
        self._next_address += 1
        self._tables[address] = [None] * ENTRIES_PER_TABLE
        return address

    def new_root(self) -> int:
        """Allocate an empty PGD and return its address (the value loaded into cr3)."""
        return self._allocate_table()

    def table(self, address: int) -> list[PageTableEntry | None]:
        try:
            return self._tables[address]
        except KeyError:
            raise PageTableIntegrityError(f"no page table at {address:#x}") from None

    def __len__(self) -> int:
        return len(self._tables)

    # Walking -------------------------------------------------------------

    def walk(self, cr3: int, va: int) -> WalkOutcome:
        """Hardware-style walk from the PGD down; mutates nothing."""
        idx = split_vaddr(va)
        address = cr3
        for level in (LEVEL_PGD, LEVEL_PUD, LEVEL_PMD, LEVEL_PT):
            slot = idx.by_level(level)
            entry = self.table(address)[slot]
            if entry is None:
                return NotMapped(level)
            if not entry.present:
                return NotPresent(level, address, slot)
            if level == LEVEL_PT:
                return Translated(PhysAddr(entry.frame, idx.offset), entry.is_user)
            address = entry.frame
        raise AssertionError("unreachable")

    def pud_address(self, cr3: int, va: int) -> int | None:
        """Follow cr3 -> PGD -> PUD; None when the PGD slot is empty."""
        idx = split_vaddr(va)
        entry = self.table(cr3)[idx.pgd_idx]
        if entry is None:
            return None
        return entry.frame

    def leaf_location(self, cr3: int, va: int) -> tuple[int, int] | None:
        """(PT table address, slot) for va, or None if an upper level is missing."""
        idx = split_vaddr(va)
        address = cr3
        for level in (LEVEL_PGD, LEVEL_PUD, LEVEL_PMD):
            entry = self.table(address)[idx.by_level(level)]
            if entry is None:
                return None
            address = entry.frame
        return address, idx.pt_idx

    def leaf_entry(self, cr3: int, va: int) -> PageTableEntry | None:
        location = self.leaf_location(cr3, va)
        if location is None:
            return None
        table, slot = location
        return self.table(table)[slot]

    # Mutation (OS side) ----------------------------------------------------

    def map_page(self, cr3: int, va: int, frame: int, is_user: bool = True) -> None:
        idx = split_vaddr(va)
        address = cr3
        for level in (LEVEL_PGD, LEVEL_PUD, LEVEL_PMD):
            table = self.table(address)
            slot = idx.by_level(level)
            entry = table[slot]
            if entry is None:
                entry = PageTableEntry(present=True, frame=self._allocate_table())
                table[slot] = entry
            address = entry.frame
        table = self.table(address)
        if table[idx.pt_idx] is not None:
            raise PagingError(f"{va:#x} is already mapped")
        table[idx.pt_idx] = PageTableEntry(present=True, frame=frame, is_user=is_user)

    def _existing_leaf(self, cr3: int, va: int) -> PageTableEntry:
        entry = self.leaf_entry(cr3, va)
        if entry is None:
            raise PagingError(f"{va:#x} is not mapped")
        return entry

    def set_present_bit(self, cr3: int, va: int, value: bool) -> bool:
        """Flip only the leaf present bit and return its previous value."""
        entry = self._existing_leaf(cr3, va)
        previous = entry.present
        entry.present = value
        return previous

    def set_frame(self, cr3: int, va: int, frame: int) -> None:
        self._existing_leaf(cr3, va).frame = frame

    def unmap_page(self, cr3: int, va: int) -> None:
        """Zero the leaf PTE; later walks report NotMapped(level 1)."""
        self._existing_leaf(cr3, va)
        table, slot = self.leaf_location(cr3, va)  # type: ignore[misc]
        self.table(table)[slot] = None

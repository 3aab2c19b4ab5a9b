"""Fully-associative LRU translation lookaside buffer."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

DEFAULT_TLB_ENTRIES = 64


@dataclass
class TlbEntry:
    vpn: int
    frame: int
    lru_stamp: int


class Tlb:
    """vpn -> frame cache with least-recently-used replacement.

    Every hit or insert takes a fresh stamp from a monotonic counter;
    the entry with the smallest stamp is the eviction victim.  Entries
    are kept in stamp order so eviction is O(1).
    """

    def __init__(self, capacity: int = DEFAULT_TLB_ENTRIES) -> None:
        if capacity < 1:
            raise ValueError("TLB capacity must be at least 1")
        self.capacity = capacity
        self._entries: OrderedDict[int, TlbEntry] = OrderedDict()
        self._clock = 0
        self.hits = 0
        self.misses = 0

    def _stamp(self) -> int:
        self._clock += 1
        return self._clock

    def lookup(self, vpn: int) -> int | None:
        entry = self._entries.get(vpn)
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        entry.lru_stamp = self._stamp()
        self._entries.move_to_end(vpn)
        return entry.frame

    def insert(self, vpn: int, frame: int) -> int | None:
        """Install vpn -> frame; returns the evicted vpn, if any."""
        entry = self._entries.get(vpn)
        if entry is not None:
            entry.frame = frame
            entry.lru_stamp = self._stamp()
            self._entries.move_to_end(vpn)
            return None
        evicted = None
        if len(self._entries) >= self.capacity:
            evicted, _ = self._entries.popitem(last=False)
        self._entries[vpn] = TlbEntry(vpn, frame, self._stamp())
        return evicted

    def invalidate(self, vpn: int | None = None) -> int:
        """Drop one vpn, or everything when vpn is None; returns how many entries went."""
        if vpn is None:
            count = len(self._entries)
            self._entries.clear()
            return count
        return 1 if self._entries.pop(vpn, None) is not None else 0

    def entries(self) -> list[TlbEntry]:
        """Snapshot in LRU order, oldest first."""
        return [TlbEntry(e.vpn, e.frame, e.lru_stamp) for e in self._entries.values()]

    def __contains__(self, vpn: int) -> bool:
        return vpn in self._entries

    def __len__(self) -> int:
        return len(self._entries)

"""Detect-and-defend hash trees over leaf page-table entries.

Every PUD table owns one balanced m-ary hash tree with a fixed number of
leaf slots, one per PTE reachable beneath that PUD (512 PMD slots x 512
PT slots).  A leaf stores the PTE's present bit and frame number; each
internal node stores SHA-256 over its children's digests.  Only the root
digest is trusted: it lives in :class:`SecureRootStore`, standing in for
enclave memory.  Everything else (``DefenseTree.nodes``,
``DefenseTree.leaves``) sits in ordinary, attacker-reachable memory and
is re-checked against the root on every verification.

Storage is sparse.  A subtree with no occupied leaf is not allocated;
its digest is a per-shape constant computed once (see
:func:`empty_digest`).

Leaf slot ``i`` of a tree is ``(pmd_idx << 9) | pt_idx``.  A node
covering ``size`` slots splits them among at most ``arity`` children,
the first ``size % arity`` children taking one extra slot.  With
262,144 slots that gives height 18/9/7/6 for arity 2/4/6/8.

Digest encoding::

    leaf (occupied)  = H(0x00 || index:u32be || occupied:u8 || present:u8 || frame:u64le)
    leaf (empty)     = H(0x00 || 00 00 00..00)            # no index, so empties are shareable
    internal         = H(0x01 || child_0 || ... || child_k)
"""

from __future__ import annotations

import bisect
import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Union

from .paging import ENTRIES_PER_TABLE, INDEX_BITS, PageIndices

LEAF_SLOTS = ENTRIES_PER_TABLE * ENTRIES_PER_TABLE
DEFAULT_ARITY = 8
SUPPORTED_ARITIES = (2, 4, 6, 8)
HASH_BYTES = 32
# Width of one index word / leaf-group digest in the storage-overhead model;
# matches one 8-byte PTE.
WORD_BYTES = 8

_LEAF_TAG = b"\x00"
_NODE_TAG = b"\x01"
_RECORD = struct.Struct("<BBQ")
RECORD_BYTES = _RECORD.size


class ProtocolViolation(RuntimeError):
    """A forest operation was invoked out of protocol order."""


def leaf_index_of(idx: PageIndices) -> int:
    return (idx.pmd_idx << INDEX_BITS) | idx.pt_idx


def tree_height(arity: int, leaves: int = LEAF_SLOTS) -> int:
    """Smallest h with arity**h >= leaves, i.e. ceil(log_arity(leaves))."""
    if arity < 2:
        raise ValueError("arity must be at least 2")
    height, span = 0, 1
    while span < leaves:
        span *= arity
        height += 1
    return height


def split_range(size: int, arity: int) -> list[int]:
    q, r = divmod(size, arity)
    sizes = [q + 1] * r + [q] * (arity - r)
    return [s for s in sizes if s]


def _sha(*parts: bytes) -> bytes:
    return hashlib.sha256(b"".join(parts)).digest()


@dataclass(frozen=True)
class LeafRecord:
    occupied: bool = False
    present: bool = False
    frame: int = 0

    def pack(self) -> bytes:
        return _RECORD.pack(int(self.occupied), int(self.present), self.frame)

    @classmethod
    def unpack(cls, raw: bytes) -> LeafRecord:
        occupied, present, frame = _RECORD.unpack(raw)
        return cls(bool(occupied), bool(present), frame)


EMPTY_RECORD = LeafRecord()
EMPTY_LEAF_DIGEST = _sha(_LEAF_TAG, EMPTY_RECORD.pack())


@lru_cache(maxsize=None)
def empty_digest(arity: int, levels: int, size: int) -> bytes:
    """Digest of an all-empty subtree with ``levels`` edges down to its ``size`` leaves."""
    if levels == 0:
        return EMPTY_LEAF_DIGEST
    return _sha(_NODE_TAG, *(empty_digest(arity, levels - 1, s) for s in split_range(size, arity)))


@dataclass(frozen=True)
class AuthenticRecord:
    record: LeafRecord


@dataclass(frozen=True)
class NoRecord:
    pass


@dataclass(frozen=True)
class TamperDetected:
    depth: int  # depth of the first node whose digest disagreed; -1 for the trusted root


VerifyOutcome = Union[AuthenticRecord, NoRecord, TamperDetected]


@dataclass(frozen=True)
class Update:
    present: bool
    frame: int


@dataclass(frozen=True)
class Remove:
    pass


class DefenseTree:
    """One PUD's hash tree.  Node keys are ``(depth, first_leaf)``; the root is ``(0, 0)``."""

    def __init__(self, tree_id: int, arity: int = DEFAULT_ARITY, leaf_count: int = LEAF_SLOTS) -> None:
        if leaf_count < 2:
            raise ValueError("a tree needs at least two leaf slots")
        self.tree_id = tree_id
        self.arity = arity
        self.leaf_count = leaf_count
        self.height = tree_height(arity, leaf_count)
        self.nodes: dict[tuple[int, int], bytes] = {}
        self.leaves: dict[int, bytes] = {}
        self.hash_ops = 0

    # Shape -------------------------------------------------------------

    def path(self, leaf_index: int) -> list[tuple[int, int, int, int]]:
        """Internal nodes from root down as (depth, start, size, child slot holding the leaf)."""
        if not 0 <= leaf_index < self.leaf_count:
            raise IndexError(f"leaf {leaf_index} outside [0, {self.leaf_count})")
        start, size = 0, self.leaf_count
        nodes = []
        for depth in range(self.height):
            child_start = start
            for pos, child_size in enumerate(split_range(size, self.arity)):
                if leaf_index < child_start + child_size:
                    break
                child_start += child_size
            nodes.append((depth, start, size, pos))
            start, size = child_start, child_size
        return nodes

    def _empty(self, depth: int, size: int) -> bytes:
        return empty_digest(self.arity, self.height - depth, size)

    def leaf_digest(self, leaf_index: int) -> bytes:
        raw = self.leaves.get(leaf_index)
        if raw is None:
            return EMPTY_LEAF_DIGEST
        return _sha(_LEAF_TAG, leaf_index.to_bytes(4, "big"), raw)

    def stored_digest(self, depth: int, start: int, size: int) -> bytes:
        digest = self.nodes.get((depth, start))
        return self._empty(depth, size) if digest is None else digest

    def _child_digests(self, depth: int, start: int, size: int) -> list[bytes]:
        bottom = depth == self.height - 1
        digests = []
        for child_size in split_range(size, self.arity):
            if bottom:
                digests.append(self.leaf_digest(start))
            else:
                digests.append(self.stored_digest(depth + 1, start, child_size))
            start += child_size
        return digests

    def _hash_node(self, children: list[bytes]) -> bytes:
        self.hash_ops += 1
        return _sha(_NODE_TAG, *children)

    @property
    def root(self) -> bytes:
        return self.stored_digest(0, 0, self.leaf_count)

    def is_occupied(self, leaf_index: int) -> bool:
        return leaf_index in self.leaves

    # Trusted-path mutation --------------------------------------------

    def write(self, leaf_index: int, record: LeafRecord | None) -> bytes:
        """Store (or clear, for None) one leaf and rehash its path; returns the new root."""
        nodes = self.path(leaf_index)
        if record is None:
            self.leaves.pop(leaf_index, None)
        else:
            self.leaves[leaf_index] = record.pack()
        for depth, start, size, _ in reversed(nodes):
            digest = self._hash_node(self._child_digests(depth, start, size))
            if digest == self._empty(depth, size):
                self.nodes.pop((depth, start), None)
            else:
                self.nodes[(depth, start)] = digest
        return self.root

    def bulk_load(self, records: Mapping[int, LeafRecord]) -> bytes:
        """Replace the whole tree with ``records`` in one bottom-up pass; returns the root."""
        self.nodes.clear()
        self.leaves = {i: r.pack() for i, r in records.items() if r.occupied}
        occupied = sorted(self.leaves)

        def build(depth: int, start: int, size: int) -> bytes:
            lo = bisect.bisect_left(occupied, start)
            if lo == len(occupied) or occupied[lo] >= start + size:
                return self._empty(depth, size)
            if depth == self.height:
                return self.leaf_digest(start)
            children = []
            child_start = start
            for child_size in split_range(size, self.arity):
                children.append(build(depth + 1, child_start, child_size))
                child_start += child_size
            digest = self._hash_node(children)
            self.nodes[(depth, start)] = digest
            return digest

        return build(0, 0, self.leaf_count)

    # Verification -------------------------------------------------------

    def verify(self, leaf_index: int, trusted_root: bytes | None) -> VerifyOutcome:
        """Recompute the leaf-to-root path, checking each stored digest on the way up.

        Costs exactly ``height`` internal-node hashes.
        """
        current = self.leaf_digest(leaf_index)
        for depth, start, size, pos in reversed(self.path(leaf_index)):
            children = self._child_digests(depth, start, size)
            children[pos] = current
            current = self._hash_node(children)
            if current != self.stored_digest(depth, start, size):
                return TamperDetected(depth)
        if current != trusted_root:
            return TamperDetected(-1)
        raw = self.leaves.get(leaf_index)
        if raw is None:
            return NoRecord()
        return AuthenticRecord(LeafRecord.unpack(raw))

    def recompute_root(self) -> bytes:
        """Full bottom-up rehash from leaf records alone, ignoring stored internal digests."""
        scratch = DefenseTree(self.tree_id, self.arity, self.leaf_count)
        return scratch.bulk_load({i: LeafRecord.unpack(raw) for i, raw in self.leaves.items()})

    def depth_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for depth, _ in self.nodes:
            counts[depth] = counts.get(depth, 0) + 1
        return counts

    def memory_bytes(self) -> int:
        return len(self.nodes) * HASH_BYTES + len(self.leaves) * RECORD_BYTES


@dataclass(frozen=True)
class StorageOverhead:
    index_bytes: int
    hash_bytes: int
    data_bytes: int

    @property
    def index_ratio(self) -> float:
        return self.index_bytes / self.data_bytes if self.data_bytes else 0.0

    @property
    def hash_ratio(self) -> float:
        return self.hash_bytes / self.data_bytes if self.data_bytes else 0.0

    @property
    def ratio(self) -> float:
        return self.index_ratio + self.hash_ratio


def storage_breakdown(tree: DefenseTree) -> StorageOverhead:
    """Overhead of the allocated structure relative to the PTEs it protects.

    Every allocated internal node costs one index word; every allocated
    leaf-group (the bottom internal level) costs one digest word; each
    protected PTE is one word of data.  A full tree therefore lands on
    roughly 1/(m-1) + 1/m.
    """
    bottom = tree.height - 1
    internal = len(tree.nodes)
    groups = sum(1 for depth, _ in tree.nodes if depth == bottom)
    return StorageOverhead(
        index_bytes=internal * WORD_BYTES,
        hash_bytes=groups * WORD_BYTES,
        data_bytes=len(tree.leaves) * WORD_BYTES,
    )


def storage_overhead(tree: DefenseTree) -> float:
    return storage_breakdown(tree).ratio


class SecureRootStore:
    """Tree roots kept in simulated enclave memory.  Only the forest writes here."""

    def __init__(self) -> None:
        self._roots: dict[int, bytes] = {}

    def get(self, tree_id: int) -> bytes | None:
        return self._roots.get(tree_id)

    def _commit(self, tree_id: int, root: bytes) -> None:
        self._roots[tree_id] = root

    def snapshot(self) -> dict[int, bytes]:
        return dict(self._roots)

    def __contains__(self, tree_id: object) -> bool:
        return tree_id in self._roots

    def __len__(self) -> int:
        return len(self._roots)


class DefenseForest:
    """All trees of one address space, keyed by PUD table address."""

    def __init__(self, arity: int = DEFAULT_ARITY, leaf_count: int = LEAF_SLOTS) -> None:
        if leaf_count < 2:
            raise ValueError("a tree needs at least two leaf slots")
        tree_height(arity, leaf_count)
        self.arity = arity
        self.leaf_count = leaf_count
        self.trees: dict[int, DefenseTree] = {}
        self.roots = SecureRootStore()
        self.pending: set[tuple[int, int]] = set()

    def tree(self, pud: int) -> DefenseTree | None:
        return self.trees.get(pud)

    def _ensure_tree(self, pud: int) -> DefenseTree:
        tree = self.trees.get(pud)
        if tree is None:
            tree = DefenseTree(pud, self.arity, self.leaf_count)
            self.trees[pud] = tree
            self.roots._commit(pud, tree.root)
        return tree

    def pre_add(self, pud: int, leaf_index: int) -> None:
        tree = self._ensure_tree(pud)
        tree.path(leaf_index)  # range check
        self.pending.add((pud, leaf_index))

    def formal_add(self, pud: int, leaf_index: int, present: bool, frame: int) -> None:
        if (pud, leaf_index) not in self.pending:
            raise ProtocolViolation(f"formal_add of leaf {leaf_index} in tree {pud:#x} without pre_add")
        tree = self.trees[pud]
        if tree.is_occupied(leaf_index):
            raise ProtocolViolation(f"leaf {leaf_index} in tree {pud:#x} is already occupied")
        self.roots._commit(pud, tree.write(leaf_index, LeafRecord(True, present, frame)))
        self.pending.discard((pud, leaf_index))

    def verify_leaf(self, pud: int, leaf_index: int) -> VerifyOutcome:
        tree = self.trees.get(pud)
        if tree is None:
            return NoRecord()
        return tree.verify(leaf_index, self.roots.get(pud))

    def update_or_remove_leaf(self, pud: int, leaf_index: int, action: Update | Remove) -> None:
        tree = self.trees.get(pud)
        if tree is None or not tree.is_occupied(leaf_index):
            raise ProtocolViolation(f"leaf {leaf_index} in tree {pud:#x} is not occupied")
        record = None if isinstance(action, Remove) else LeafRecord(True, action.present, action.frame)
        self.roots._commit(pud, tree.write(leaf_index, record))

    def expire(self, pud: int, leaf_index: int) -> bool:
        """Drop a pending pre-addition (its page went away before Formal Addition)."""
        if (pud, leaf_index) in self.pending:
            self.pending.discard((pud, leaf_index))
            return True
        return False

    def is_occupied(self, pud: int, leaf_index: int) -> bool:
        tree = self.trees.get(pud)
        return tree is not None and tree.is_occupied(leaf_index)

    def install(self, pud: int, records: Mapping[int, LeafRecord]) -> DefenseTree:
        """Trusted bulk load of a whole tree (used for sizing experiments)."""
        tree = self._ensure_tree(pud)
        self.roots._commit(pud, tree.bulk_load(records))
        return tree

    @property
    def hash_ops(self) -> int:
        return sum(t.hash_ops for t in self.trees.values())

    def memory_bytes(self) -> int:
        """Untrusted node/leaf storage plus the secure root digests."""
        return sum(t.memory_bytes() for t in self.trees.values()) + len(self.roots) * HASH_BYTES

    def dump(self, pud: int) -> dict:
        """Debug view of one tree (JSON-serialisable)."""
        tree = self.trees[pud]
        leaves = []
        for index in sorted(tree.leaves):
            record = LeafRecord.unpack(tree.leaves[index])
            leaves.append({"index": index, "present": record.present, "frame": record.frame})
        root = self.roots.get(pud)
        return {
            "tree_id": pud,
            "arity": tree.arity,
            "height": tree.height,
            "root": root.hex() if root else None,
            "occupied_leaves": leaves,
        }

"""Victim workloads as page-access traces.

Each generator runs a real data structure whose nodes live at addresses
handed out by a bump allocator (:class:`SimHeap`) inside a virtual
region.  Every node read or write is appended to the trace, so the page
footprint follows from node sizes and operation counts rather than
being made up.  The Python objects are thrown away afterwards; only the
trace survives.

Default parameters are sized so footprints land near the victim sizes
used for the defense experiments (BTree 49, Hash 49, RBTree 40, SDG 45,
SPS 50, SSCA2 59 pages).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator

from .paging import PAGE_SHIFT, PAGE_SIZE, VA_LIMIT

DEFAULT_BASE = 0x1000_0000
DEFAULT_REGION_BYTES = 64 << 20


class WorkloadError(ValueError):
    pass


class Op(str, Enum):
    READ = "R"
    WRITE = "W"


class Kind(str, Enum):
    NTIMES = "ntimes"
    BTREE = "btree"
    HASH = "hash"
    RBTREE = "rbtree"
    SDG = "sdg"
    SPS = "sps"
    SSCA2 = "ssca2"


# Default size parameter per kind (operations, or graph scale for SSCA2).
DEFAULT_PARAMS = {
    Kind.NTIMES: 100,
    Kind.BTREE: 700,
    Kind.HASH: 1000,
    Kind.RBTREE: 450,
    Kind.SDG: 780,
    Kind.SPS: 400,
    Kind.SSCA2: 9,
}


@dataclass(frozen=True)
class WorkloadSpec:
    kind: Kind
    param: int
    seed: int = 0
    base: int = DEFAULT_BASE
    region_bytes: int = DEFAULT_REGION_BYTES

    def __post_init__(self) -> None:
        if self.param <= 0:
            raise WorkloadError(f"{self.kind.value} parameter must be positive, got {self.param}")
        if self.base % PAGE_SIZE or self.base + self.region_bytes > VA_LIMIT:
            raise WorkloadError("region must be page aligned and inside the 48-bit space")

    @property
    def label(self) -> str:
        return f"{self.kind.value}:{self.param}"

    @classmethod
    def parse(cls, text: str, seed: int = 0, **kwargs) -> WorkloadSpec:
        """``ntimes:100``, ``btree:600``, or a bare kind name for its default size."""
        name, _, param = text.partition(":")
        try:
            kind = Kind(name.strip().lower())
        except ValueError:
            raise WorkloadError(f"unknown workload {name!r}") from None
        try:
            value = int(param, 0) if param else DEFAULT_PARAMS[kind]
        except ValueError:
            raise WorkloadError(f"bad workload parameter {param!r}") from None
        return cls(kind, value, seed, **kwargs)


@dataclass(frozen=True)
class AccessTrace:
    accesses: tuple[tuple[int, Op], ...]
    seed: int
    kind: str

    def __len__(self) -> int:
        return len(self.accesses)

    def __iter__(self) -> Iterator[tuple[int, Op]]:
        return iter(self.accesses)

    def pages(self) -> list[int]:
        """Distinct virtual page numbers in first-touch order."""
        return list(dict.fromkeys(va >> PAGE_SHIFT for va, _ in self.accesses))

    def dumps(self) -> str:
        return "".join(f"{op.value} {va:#x}\n" for va, op in self.accesses)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str, kind: str = "file") -> AccessTrace:
        accesses = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] not in ("R", "W"):
                raise WorkloadError(f"line {lineno}: expected 'R|W <hex va>', got {line!r}")
            try:
                va = int(parts[1], 16)
            except ValueError:
                raise WorkloadError(f"line {lineno}: bad address {parts[1]!r}") from None
            if not 0 <= va < VA_LIMIT:
                raise WorkloadError(f"line {lineno}: address {va:#x} outside 48 bits")
            accesses.append((va, Op(parts[0])))
        return cls(tuple(accesses), 0, kind)

    @classmethod
    def load(cls, path: str | Path) -> AccessTrace:
        return cls.loads(Path(path).read_text(), kind=f"file:{Path(path).name}")


class SimHeap:
    """Bump allocator over a virtual region that logs every touch."""

    def __init__(self, base: int, region_bytes: int) -> None:
        self.base = base
        self.limit = base + region_bytes
        self.top = base
        self.trace: list[tuple[int, Op]] = []

    def alloc(self, size: int, align: int = 8) -> int:
        addr = -(-self.top // align) * align
        if addr + size > self.limit:
            raise WorkloadError(f"simulated heap exhausted ({self.limit - self.base} bytes)")
        self.top = addr + size
        return addr

    def read(self, addr: int) -> None:
        self.trace.append((addr, Op.READ))

    def write(self, addr: int) -> None:
        self.trace.append((addr, Op.WRITE))


# --- n-times -----------------------------------------------------------------


def _ntimes(heap: SimHeap, rng: random.Random, n: int) -> None:
    pages = [heap.alloc(PAGE_SIZE, PAGE_SIZE) for _ in range(n)]
    rng.shuffle(pages)
    for page in pages:
        heap.read(page + rng.randrange(0, PAGE_SIZE, 8))


# --- B-tree --------------------------------------------------------------------


class _BNode:
    __slots__ = ("addr", "keys", "children")

    def __init__(self, addr: int) -> None:
        self.addr = addr
        self.keys: list[int] = []
        self.children: list[_BNode] = []

    @property
    def leaf(self) -> bool:
        return not self.children


class _BTree:
    """CLRS B-tree with minimum degree t."""

    def __init__(self, heap: SimHeap, t: int, node_bytes: int) -> None:
        self.heap = heap
        self.t = t
        self.node_bytes = node_bytes
        self.root = self._node()
        heap.write(self.root.addr)

    def _node(self) -> _BNode:
        return _BNode(self.heap.alloc(self.node_bytes, 64))

    def search(self, key: int) -> bool:
        node = self.root
        while True:
            self.heap.read(node.addr)
            i = 0
            while i < len(node.keys) and key > node.keys[i]:
                i += 1
            if i < len(node.keys) and node.keys[i] == key:
                return True
            if node.leaf:
                return False
            node = node.children[i]

    def _split_child(self, parent: _BNode, i: int) -> None:
        t = self.t
        full = parent.children[i]
        right = self._node()
        right.keys = full.keys[t:]
        right.children = full.children[t:]
        middle = full.keys[t - 1]
        full.keys = full.keys[: t - 1]
        full.children = full.children[:t]
        parent.keys.insert(i, middle)
        parent.children.insert(i + 1, right)
        for node in (full, right, parent):
            self.heap.write(node.addr)

    def insert(self, key: int) -> None:
        root = self.root
        self.heap.read(root.addr)
        if len(root.keys) == 2 * self.t - 1:
            new_root = self._node()
            new_root.children = [root]
            self.root = new_root
            self._split_child(new_root, 0)
        node = self.root
        while True:
            self.heap.read(node.addr)
            i = len(node.keys)
            while i > 0 and key < node.keys[i - 1]:
                i -= 1
            if node.leaf:
                node.keys.insert(i, key)
                self.heap.write(node.addr)
                return
            child = node.children[i]
            self.heap.read(child.addr)
            if len(child.keys) == 2 * self.t - 1:
                self._split_child(node, i)
                if key > node.keys[i]:
                    i += 1
            node = node.children[i]

    def delete(self, key: int) -> None:
        self._delete(self.root, key)
        if not self.root.keys and not self.root.leaf:
            self.root = self.root.children[0]
            self.heap.write(self.root.addr)

    def _delete(self, node: _BNode, key: int) -> None:
        t = self.t
        self.heap.read(node.addr)
        i = 0
        while i < len(node.keys) and key > node.keys[i]:
            i += 1
        if i < len(node.keys) and node.keys[i] == key:
            if node.leaf:
                node.keys.pop(i)
                self.heap.write(node.addr)
                return
            left, right = node.children[i], node.children[i + 1]
            self.heap.read(left.addr)
            self.heap.read(right.addr)
            if len(left.keys) >= t:
                pred = self._extreme(left, last=True)
                node.keys[i] = pred
                self.heap.write(node.addr)
                self._delete(left, pred)
            elif len(right.keys) >= t:
                succ = self._extreme(right, last=False)
                node.keys[i] = succ
                self.heap.write(node.addr)
                self._delete(right, succ)
            else:
                self._merge(node, i)
                self._delete(left, key)
            return
        if node.leaf:
            return
        child = node.children[i]
        self.heap.read(child.addr)
        if len(child.keys) == t - 1:
            i = self._fill(node, i)
        self._delete(node.children[i], key)

    def _extreme(self, node: _BNode, last: bool) -> int:
        while not node.leaf:
            node = node.children[-1] if last else node.children[0]
            self.heap.read(node.addr)
        return node.keys[-1] if last else node.keys[0]

    def _merge(self, parent: _BNode, i: int) -> None:
        left, right = parent.children[i], parent.children[i + 1]
        left.keys.append(parent.keys.pop(i))
        left.keys.extend(right.keys)
        left.children.extend(right.children)
        parent.children.pop(i + 1)
        self.heap.write(left.addr)
        self.heap.write(parent.addr)

    def _fill(self, parent: _BNode, i: int) -> int:
        """Make children[i] hold at least t keys; returns the index to descend into."""
        t = self.t
        child = parent.children[i]
        if i > 0 and len(parent.children[i - 1].keys) >= t:
            left = parent.children[i - 1]
            self.heap.read(left.addr)
            child.keys.insert(0, parent.keys[i - 1])
            parent.keys[i - 1] = left.keys.pop()
            if not left.leaf:
                child.children.insert(0, left.children.pop())
            for node in (left, child, parent):
                self.heap.write(node.addr)
            return i
        if i < len(parent.children) - 1 and len(parent.children[i + 1].keys) >= t:
            right = parent.children[i + 1]
            self.heap.read(right.addr)
            child.keys.append(parent.keys[i])
            parent.keys[i] = right.keys.pop(0)
            if not right.leaf:
                child.children.append(right.children.pop(0))
            for node in (right, child, parent):
                self.heap.write(node.addr)
            return i
        if i < len(parent.children) - 1:
            self._merge(parent, i)
            return i
        self._merge(parent, i - 1)
        return i - 1

    def keys(self) -> list[int]:
        out: list[int] = []

        def visit(node: _BNode) -> None:
            for j, key in enumerate(node.keys):
                if not node.leaf:
                    visit(node.children[j])
                out.append(key)
            if not node.leaf:
                visit(node.children[-1])

        visit(self.root)
        return out


def _mixed_ops(rng: random.Random, ops: int, delete_prob: float, key_space: int):
    """Yield ('insert'|'delete', key) with deletes drawn from live keys."""
    live: list[int] = []
    present: set[int] = set()
    for _ in range(ops):
        if live and rng.random() < delete_prob:
            j = rng.randrange(len(live))
            live[j], live[-1] = live[-1], live[j]
            key = live.pop()
            present.discard(key)
            yield "delete", key
        else:
            key = rng.randrange(key_space)
            while key in present:
                key = rng.randrange(key_space)
            live.append(key)
            present.add(key)
            yield "insert", key


def _btree(heap: SimHeap, rng: random.Random, ops: int) -> _BTree:
    tree = _BTree(heap, t=4, node_bytes=2048)
    for action, key in _mixed_ops(rng, ops, 0.3, 1 << 30):
        if action == "insert":
            tree.insert(key)
        else:
            tree.delete(key)
        tree.search(rng.randrange(1 << 30))
    return tree


# --- hash table ----------------------------------------------------------------


class _Entry:
    __slots__ = ("addr", "key", "next")

    def __init__(self, addr: int, key: int) -> None:
        self.addr = addr
        self.key = key
        self.next: _Entry | None = None


class _HashTable:
    """Separate chaining with entries on the heap and freed slots recycled."""

    def __init__(self, heap: SimHeap, buckets: int, entry_bytes: int) -> None:
        self.heap = heap
        self.entry_bytes = entry_bytes
        self.table_addr = heap.alloc(buckets * 8, PAGE_SIZE)
        self.buckets: list[_Entry | None] = [None] * buckets
        self.free: list[int] = []

    def _slot(self, key: int) -> int:
        index = (key * 0x9E3779B1) % len(self.buckets)
        self.heap.read(self.table_addr + index * 8)
        return index

    def insert(self, key: int) -> None:
        index = self._slot(key)
        node = self.buckets[index]
        while node is not None:
            self.heap.read(node.addr)
            if node.key == key:
                return
            node = node.next
        addr = self.free.pop() if self.free else self.heap.alloc(self.entry_bytes)
        entry = _Entry(addr, key)
        entry.next = self.buckets[index]
        self.buckets[index] = entry
        self.heap.write(addr)
        self.heap.write(self.table_addr + index * 8)

    def delete(self, key: int) -> bool:
        index = self._slot(key)
        prev = None
        node = self.buckets[index]
        while node is not None:
            self.heap.read(node.addr)
            if node.key == key:
                if prev is None:
                    self.buckets[index] = node.next
                    self.heap.write(self.table_addr + index * 8)
                else:
                    prev.next = node.next
                    self.heap.write(prev.addr)
                self.free.append(node.addr)
                return True
            prev, node = node, node.next
        return False

    def __contains__(self, key: int) -> bool:
        node = self.buckets[self._slot(key)]
        while node is not None:
            self.heap.read(node.addr)
            if node.key == key:
                return True
            node = node.next
        return False


def _hash(heap: SimHeap, rng: random.Random, ops: int) -> _HashTable:
    table = _HashTable(heap, buckets=512, entry_bytes=512)
    for action, key in _mixed_ops(rng, ops, 0.3, 1 << 30):
        if action == "insert":
            table.insert(key)
        else:
            table.delete(key)
    return table


# --- red-black tree ---------------------------------------------------------------

_RED, _BLACK = True, False


class _RBNode:
    __slots__ = ("addr", "key", "color", "left", "right", "parent")

    def __init__(self, addr: int, key: int, color: bool, nil: _RBNode | None = None) -> None:
        self.addr = addr
        self.key = key
        self.color = color
        self.left = nil
        self.right = nil
        self.parent = nil


class _RBTree:
    """CLRS red-black tree with a shared black sentinel."""

    def __init__(self, heap: SimHeap, node_bytes: int) -> None:
        self.heap = heap
        self.node_bytes = node_bytes
        self.nil = _RBNode(heap.alloc(64), 0, _BLACK)
        self.nil.left = self.nil.right = self.nil.parent = self.nil
        self.root = self.nil

    def _r(self, node: _RBNode) -> _RBNode:
        if node is not self.nil:
            self.heap.read(node.addr)
        return node

    def _w(self, node: _RBNode) -> None:
        if node is not self.nil:
            self.heap.write(node.addr)

    def _rotate_left(self, x: _RBNode) -> None:
        y = x.right
        x.right = y.left
        if y.left is not self.nil:
            y.left.parent = x
            self._w(y.left)
        y.parent = x.parent
        if x.parent is self.nil:
            self.root = y
        elif x is x.parent.left:
            x.parent.left = y
        else:
            x.parent.right = y
        self._w(x.parent)
        y.left = x
        x.parent = y
        self._w(x)
        self._w(y)

    def _rotate_right(self, x: _RBNode) -> None:
        y = x.left
        x.left = y.right
        if y.right is not self.nil:
            y.right.parent = x
            self._w(y.right)
        y.parent = x.parent
        if x.parent is self.nil:
            self.root = y
        elif x is x.parent.right:
            x.parent.right = y
        else:
            x.parent.left = y
        self._w(x.parent)
        y.right = x
        x.parent = y
        self._w(x)
        self._w(y)

    def find(self, key: int) -> _RBNode:
        node = self.root
        while node is not self.nil:
            self._r(node)
            if key == node.key:
                return node
            node = node.left if key < node.key else node.right
        return self.nil

    def insert(self, key: int) -> None:
        z = _RBNode(self.heap.alloc(self.node_bytes, 64), key, _RED, self.nil)
        y, x = self.nil, self.root
        while x is not self.nil:
            self._r(x)
            y = x
            x = x.left if key < x.key else x.right
        z.parent = y
        if y is self.nil:
            self.root = z
        elif key < y.key:
            y.left = z
        else:
            y.right = z
        self._w(y)
        self._w(z)
        self._insert_fixup(z)

    def _insert_fixup(self, z: _RBNode) -> None:
        while z.parent.color is _RED:
            grand = self._r(z.parent.parent)
            if z.parent is grand.left:
                uncle = self._r(grand.right)
                if uncle.color is _RED:
                    z.parent.color = uncle.color = _BLACK
                    grand.color = _RED
                    for node in (z.parent, uncle, grand):
                        self._w(node)
                    z = grand
                else:
                    if z is z.parent.right:
                        z = z.parent
                        self._rotate_left(z)
                    z.parent.color = _BLACK
                    z.parent.parent.color = _RED
                    self._rotate_right(z.parent.parent)
            else:
                uncle = self._r(grand.left)
                if uncle.color is _RED:
                    z.parent.color = uncle.color = _BLACK
                    grand.color = _RED
                    for node in (z.parent, uncle, grand):
                        self._w(node)
                    z = grand
                else:
                    if z is z.parent.left:
                        z = z.parent
                        self._rotate_right(z)
                    z.parent.color = _BLACK
                    z.parent.parent.color = _RED
                    self._rotate_left(z.parent.parent)
        if self.root.color is _RED:
            self.root.color = _BLACK
            self._w(self.root)

    def _transplant(self, u: _RBNode, v: _RBNode) -> None:
        if u.parent is self.nil:
            self.root = v
        elif u is u.parent.left:
            u.parent.left = v
        else:
            u.parent.right = v
        self._w(u.parent)
        v.parent = u.parent
        self._w(v)

    def delete(self, key: int) -> bool:
        z = self.find(key)
        if z is self.nil:
            return False
        y = z
        y_color = y.color
        if z.left is self.nil:
            x = z.right
            self._transplant(z, z.right)
        elif z.right is self.nil:
            x = z.left
            self._transplant(z, z.left)
        else:
            y = self._r(z.right)
            while y.left is not self.nil:
                y = self._r(y.left)
            y_color = y.color
            x = y.right
            if y.parent is z:
                x.parent = y
            else:
                self._transplant(y, y.right)
                y.right = z.right
                y.right.parent = y
                self._w(y.right)
            self._transplant(z, y)
            y.left = z.left
            y.left.parent = y
            y.color = z.color
            self._w(y.left)
            self._w(y)
        if y_color is _BLACK:
            self._delete_fixup(x)
        return True

    def _delete_fixup(self, x: _RBNode) -> None:
        while x is not self.root and x.color is _BLACK:
            if x is x.parent.left:
                w = self._r(x.parent.right)
                if w.color is _RED:
                    w.color = _BLACK
                    x.parent.color = _RED
                    self._rotate_left(x.parent)
                    w = self._r(x.parent.right)
                if w.left.color is _BLACK and w.right.color is _BLACK:
                    w.color = _RED
                    self._w(w)
                    x = x.parent
                else:
                    if w.right.color is _BLACK:
                        w.left.color = _BLACK
                        w.color = _RED
                        self._rotate_right(w)
                        w = self._r(x.parent.right)
                    w.color = x.parent.color
                    x.parent.color = _BLACK
                    w.right.color = _BLACK
                    self._w(w.right)
                    self._rotate_left(x.parent)
                    x = self.root
            else:
                w = self._r(x.parent.left)
                if w.color is _RED:
                    w.color = _BLACK
                    x.parent.color = _RED
                    self._rotate_right(x.parent)
                    w = self._r(x.parent.left)
                if w.right.color is _BLACK and w.left.color is _BLACK:
                    w.color = _RED
                    self._w(w)
                    x = x.parent
                else:
                    if w.left.color is _BLACK:
                        w.right.color = _BLACK
                        w.color = _RED
                        self._rotate_left(w)
                        w = self._r(x.parent.left)
                    w.color = x.parent.color
                    x.parent.color = _BLACK
                    w.left.color = _BLACK
                    self._w(w.left)
                    self._rotate_right(x.parent)
                    x = self.root
        x.color = _BLACK
        self._w(x)

    def inorder(self) -> list[int]:
        out: list[int] = []
        stack: list[_RBNode] = []
        node = self.root
        while stack or node is not self.nil:
            while node is not self.nil:
                stack.append(node)
                node = node.left
            node = stack.pop()
            out.append(node.key)
            node = node.right
        return out


def _rbtree(heap: SimHeap, rng: random.Random, ops: int) -> _RBTree:
    tree = _RBTree(heap, node_bytes=512)
    for action, key in _mixed_ops(rng, ops, 0.3, 1 << 30):
        if action == "insert":
            tree.insert(key)
        else:
            tree.delete(key)
    return tree


# --- graphs -----------------------------------------------------------------------


class _Graph:
    """Adjacency lists stored in fixed-size edge blocks chained per vertex."""

    BLOCK_EDGES = 14

    def __init__(self, heap: SimHeap, vertices: int, block_bytes: int = 128) -> None:
        self.heap = heap
        self.block_bytes = block_bytes
        self.vertex_addr = heap.alloc(vertices * 16, PAGE_SIZE)
        self.adj: list[list[list[int]]] = [[] for _ in range(vertices)]  # per vertex: blocks
        self.block_addr: dict[int, list[int]] = {v: [] for v in range(vertices)}

    def _vertex(self, v: int) -> int:
        return self.vertex_addr + v * 16

    def has_edge(self, u: int, v: int) -> bool:
        self.heap.read(self._vertex(u))
        for block, addr in zip(self.adj[u], self.block_addr[u]):
            self.heap.read(addr)
            if v in block:
                return True
        return False

    def add_edge(self, u: int, v: int) -> bool:
        if self.has_edge(u, v):
            return False
        blocks = self.adj[u]
        if not blocks or len(blocks[-1]) == self.BLOCK_EDGES:
            blocks.append([])
            self.block_addr[u].append(self.heap.alloc(self.block_bytes, 64))
            self.heap.write(self._vertex(u))
        blocks[-1].append(v)
        self.heap.write(self.block_addr[u][-1])
        return True

    def remove_edge(self, u: int, v: int) -> bool:
        self.heap.read(self._vertex(u))
        for block, addr in zip(self.adj[u], self.block_addr[u]):
            self.heap.read(addr)
            if v in block:
                block.remove(v)
                self.heap.write(addr)
                return True
        return False

    def neighbours(self, u: int) -> list[int]:
        self.heap.read(self._vertex(u))
        out: list[int] = []
        for block, addr in zip(self.adj[u], self.block_addr[u]):
            self.heap.read(addr)
            out.extend(block)
        return out


def _sdg(heap: SimHeap, rng: random.Random, ops: int) -> _Graph:
    vertices = 512
    graph = _Graph(heap, vertices, block_bytes=512)
    edges: list[tuple[int, int]] = []
    for _ in range(ops):
        if edges and rng.random() < 0.3:
            j = rng.randrange(len(edges))
            edges[j], edges[-1] = edges[-1], edges[j]
            graph.remove_edge(*edges.pop())
        else:
            u, v = rng.randrange(vertices), rng.randrange(vertices)
            if graph.add_edge(u, v):
                edges.append((u, v))
    return graph


def _rmat_edge(rng: random.Random, scale: int) -> tuple[int, int]:
    u = v = 0
    for _ in range(scale):
        r = rng.random()
        u <<= 1
        v <<= 1
        if r < 0.55:
            pass
        elif r < 0.65:
            v |= 1
        elif r < 0.75:
            u |= 1
        else:
            u |= 1
            v |= 1
    return u, v


def _ssca2(heap: SimHeap, rng: random.Random, scale: int) -> _Graph:
    """Build an R-MAT graph, then run a BFS-based centrality kernel over it."""
    vertices = 1 << scale
    graph = _Graph(heap, vertices, block_bytes=448)
    for _ in range(vertices * 8):
        u, v = _rmat_edge(rng, scale)
        if u != v:
            graph.add_edge(u, v)
    scores_addr = heap.alloc(vertices * 8, PAGE_SIZE)
    for source in rng.sample(range(vertices), min(4, vertices)):
        depth = {source: 0}
        frontier = [source]
        while frontier:
            nxt = []
            for u in frontier:
                for w in graph.neighbours(u):
                    if w not in depth:
                        depth[w] = depth[u] + 1
                        heap.write(scores_addr + w * 8)
                        nxt.append(w)
            frontier = nxt
    return graph


# --- SPS -------------------------------------------------------------------------


def _sps(heap: SimHeap, rng: random.Random, ops: int) -> None:
    entry_bytes = 256
    entries = 50 * PAGE_SIZE // entry_bytes
    base = heap.alloc(entries * entry_bytes, PAGE_SIZE)
    for _ in range(ops):
        i, j = rng.randrange(entries), rng.randrange(entries)
        a, b = base + i * entry_bytes, base + j * entry_bytes
        heap.read(a)
        heap.read(b)
        heap.write(a)
        heap.write(b)


_GENERATORS = {
    Kind.NTIMES: _ntimes,
    Kind.BTREE: _btree,
    Kind.HASH: _hash,
    Kind.RBTREE: _rbtree,
    Kind.SDG: _sdg,
    Kind.SPS: _sps,
    Kind.SSCA2: _ssca2,
}


def generate_trace(spec: WorkloadSpec) -> AccessTrace:
    heap = SimHeap(spec.base, spec.region_bytes)
    rng = random.Random(f"{spec.kind.value}:{spec.param}:{spec.seed}")
    _GENERATORS[spec.kind](heap, rng, spec.param)
    return AccessTrace(tuple(heap.trace), spec.seed, spec.label)


def benchmark_suite(seed: int = 0) -> list[WorkloadSpec]:
    """The eight victim configurations used for the defense experiments."""
    return [
        WorkloadSpec(Kind.NTIMES, 100, seed),
        WorkloadSpec(Kind.NTIMES, 1000, seed),
        *(WorkloadSpec(kind, DEFAULT_PARAMS[kind], seed) for kind in
          (Kind.BTREE, Kind.HASH, Kind.RBTREE, Kind.SDG, Kind.SPS, Kind.SSCA2)),
    ]

import hashlib
import math
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shieldmmu.ddforest import (
    LEAF_SLOTS,
    AuthenticRecord,
    DefenseForest,
    DefenseTree,
    LeafRecord,
    NoRecord,
    ProtocolViolation,
    Remove,
    TamperDetected,
    Update,
    leaf_index_of,
    split_range,
    storage_breakdown,
    storage_overhead,
    tree_height,
)
from shieldmmu.paging import PageIndices


def ref_root(records: dict[int, LeafRecord], arity: int, leaf_count: int) -> bytes:
    """Straight from the digest encoding: no sparsity, no caching."""

    def leaf(i):
        rec = records.get(i)
        if rec is None:
            return hashlib.sha256(b"\x00" + bytes(10)).digest()
        body = struct.pack("<BBQ", 1, int(rec.present), rec.frame)
        return hashlib.sha256(b"\x00" + i.to_bytes(4, "big") + body).digest()

    def node(start, size, levels):
        if levels == 0:
            return leaf(start)
        k = min(arity, size)
        base, extra = divmod(size, k)
        parts, s = [], start
        for j in range(k):
            n = base + (1 if j < extra else 0)
            parts.append(node(s, n, levels - 1))
            s += n
        return hashlib.sha256(b"\x01" + b"".join(parts)).digest()

    return node(0, leaf_count, tree_height(arity, leaf_count))


def internal_node_count(arity: int, size: int, levels: int | None = None) -> int:
    # Every leaf sits at the same depth, so small subtrees keep unary links.
    if levels is None:
        levels = tree_height(arity, size)
    if levels == 0:
        return 0
    return 1 + sum(internal_node_count(arity, s, levels - 1) for s in split_range(size, arity))


def rec(frame: int, present: bool = True) -> LeafRecord:
    return LeafRecord(True, present, frame)


@pytest.fixture(scope="module")
def full8() -> tuple[DefenseForest, int]:
    forest = DefenseForest(8)
    forest.install(1, {i: rec(i) for i in range(LEAF_SLOTS)})
    return forest, 1


# Shape ---------------------------------------------------------------------


@pytest.mark.parametrize("arity,height", [(2, 18), (4, 9), (6, 7), (8, 6)])
def test_heights(arity, height):
    assert tree_height(arity) == height == math.ceil(round(math.log(LEAF_SLOTS, arity), 9))


def test_split_range_is_ceil_first():
    assert split_range(10, 4) == [3, 3, 2, 2]
    assert split_range(3, 8) == [1, 1, 1]
    assert sum(split_range(LEAF_SLOTS, 6)) == LEAF_SLOTS


def test_leaf_index_bijection():
    seen = set()
    for pmd in range(0, 512, 7):
        for pt in range(512):
            i = leaf_index_of(PageIndices(3, 5, pmd, pt))
            assert i == pmd * 512 + pt
            seen.add(i)
    assert len(seen) == len(range(0, 512, 7)) * 512
    assert leaf_index_of(PageIndices(0, 0, 511, 511)) == LEAF_SLOTS - 1


def test_degenerate_tree_rejected():
    with pytest.raises(ValueError):
        DefenseTree(1, 8, leaf_count=1)


def test_record_pack_round_trip():
    r = LeafRecord(True, False, (1 << 40) + 3)
    assert LeafRecord.unpack(r.pack()) == r


# Root agreement with the reference ----------------------------------------------


@settings(max_examples=150, deadline=None)
@given(
    arity=st.sampled_from([2, 4, 6, 8]),
    leaf_count=st.integers(2, 70),
    ops=st.lists(st.tuples(st.integers(0, 69), st.integers(0, 999), st.booleans()), max_size=40),
)
def test_incremental_root_matches_reference(arity, leaf_count, ops):
    tree = DefenseTree(9, arity, leaf_count)
    model: dict[int, LeafRecord] = {}
    for index, frame, keep in ops:
        index %= leaf_count
        if keep:
            model[index] = rec(frame)
            tree.write(index, model[index])
        else:
            model.pop(index, None)
            tree.write(index, None)
        assert tree.root == ref_root(model, arity, leaf_count)
    assert tree.recompute_root() == tree.root
    if not model:
        assert tree.nodes == {}


@pytest.mark.parametrize("arity", [2, 4, 6, 8])
def test_bulk_load_matches_incremental(arity):
    rng = random.Random(arity)
    records = {rng.randrange(LEAF_SLOTS): rec(rng.randrange(1000)) for _ in range(60)}
    a = DefenseTree(1, arity)
    for i, r in records.items():
        a.write(i, r)
    b = DefenseTree(1, arity)
    assert b.bulk_load(records) == a.root
    assert a.nodes == b.nodes


def test_write_touches_exactly_one_path():
    rng = random.Random(11)
    tree = DefenseTree(1, 8)
    tree.bulk_load({rng.randrange(LEAF_SLOTS): rec(i) for i in range(300)})
    for _ in range(50):
        leaf = rng.randrange(LEAF_SLOTS)
        before = dict(tree.nodes)
        tree.write(leaf, rec(rng.randrange(1 << 30)))
        changed = {k for k in set(before) | set(tree.nodes) if before.get(k) != tree.nodes.get(k)}
        assert changed == {(d, s) for d, s, _, _ in tree.path(leaf)}
        assert len(changed) == tree.height


# Protocol ----------------------------------------------------------------------


def test_two_phase_insert():
    forest = DefenseForest()
    with pytest.raises(ProtocolViolation):
        forest.formal_add(5, 10, True, 1)
    forest.pre_add(5, 10)
    forest.pre_add(5, 10)
    assert forest.verify_leaf(5, 10) == NoRecord()
    forest.formal_add(5, 10, True, 42)
    assert forest.verify_leaf(5, 10) == AuthenticRecord(rec(42))
    forest.pre_add(5, 10)
    with pytest.raises(ProtocolViolation):
        forest.formal_add(5, 10, True, 43)


def test_expire_cancels_pre_add():
    forest = DefenseForest()
    forest.pre_add(5, 1)
    assert forest.expire(5, 1)
    assert not forest.expire(5, 1)
    with pytest.raises(ProtocolViolation):
        forest.formal_add(5, 1, True, 1)


def test_update_and_remove():
    forest = DefenseForest()
    forest.pre_add(5, 7)
    empty_root = forest.roots.get(5)
    forest.formal_add(5, 7, True, 3)
    forest.update_or_remove_leaf(5, 7, Update(False, 3))
    assert forest.verify_leaf(5, 7) == AuthenticRecord(rec(3, present=False))
    forest.update_or_remove_leaf(5, 7, Remove())
    assert forest.verify_leaf(5, 7) == NoRecord()
    assert forest.roots.get(5) == empty_root
    assert forest.tree(5).nodes == {}
    with pytest.raises(ProtocolViolation):
        forest.update_or_remove_leaf(5, 7, Remove())


def test_unknown_tree_has_no_record():
    assert DefenseForest().verify_leaf(123, 0) == NoRecord()


def test_trees_are_isolated():
    forest = DefenseForest()
    for pud in (1, 2):
        forest.pre_add(pud, 0)
        forest.formal_add(pud, 0, True, pud)
    root2 = forest.roots.get(2)
    forest.pre_add(1, 99)
    forest.formal_add(1, 99, True, 5)
    forest.update_or_remove_leaf(1, 0, Remove())
    assert forest.roots.get(2) == root2
    assert forest.verify_leaf(2, 0) == AuthenticRecord(rec(2))
    # Same leaf slot, different trees, different records.
    forest.tree(1).leaves[0] = forest.tree(2).leaves[0]
    assert forest.verify_leaf(1, 0) != AuthenticRecord(rec(2))


def test_dump_is_plain_data():
    import json

    forest = DefenseForest(4)
    forest.pre_add(3, 8)
    forest.formal_add(3, 8, True, 9)
    dumped = json.loads(json.dumps(forest.dump(3)))
    assert dumped["height"] == 9
    assert dumped["occupied_leaves"] == [{"index": 8, "present": True, "frame": 9}]


# Verification cost ---------------------------------------------------------------


@pytest.mark.parametrize("arity,expected", [(2, 18), (4, 9), (6, 7), (8, 6)])
def test_verify_hash_ops(arity, expected):
    forest = DefenseForest(arity)
    rng = random.Random(arity)
    leaves = rng.sample(range(LEAF_SLOTS), 20)
    for leaf in leaves:
        forest.pre_add(1, leaf)
        forest.formal_add(1, leaf, True, leaf)
    for leaf in leaves + [rng.randrange(LEAF_SLOTS)]:
        before = forest.hash_ops
        forest.verify_leaf(1, leaf)
        assert forest.hash_ops - before == expected


def test_verify_cost_on_full_tree(full8):
    forest, pud = full8
    before = forest.hash_ops
    for leaf in (0, 1234, LEAF_SLOTS - 1):
        assert forest.verify_leaf(pud, leaf) == AuthenticRecord(rec(leaf))
    assert forest.hash_ops - before == 3 * 6


# Tampering ----------------------------------------------------------------------


def _tampers(tree: DefenseTree, rng: random.Random):
    """Yield (description, undo) after applying one single-item modification."""
    for key in list(tree.nodes):
        good = tree.nodes[key]
        for bad in (bytes([good[0] ^ 1]) + good[1:], rng.randbytes(32)):
            tree.nodes[key] = bad
            yield ("node", key), key
            tree.nodes[key] = good
        del tree.nodes[key]
        yield ("drop", key), key
        tree.nodes[key] = good
    for index in range(tree.leaf_count):
        good = tree.leaves.get(index)
        variants = [rec(index + 1000).pack(), LeafRecord(True, False, index).pack()]
        if good is not None:
            variants.append(bytes([good[0]]) + good[1:2] + bytes([good[2] ^ 0x80]) + good[3:])
        for bad in variants:
            if bad == good:
                continue
            tree.leaves[index] = bad
            yield ("leaf", index), (tree.height, index)
        if good is not None:
            del tree.leaves[index]
            yield ("unset", index), (tree.height, index)
            tree.leaves[index] = good
        else:
            tree.leaves.pop(index, None)


def _covers(tree: DefenseTree, key: tuple[int, int], leaf: int) -> bool:
    depth, start = key
    if depth == tree.height:
        return start == leaf
    return any(d == depth and s == start for d, s, _, _ in tree.path(leaf))


@pytest.mark.parametrize("occupied", [range(8), [0, 3, 4, 7], [5]])
def test_exhaustive_single_tamper_small_tree(occupied):
    forest = DefenseForest(2, leaf_count=8)
    for leaf in occupied:
        forest.pre_add(1, leaf)
        forest.formal_add(1, leaf, True, leaf + 100)
    tree = forest.tree(1)
    truth = {leaf: forest.verify_leaf(1, leaf) for leaf in range(8)}
    misses = 0
    cases = 0
    for _, key in _tampers(tree, random.Random(0)):
        if tree.recompute_root() == forest.roots.get(1) and key[0] == tree.height:
            continue  # e.g. unsetting an already empty slot: nothing changed
        cases += 1
        for leaf in range(8):
            got = forest.verify_leaf(1, leaf)
            if _covers(tree, key, leaf):
                misses += not isinstance(got, TamperDetected)
            else:
                # Off-path tampering may or may not be noticed, but never yields a wrong record.
                assert isinstance(got, TamperDetected) or got == truth[leaf]
    assert cases > 20
    assert misses == 0
    assert all(forest.verify_leaf(1, leaf) == truth[leaf] for leaf in range(8))


def test_random_tampering_full_tree(full8):
    forest, pud = full8
    tree = forest.tree(pud)
    rng = random.Random(2024)
    keys = list(tree.nodes)
    misses = 0
    for trial in range(10_000):
        if trial % 2:
            key = keys[rng.randrange(len(keys))]
            good = tree.nodes[key]
            tree.nodes[key] = rng.randbytes(32)
            depth, start = key
            leaf = start + rng.randrange(min(8 ** (tree.height - depth), LEAF_SLOTS - start))
            misses += not isinstance(forest.verify_leaf(pud, leaf), TamperDetected)
            tree.nodes[key] = good
        else:
            leaf = rng.randrange(LEAF_SLOTS)
            good = tree.leaves[leaf]
            tree.leaves[leaf] = LeafRecord(True, rng.random() < 0.5, rng.randrange(1 << 32)).pack()
            if tree.leaves[leaf] == good:
                continue
            misses += not isinstance(forest.verify_leaf(pud, leaf), TamperDetected)
            tree.leaves[leaf] = good
    assert misses == 0
    assert tree.recompute_root() == forest.roots.get(pud)


# Storage -------------------------------------------------------------------------


def test_overhead_full_m8(full8):
    forest, pud = full8
    tree = forest.tree(pud)
    parts = storage_breakdown(tree)
    assert len(tree.nodes) == internal_node_count(8, LEAF_SLOTS) == 37449
    assert parts.index_ratio == pytest.approx(37449 / LEAF_SLOTS)
    assert parts.hash_ratio == pytest.approx(1 / 8)
    assert storage_overhead(tree) == pytest.approx(0.268, abs=0.02)


def test_overhead_full_m2_components():
    tree = DefenseTree(1, 2)
    tree.bulk_load({i: rec(i) for i in range(LEAF_SLOTS)})
    parts = storage_breakdown(tree)
    assert parts.index_ratio == pytest.approx(1.0, abs=1e-5)
    assert parts.hash_ratio == pytest.approx(0.5)


@pytest.mark.parametrize("arity", [2, 4, 6, 8])
def test_overhead_matches_node_count_oracle(arity):
    size = 5000
    tree = DefenseTree(1, arity, leaf_count=size)
    tree.bulk_load({i: rec(i) for i in range(size)})
    assert len(tree.nodes) == internal_node_count(arity, size)


def test_overhead_of_empty_tree_is_zero():
    assert storage_overhead(DefenseTree(1)) == 0.0


def test_memory_shrinks_with_arity_at_equal_occupancy():
    rng = random.Random(5)
    records = {rng.randrange(LEAF_SLOTS): rec(i) for i in range(400)}
    sizes = []
    for arity in (2, 4, 6, 8):
        tree = DefenseTree(1, arity)
        tree.bulk_load(records)
        sizes.append(tree.memory_bytes())
    assert sizes == sorted(sizes, reverse=True)

"""Authenticated data structure: a Merkle tree over the state-grouped layout.

Leaves hold records in canonical order (all NR records before all R
records, ascending key within each group). A state transition does not
shift the layout: the old leaf is replaced by an invalid marker and the
record is inserted next to its new neighbour, turning that neighbour's leaf
into an internal node. Nodes are immutable, so a tree snapshot is just a
reference to its root node.

Hashing (SHA-256, one-byte domain tags):

* valid leaf:   ``H(0x00 || state || len(key) as u32 || key || value)``
* invalid leaf: same layout with tag ``0x03``
* internal:     ``H(0x01 || left || right)``
* empty tree:   ``H(0x02 || b"feed-repl/empty")``

The data owner never needs the full tree: :func:`do_update_root` and
:func:`do_relocate_root` recompute the new root from proofs alone.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from typing import Union

from .core import Key, Record, ReplState, canonical_sort_key
from .errors import AdsError, IntegrityError
from .logging_config import get_logger

logger = get_logger(__name__)

Digest = bytes
Position = tuple[int, Key]
Path = tuple[int, ...]

TAG_LEAF = b"\x00"
TAG_NODE = b"\x01"
TAG_EMPTY = b"\x02"
TAG_INVALID = b"\x03"

EMPTY_ROOT: Digest = hashlib.sha256(TAG_EMPTY + b"feed-repl/empty").digest()

COMPACTION_THRESHOLD = 0.5


def leaf_digest(record: Record, invalid: bool = False) -> Digest:
    key = record.key.encode("utf-8")
    tag = TAG_INVALID if invalid else TAG_LEAF
    return hashlib.sha256(
        tag
        + bytes([int(record.state)])
        + len(key).to_bytes(4, "big")
        + key
        + record.value
    ).digest()


def node_digest(left: Digest, right: Digest) -> Digest:
    return hashlib.sha256(TAG_NODE + left + right).digest()


# -- tree nodes ---------------------------------------------------------------


class _Leaf:
    __slots__ = ("record", "invalid", "digest")

    leaves = 1

    def __init__(self, record: Record, invalid: bool = False):
        self.record = record
        self.invalid = invalid
        self.digest = leaf_digest(record, invalid)

    @property
    def invalid_count(self) -> int:
        return 1 if self.invalid else 0

    @property
    def lo(self) -> Position | None:
        return None if self.invalid else self.record.position

    hi = lo


class _Node:
    __slots__ = ("left", "right", "digest", "leaves", "invalid_count", "lo", "hi")

    def __init__(self, left: _Tree, right: _Tree):
        self.left = left
        self.right = right
        self.digest = node_digest(left.digest, right.digest)
        self.leaves = left.leaves + right.leaves
        self.invalid_count = left.invalid_count + right.invalid_count
        self.lo = left.lo if left.lo is not None else right.lo
        self.hi = right.hi if right.hi is not None else left.hi


_Tree = Union[_Leaf, _Node]


def _build_nodes(level: list[_Tree]) -> _Tree | None:
    if not level:
        return None
    while len(level) > 1:
        paired: list[_Tree] = [
            _Node(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)
        ]
        if len(level) % 2:
            # odd count: last node moves up unchanged
            paired.append(level[-1])
        level = paired
    return level[0]


def _iter_leaves(node: _Tree | None) -> Iterator[_Leaf]:
    stack: list[_Tree] = [node] if node is not None else []
    while stack:
        n = stack.pop()
        if isinstance(n, _Leaf):
            yield n
        else:
            stack.append(n.right)
            stack.append(n.left)


def _index_of(node: _Tree | None, pos: Position) -> int | None:
    offset = 0
    while isinstance(node, _Node):
        if node.left.hi is not None and pos <= node.left.hi:
            node = node.left
        else:
            offset += node.left.leaves
            node = node.right
    if node is None or node.invalid or node.record.position != pos:
        return None
    return offset


def _pred(node: _Tree, pos: Position, offset: int = 0) -> int | None:
    """In-order index of the last valid leaf positioned before ``pos``."""
    if isinstance(node, _Leaf):
        return offset if node.lo is not None and node.lo < pos else None
    if node.right.lo is not None and node.right.lo < pos:
        return _pred(node.right, pos, offset + node.left.leaves)
    if node.left.lo is not None and node.left.lo < pos:
        return _pred(node.left, pos, offset)
    return None


def _succ(node: _Tree, pos: Position, offset: int = 0) -> int | None:
    """In-order index of the first valid leaf positioned after ``pos``."""
    if isinstance(node, _Leaf):
        return offset if node.hi is not None and node.hi > pos else None
    if node.left.hi is not None and node.left.hi > pos:
        return _succ(node.left, pos, offset)
    if node.right.hi is not None and node.right.hi > pos:
        return _succ(node.right, pos, offset + node.left.leaves)
    return None


def _leaf_at(node: _Tree, i: int) -> _Leaf:
    while isinstance(node, _Node):
        if i < node.left.leaves:
            node = node.left
        else:
            i -= node.left.leaves
            node = node.right
    return node


def _path_at(node: _Tree, i: int) -> tuple[Path, list[Digest]]:
    """Bits and sibling digests from the root down to leaf ``i``."""
    bits: list[int] = []
    siblings: list[Digest] = []
    while isinstance(node, _Node):
        if i < node.left.leaves:
            bits.append(0)
            siblings.append(node.right.digest)
            node = node.left
        else:
            i -= node.left.leaves
            bits.append(1)
            siblings.append(node.left.digest)
            node = node.right
    return tuple(bits), siblings


def _replace(node: _Tree, i: int, replacement: _Tree) -> _Tree:
    if isinstance(node, _Leaf):
        return replacement
    if i < node.left.leaves:
        return _Node(_replace(node.left, i, replacement), node.right)
    return _Node(node.left, _replace(node.right, i - node.left.leaves, replacement))


# -- proofs -------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipProof:
    """Leaf payload plus sibling digests from the leaf up to the root.

    ``directions[i]`` is 0 when the node at that level is a left child (its
    sibling sits to the right) and 1 when it is a right child.
    """

    record: Record
    siblings: tuple[Digest, ...]
    directions: tuple[int, ...]

    @property
    def path(self) -> Path:
        return tuple(reversed(self.directions))

    def words(self) -> int:
        return len(self.siblings)

    def hash_ops(self) -> int:
        return 1 + len(self.siblings)


@dataclass(frozen=True)
class ProofLeaf:
    record: Record
    invalid: bool = False


@dataclass(frozen=True)
class ProofHash:
    digest: Digest


@dataclass(frozen=True)
class ProofNode:
    left: ProofShape
    right: ProofShape


ProofShape = Union[ProofLeaf, ProofHash, ProofNode]


@dataclass(frozen=True)
class RangeProof:
    """Records of one state group in ``[start_key, end_key]`` with evidence.

    ``shape`` is the tree pruned to the contiguous run of leaves between
    the two boundary records; everything else is a sibling digest.
    """

    state: ReplState
    start_key: Key
    end_key: Key
    records: tuple[Record, ...]
    shape: ProofShape | None

    def revealed(self) -> list[ProofLeaf]:
        return [leaf for _, leaf in _shape_leaves(self.shape)]

    def sibling_digests(self) -> list[Digest]:
        return [d for _, d in _shape_hashes(self.shape)]

    def boundary_records(self) -> list[Record]:
        lo = (int(self.state), self.start_key)
        hi = (int(self.state), self.end_key)
        return [
            leaf.record
            for leaf in self.revealed()
            if leaf.invalid or not lo <= leaf.record.position <= hi
        ]

    def words(self) -> int:
        """Proof words: one per sibling digest plus boundary payloads."""
        return len(self.sibling_digests()) + sum(
            r.value_words for r in self.boundary_records()
        )

    def hash_ops(self) -> tuple[list[int], int]:
        """(leaf word counts hashed, internal hashes) needed to verify."""
        leaf_words = [leaf.record.value_words for leaf in self.revealed()]
        return leaf_words, _count_nodes(self.shape)


def _count_nodes(shape: ProofShape | None) -> int:
    if isinstance(shape, ProofNode):
        return 1 + _count_nodes(shape.left) + _count_nodes(shape.right)
    return 0


def _shape_leaves(shape: ProofShape | None, path: Path = ()) -> Iterator[tuple[Path, ProofLeaf]]:
    if isinstance(shape, ProofLeaf):
        yield path, shape
    elif isinstance(shape, ProofNode):
        yield from _shape_leaves(shape.left, path + (0,))
        yield from _shape_leaves(shape.right, path + (1,))


def _shape_hashes(shape: ProofShape | None, path: Path = ()) -> Iterator[tuple[Path, Digest]]:
    if isinstance(shape, ProofHash):
        yield path, shape.digest
    elif isinstance(shape, ProofNode):
        yield from _shape_hashes(shape.left, path + (0,))
        yield from _shape_hashes(shape.right, path + (1,))


def _shape_digest(shape: ProofShape, known: dict[Path, Digest], path: Path = ()) -> Digest:
    if isinstance(shape, ProofLeaf):
        d = leaf_digest(shape.record, shape.invalid)
    elif isinstance(shape, ProofHash):
        d = shape.digest
    else:
        d = node_digest(
            _shape_digest(shape.left, known, path + (0,)),
            _shape_digest(shape.right, known, path + (1,)),
        )
    known[path] = d
    return d


def _in_order(shape: ProofShape | None) -> Iterator[ProofLeaf | ProofHash]:
    if isinstance(shape, ProofNode):
        yield from _in_order(shape.left)
        yield from _in_order(shape.right)
    elif shape is not None:
        yield shape


def _prune(node: _Tree, lo: int, hi: int, offset: int = 0) -> ProofShape:
    end = offset + node.leaves - 1
    if end < lo or offset > hi:
        return ProofHash(node.digest)
    if isinstance(node, _Leaf):
        return ProofLeaf(node.record, node.invalid)
    return ProofNode(
        _prune(node.left, lo, hi, offset),
        _prune(node.right, lo, hi, offset + node.left.leaves),
    )


# -- the tree -----------------------------------------------------------------


class AdsTree:
    """Merkle tree over canonical records; single writer, cheap snapshots."""

    def __init__(self, root: _Tree | None = None):
        self._root = root

    @classmethod
    def build(cls, records: Sequence[Record]) -> AdsTree:
        return build(records)

    @property
    def root(self) -> Digest:
        return EMPTY_ROOT if self._root is None else self._root.digest

    @property
    def size(self) -> int:
        return 0 if self._root is None else self._root.leaves

    @property
    def invalid_count(self) -> int:
        return 0 if self._root is None else self._root.invalid_count

    @property
    def valid_count(self) -> int:
        return self.size - self.invalid_count

    def __len__(self) -> int:
        return self.valid_count

    def snapshot(self) -> AdsTree:
        return AdsTree(self._root)

    def leaves(self) -> list[tuple[Record, bool]]:
        return [(leaf.record, leaf.invalid) for leaf in _iter_leaves(self._root)]

    def records(self) -> list[Record]:
        return [leaf.record for leaf in _iter_leaves(self._root) if not leaf.invalid]

    def find(self, key: Key, state: ReplState) -> Record | None:
        i = _index_of(self._root, (int(state), key))
        return None if i is None else _leaf_at(self._root, i).record  # type: ignore[arg-type]

    def get(self, key: Key) -> Record | None:
        """Valid record for ``key`` in whichever group holds it."""
        for state in (ReplState.NR, ReplState.R):
            rec = self.find(key, state)
            if rec is not None:
                return rec
        return None

    def depth_of(self, key: Key, state: ReplState) -> int | None:
        i = _index_of(self._root, (int(state), key))
        return None if i is None else len(_path_at(self._root, i)[0])  # type: ignore[arg-type]

    def needs_compaction(self) -> bool:
        return self.size > 0 and self.invalid_count > COMPACTION_THRESHOLD * self.size

    def compact(self) -> None:
        self._root = build(self.records())._root

    # SP-side mutations; each one has a proof-only counterpart for the DO.

    def update_value(self, record: Record) -> None:
        """Replace the value of an existing valid leaf in place."""
        i = _index_of(self._root, record.position)
        if i is None:
            raise AdsError(f"no valid leaf for {record.key!r} in {record.state.name}")
        self._root = _replace(self._root, i, _Leaf(record))  # type: ignore[arg-type]

    def apply_relocation(self, key: Key, new_state: ReplState, record: Record) -> None:
        """Move ``key`` to ``new_state`` carrying ``record``'s value."""
        old_state = ReplState.R if new_state == ReplState.NR else ReplState.NR
        old_i = _index_of(self._root, (int(old_state), key))
        if old_i is None:
            raise AdsError(f"no valid leaf for {key!r} in {old_state.name}")
        new_rec = record.with_state(new_state)
        if self.valid_count == 1:
            self._root = _Leaf(new_rec)
            return
        assert self._root is not None
        old_leaf = _leaf_at(self._root, old_i)
        nb_i, new_on_right = _neighbour(self._root, new_rec.position, new_state)
        self._root = _replace(self._root, old_i, _Leaf(old_leaf.record, invalid=True))
        nb_leaf = _leaf_at(self._root, nb_i)
        pair = _Node(nb_leaf, _Leaf(new_rec)) if new_on_right else _Node(_Leaf(new_rec), nb_leaf)
        self._root = _replace(self._root, nb_i, pair)


def _neighbour(root: _Tree, pos: Position, group: ReplState) -> tuple[int, bool]:
    """Leaf index the relocated record pairs with, and whether it goes right.

    Preference: predecessor in the target group, then successor in the
    group; with an empty group, the adjacent leaf across the group border.
    """
    pred = _pred(root, pos)
    succ = _succ(root, pos)
    pred_state = None if pred is None else _leaf_at(root, pred).record.state
    succ_state = None if succ is None else _leaf_at(root, succ).record.state
    if pred is not None and pred_state == group:
        return pred, True
    if succ is not None and succ_state == group:
        return succ, False
    if group == ReplState.NR and succ is not None:
        return succ, False
    if pred is not None:
        return pred, True
    if succ is not None:
        return succ, False
    raise AdsError("relocation needs at least one other leaf")


def build(records: Sequence[Record]) -> AdsTree:
    """Build a tree over records given in canonical order.

    Raises:
        AdsError: on duplicate keys or records out of canonical order.
    """
    seen: set[Key] = set()
    prev: Position | None = None
    for rec in records:
        if rec.key in seen:
            raise AdsError(f"duplicate key {rec.key!r}")
        seen.add(rec.key)
        pos = canonical_sort_key(rec)
        if prev is not None and pos <= prev:
            raise AdsError(f"record {rec.key!r} is out of canonical order")
        prev = pos
    return AdsTree(_build_nodes([_Leaf(r) for r in records]))


def prove_key(
    tree: AdsTree, key: Key, state: ReplState
) -> MembershipProof | RangeProof:
    """Membership proof for ``(key, state)``; a boundary proof if absent."""
    i = _index_of(tree._root, (int(state), key))
    if i is None:
        return prove_range(tree, key, key, state)
    assert tree._root is not None
    bits, siblings = _path_at(tree._root, i)
    record = _leaf_at(tree._root, i).record
    return MembershipProof(record, tuple(reversed(siblings)), tuple(reversed(bits)))


def verify_membership(root: Digest, record: Record, proof: MembershipProof) -> bool:
    if not isinstance(proof, MembershipProof) or proof.record != record:
        return False
    if len(proof.siblings) != len(proof.directions):
        return False
    h = leaf_digest(record)
    for sibling, direction in zip(proof.siblings, proof.directions):
        h = node_digest(h, sibling) if direction == 0 else node_digest(sibling, h)
    return h == root


def prove_range(
    tree: AdsTree, start_key: Key, end_key: Key, state: ReplState = ReplState.NR
) -> RangeProof:
    """All valid ``state`` records with keys in ``[start_key, end_key]``."""
    if start_key > end_key:
        raise AdsError(f"empty range [{start_key!r}, {end_key!r}]")
    if tree._root is None:
        return RangeProof(state, start_key, end_key, (), None)
    root = tree._root
    lo_pos = (int(state), start_key)
    hi_pos = (int(state), end_key)
    pred = _pred(root, lo_pos)
    succ = _succ(root, hi_pos)
    first = 0 if pred is None else pred
    last = root.leaves - 1 if succ is None else succ
    shape = _prune(root, first, last)
    records = tuple(
        leaf.record
        for _, leaf in _shape_leaves(shape)
        if not leaf.invalid and lo_pos <= leaf.record.position <= hi_pos
    )
    return RangeProof(state, start_key, end_key, records, shape)


def verify_range(
    root: Digest,
    key_range: tuple[Key, Key],
    proof: RangeProof,
    state: ReplState = ReplState.NR,
) -> bool:
    """True iff ``proof.records`` is exactly the group's content of the range."""
    start_key, end_key = key_range
    if start_key > end_key or proof.state != state:
        return False
    if (proof.start_key, proof.end_key) != (start_key, end_key):
        return False
    if proof.shape is None:
        return root == EMPTY_ROOT and not proof.records
    if _shape_digest(proof.shape, {}) != root:
        return False

    items = list(_in_order(proof.shape))
    leaf_idx = [i for i, it in enumerate(items) if isinstance(it, ProofLeaf)]
    if not leaf_idx:
        return False
    first, last = leaf_idx[0], leaf_idx[-1]
    if any(isinstance(it, ProofHash) for it in items[first : last + 1]):
        return False

    lo_pos = (int(state), start_key)
    hi_pos = (int(state), end_key)
    head, tail = items[first], items[last]
    assert isinstance(head, ProofLeaf) and isinstance(tail, ProofLeaf)
    if first > 0 and (head.invalid or head.record.position >= lo_pos):
        return False
    if last < len(items) - 1 and (tail.invalid or tail.record.position <= hi_pos):
        return False

    valid = [it.record for it in items if isinstance(it, ProofLeaf) and not it.invalid]
    positions = [r.position for r in valid]
    if any(a >= b for a, b in zip(positions, positions[1:])):
        return False
    found = tuple(r for r in valid if lo_pos <= r.position <= hi_pos)
    return found == tuple(proof.records)


def proves_absent(root: Digest, key: Key, state: ReplState, proof: RangeProof) -> bool:
    return verify_range(root, (key, key), proof, state) and not proof.records


# -- data-owner side ----------------------------------------------------------


def _membership_paths(proof: MembershipProof) -> dict[Path, Digest]:
    known: dict[Path, Digest] = {}
    path = proof.path
    for depth, sibling in enumerate(reversed(proof.siblings)):
        known[path[:depth] + (1 - path[depth],)] = sibling
    return known


def _recompute_up(known: dict[Path, Digest], path: Path) -> None:
    for depth in range(len(path) - 1, -1, -1):
        parent = path[:depth]
        known[parent] = node_digest(known[parent + (0,)], known[parent + (1,)])


def do_update_root(
    old_root: Digest, proof: MembershipProof, old_record: Record, new_record: Record
) -> Digest:
    """Root after an in-place value update, computed from the proof alone.

    Raises:
        IntegrityError: if the proof does not verify against ``old_root``.
        AdsError: if the update would move the record.
    """
    if not verify_membership(old_root, old_record, proof):
        raise IntegrityError(f"membership proof for {old_record.key!r} rejected")
    if new_record.position != old_record.position:
        raise AdsError("in-place update cannot change key or state")
    h = leaf_digest(new_record)
    for sibling, direction in zip(proof.siblings, proof.directions):
        h = node_digest(h, sibling) if direction == 0 else node_digest(sibling, h)
    return h


def do_relocate_root(
    old_root: Digest,
    old_proof: MembershipProof,
    new_position_proof: RangeProof,
    record: Record,
    new_state: ReplState,
    *,
    sole_record: bool = False,
) -> Digest:
    """Root after moving a record to ``new_state``, computed from proofs.

    Args:
        old_root: Root the proofs were issued against.
        old_proof: Membership proof of the record at its current location.
        new_position_proof: Proof that the key is absent from the target
            group; its boundary records are the new location's neighbours.
        record: The record carrying its latest value.
        new_state: Target replication state.
        sole_record: The data owner holds no other record; the tree
            collapses to the single relocated leaf.

    Raises:
        IntegrityError: if either proof fails against ``old_root``.
    """
    old_record = old_proof.record
    if old_record.key != record.key or old_record.state == new_state:
        raise AdsError("relocation must move the same key to the other group")
    if not verify_membership(old_root, old_record, old_proof):
        raise IntegrityError(f"membership proof for {old_record.key!r} rejected")
    if not proves_absent(old_root, record.key, new_state, new_position_proof):
        raise IntegrityError(f"new-location proof for {record.key!r} rejected")

    new_rec = record.with_state(new_state)
    if sole_record:
        return leaf_digest(new_rec)
    revealed = list(_shape_leaves(new_position_proof.shape))

    known: dict[Path, Digest] = {}
    _shape_digest(new_position_proof.shape, known)  # type: ignore[arg-type]
    known.update(_membership_paths(old_proof))
    old_path = old_proof.path
    known[old_path] = leaf_digest(old_record, invalid=True)
    _recompute_up(known, old_path)

    new_pos = new_rec.position
    pred = [(p, leaf) for p, leaf in revealed if not leaf.invalid and leaf.record.position < new_pos]
    succ = [(p, leaf) for p, leaf in revealed if not leaf.invalid and leaf.record.position > new_pos]
    pred_nb = pred[-1] if pred else None
    succ_nb = succ[0] if succ else None
    if pred_nb and pred_nb[1].record.state == new_state:
        nb_path, on_right = pred_nb[0], True
    elif succ_nb and succ_nb[1].record.state == new_state:
        nb_path, on_right = succ_nb[0], False
    elif new_state == ReplState.NR and succ_nb:
        nb_path, on_right = succ_nb[0], False
    elif pred_nb:
        nb_path, on_right = pred_nb[0], True
    elif succ_nb:
        nb_path, on_right = succ_nb[0], False
    else:
        raise IntegrityError("new-location proof reveals no neighbour")

    nb = known[nb_path]
    fresh = leaf_digest(new_rec)
    known[nb_path] = node_digest(nb, fresh) if on_right else node_digest(fresh, nb)
    _recompute_up(known, nb_path)
    logger.debug("relocated %r to %s", record.key, new_state.name)
    return known[()]


@dataclass
class FourRecordFixture:
    """The four-record layout used throughout the docs and tests."""

    records: list[Record] = field(default_factory=list)

    @classmethod
    def create(cls) -> FourRecordFixture:
        def rec(key: Key, state: ReplState, value: int) -> Record:
            return Record(key, 1, value.to_bytes(32, "big"), state)

        return cls(
            [
                rec("w", ReplState.NR, 100),
                rec("y", ReplState.NR, 200),
                rec("x", ReplState.R, 300),
                rec("z", ReplState.R, 400),
            ]
        )

    def tree(self) -> AdsTree:
        return build(self.records)

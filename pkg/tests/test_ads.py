"""Tests for the Merkle tree, its proofs and proof-only root recomputation."""

import json

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from feed_repl.ads import (
    EMPTY_ROOT,
    AdsTree,
    MembershipProof,
    RangeProof,
    build,
    do_relocate_root,
    do_update_root,
    leaf_digest,
    node_digest,
    prove_key,
    prove_range,
    proves_absent,
    verify_membership,
    verify_range,
)
from feed_repl.core import Record, ReplState, canonical_order
from feed_repl.errors import AdsError, IntegrityError

NR, R = ReplState.NR, ReplState.R

# locked after the first computation
GOLDEN_ROOT = "c5bab793a209e1835a7bc497cab9908c35e3ada49991b46abb78df78dfbb25a3"
GOLDEN_LEAF_W = "8398d1f4314a92fd5f333f5dee9b5b9332cf6a1fe641264575669485e2962e9d"
GOLDEN_UPDATED = "c719d87f1fffff4272dfda9e24c69e8bced9c1b49196e5edbb9e621a0d8bcefa"
GOLDEN_RELOCATED = "19e32ab3c1426ef571854f4ea4500b8f732118dffe154e195f38391305accfdf"
GOLDEN_EMPTY = "bd3598d647c7a9ec8ff0d0798afc1863c4be2072594485385b50bef1158b650e"


def word(n):
    return n.to_bytes(32, "big")


def rec(key, state, value):
    return Record(key, 1, word(value), state)


@pytest.fixture
def tree(four_records):
    return four_records.tree()


@pytest.fixture
def leaves(tree):
    return {k: leaf_digest(tree.get(k)) for k in "wxyz"}


class TestFixtureLayout:
    def test_matches_json_fixture(self, fixtures_dir, four_records):
        data = json.loads((fixtures_dir / "four_records.json").read_text())
        records = [rec(r["key"], ReplState[r["state"]], r["value"]) for r in data["records"]]
        assert records == four_records.records
        assert [r.key for r in canonical_order(records)] == data["canonical_order"]

    def test_golden_digests(self, tree):
        assert tree.root.hex() == GOLDEN_ROOT
        assert leaf_digest(tree.get("w")).hex() == GOLDEN_LEAF_W
        assert EMPTY_ROOT.hex() == GOLDEN_EMPTY

    def test_root_structure(self, tree, leaves):
        left = node_digest(leaves["w"], leaves["y"])
        right = node_digest(leaves["x"], leaves["z"])
        assert tree.root == node_digest(left, right)

    def test_sizes(self, tree):
        assert tree.size == 4
        assert len(tree) == 4
        assert tree.invalid_count == 0


class TestMembership:
    @pytest.mark.parametrize("key", ["w", "x"])
    def test_siblings_match_fixture(self, fixtures_dir, tree, leaves, key):
        data = json.loads((fixtures_dir / "four_records.json").read_text())

        def digest(spec):
            if spec[0] == "leaf":
                return leaves[spec[1]]
            return node_digest(leaves[spec[1]], leaves[spec[2]])

        state = tree.get(key).state
        proof = prove_key(tree, key, state)
        assert proof.siblings == tuple(digest(s) for s in data["membership_siblings"][key])

    def test_directions(self, tree):
        assert prove_key(tree, "w", NR).directions == (0, 0)
        assert prove_key(tree, "z", R).directions == (1, 1)

    def test_honest_proof_verifies(self, tree):
        for record in tree.records():
            proof = prove_key(tree, record.key, record.state)
            assert verify_membership(tree.root, record, proof)

    def test_wrong_value_rejected(self, tree):
        proof = prove_key(tree, "w", NR)
        forged = rec("w", NR, 101)
        assert not verify_membership(tree.root, forged, MembershipProof(forged, proof.siblings, proof.directions))

    def test_wrong_state_rejected(self, tree):
        proof = prove_key(tree, "w", NR)
        moved = tree.get("w").with_state(R)
        assert not verify_membership(tree.root, moved, MembershipProof(moved, proof.siblings, proof.directions))

    def test_swapped_direction_rejected(self, tree):
        proof = prove_key(tree, "w", NR)
        flipped = MembershipProof(proof.record, proof.siblings, (1, 0))
        assert not verify_membership(tree.root, proof.record, flipped)

    def test_every_bit_flip_rejected(self, tree):
        proof = prove_key(tree, "y", NR)
        record = proof.record
        for bit in range(256):
            value = bytearray(record.value)
            value[bit // 8] ^= 1 << (bit % 8)
            forged = record.with_value(bytes(value))
            tampered = MembershipProof(forged, proof.siblings, proof.directions)
            assert not verify_membership(tree.root, forged, tampered)

    def test_sibling_substitution_rejected(self, tree):
        proof = prove_key(tree, "w", NR)
        for level in range(2):
            siblings = list(proof.siblings)
            siblings[level] = bytes(32)
            assert not verify_membership(
                tree.root, proof.record, MembershipProof(proof.record, tuple(siblings), proof.directions)
            )

    def test_absent_key_gets_boundary_proof(self, tree):
        """Test that an absent key between w and y is proven by its neighbours."""
        proof = prove_key(tree, "wx", NR)
        assert isinstance(proof, RangeProof)
        assert proof.records == ()
        assert {r.key for r in proof.boundary_records()} == {"w", "y"}
        assert proves_absent(tree.root, "wx", NR, proof)

    def test_present_key_not_absent(self, tree):
        proof = prove_range(tree, "w", "w")
        assert not proves_absent(tree.root, "w", NR, proof)


class TestRangeProofs:
    def test_full_group(self, tree):
        proof = prove_range(tree, "a", "zz")
        assert [r.key for r in proof.records] == ["w", "y"]
        assert verify_range(tree.root, ("a", "zz"), proof)

    def test_replicated_group(self, tree):
        proof = prove_range(tree, "a", "zz", R)
        assert [r.key for r in proof.records] == ["x", "z"]
        assert verify_range(tree.root, ("a", "zz"), proof, R)

    def test_omission_rejected(self, tree):
        """Test that dropping y from the [x, z] answer is detected."""
        proof = prove_range(tree, "x", "z")
        assert [r.key for r in proof.records] == ["y"]
        assert verify_range(tree.root, ("x", "z"), proof)
        omitted = RangeProof(proof.state, proof.start_key, proof.end_key, (), proof.shape)
        assert not verify_range(tree.root, ("x", "z"), omitted)

    def test_extra_record_rejected(self, tree):
        proof = prove_range(tree, "x", "z")
        padded = RangeProof(
            proof.state, proof.start_key, proof.end_key, proof.records + (rec("z", NR, 1),), proof.shape
        )
        assert not verify_range(tree.root, ("x", "z"), padded)

    def test_wrong_range_rejected(self, tree):
        proof = prove_range(tree, "x", "z")
        assert not verify_range(tree.root, ("w", "z"), proof)

    def test_wrong_group_rejected(self, tree):
        proof = prove_range(tree, "a", "zz", R)
        assert not verify_range(tree.root, ("a", "zz"), proof, NR)

    def test_stale_root_rejected(self, tree):
        proof = prove_range(tree, "a", "zz")
        assert not verify_range(bytes(32), ("a", "zz"), proof)

    def test_cost_accounting(self, tree):
        proof = prove_range(tree, "x", "z")
        leaf_words, node_count = proof.hash_ops()
        assert node_count >= 1
        assert len(leaf_words) == len(proof.revealed())
        assert proof.words() == len(proof.sibling_digests()) + len(proof.boundary_records())

    def test_empty_tree(self):
        tree = AdsTree()
        proof = prove_range(tree, "a", "b")
        assert tree.root == EMPTY_ROOT
        assert verify_range(EMPTY_ROOT, ("a", "b"), proof)

    def test_inverted_range_rejected(self, tree):
        with pytest.raises(AdsError):
            prove_range(tree, "z", "a")


class TestDataOwnerRecomputation:
    def test_value_update_chain(self, tree, leaves):
        """Test that <w,100> -> <w,110> recomputes leaf, parent, root."""
        old = tree.get("w")
        new = old.with_value(word(110))
        proof = prove_key(tree, "w", NR)
        root = do_update_root(tree.root, proof, old, new)
        expected = node_digest(
            node_digest(leaf_digest(new), leaves["y"]), node_digest(leaves["x"], leaves["z"])
        )
        assert root == expected
        assert root.hex() == GOLDEN_UPDATED
        tree.update_value(new)
        assert tree.root == root

    def test_update_with_bad_proof(self, tree):
        old = tree.get("w")
        proof = prove_key(tree, "y", NR)
        with pytest.raises(IntegrityError):
            do_update_root(tree.root, proof, old, old.with_value(word(1)))

    def test_update_cannot_move(self, tree):
        old = tree.get("w")
        with pytest.raises(AdsError):
            do_update_root(tree.root, prove_key(tree, "w", NR), old, old.with_state(R))

    def test_relocation_chain(self, tree, leaves):
        """Test that <x,R> -> <x,NR> invalidates x and pairs it with w."""
        x = tree.get("x")
        old_proof = prove_key(tree, "x", R)
        position = prove_key(tree, "x", NR)
        root = do_relocate_root(tree.root, old_proof, position, x, NR)
        x_nr = x.with_state(NR)
        expected = node_digest(
            node_digest(node_digest(leaves["w"], leaf_digest(x_nr)), leaves["y"]),
            node_digest(leaf_digest(x, invalid=True), leaves["z"]),
        )
        assert root == expected
        assert root.hex() == GOLDEN_RELOCATED

        tree.apply_relocation("x", NR, x)
        assert tree.root == root
        assert tree.find("x", NR) == x_nr
        assert tree.find("x", R) is None
        assert tree.invalid_count == 1
        assert tree.size == 5
        assert tree.depth_of("x", NR) == 3

    def test_relocation_round_trip_keeps_do_and_sp_equal(self, tree):
        owner_root = tree.root
        for key, state in [("w", R), ("z", NR), ("w", NR), ("y", R)]:
            record = tree.get(key)
            old_proof = prove_key(tree, key, record.state)
            position = prove_key(tree, key, state)
            owner_root = do_relocate_root(owner_root, old_proof, position, record, state)
            tree.apply_relocation(key, state, record)
            assert tree.root == owner_root
        assert {r.key for r in tree.records()} == set("wxyz")

    def test_relocation_with_forged_position_proof(self, tree):
        x = tree.get("x")
        old_proof = prove_key(tree, "x", R)
        wrong = prove_range(tree, "w", "w")
        with pytest.raises(IntegrityError):
            do_relocate_root(tree.root, old_proof, wrong, x, NR)

    def test_sole_record(self):
        only = rec("a", NR, 7)
        tree = build([only])
        root = do_relocate_root(
            tree.root, prove_key(tree, "a", NR), prove_key(tree, "a", R), only, R, sole_record=True
        )
        tree.apply_relocation("a", R, only)
        assert root == tree.root == leaf_digest(only.with_state(R))

    def test_compaction(self, tree):
        for key in ("w", "y", "x"):
            record = tree.get(key)
            other = R if record.state == NR else NR
            tree.apply_relocation(key, other, record)
        assert tree.invalid_count == 3
        assert tree.needs_compaction() is False
        tree.apply_relocation("z", NR, tree.get("z"))
        # 4 of 8 leaves invalid is not more than half
        assert tree.needs_compaction() is False
        tree.apply_relocation("w", NR, tree.get("w"))
        assert tree.invalid_count == 5
        assert tree.needs_compaction()
        valid = tree.records()
        tree.compact()
        assert tree.invalid_count == 0
        assert tree.records() == valid
        assert tree.root == build(canonical_order(valid)).root


step = st.tuples(st.integers(0, 63), st.booleans(), st.integers(0, 2**32))
steps = st.lists(step, min_size=1, max_size=40)


class TestRandomUpdateSequences:
    @settings(max_examples=60, deadline=None)
    @given(size=st.integers(2, 64), steps=steps)
    @example(size=2, steps=[(0, True, 1), (1, True, 2), (0, True, 3)])
    def test_owner_and_provider_roots_agree(self, size, steps):
        """Test that proof-only roots track the tree through moves and compaction."""
        names = [f"k{i:02d}" for i in range(size)]
        records = {k: rec(k, R if i % 3 == 0 else NR, i) for i, k in enumerate(names)}
        tree = build(canonical_order(records.values()))
        owner_root = tree.root
        for index, relocate, value in steps:
            key = names[index % size]
            old = tree.get(key)
            if relocate:
                new = rec(key, R if old.state == NR else NR, value)
                old_proof = prove_key(tree, key, old.state)
                position = prove_key(tree, key, new.state)
                owner_root = do_relocate_root(
                    owner_root, old_proof, position, new, new.state
                )
                tree.apply_relocation(key, new.state, new)
            else:
                new = rec(key, old.state, value)
                proof = prove_key(tree, key, old.state)
                owner_root = do_update_root(owner_root, proof, old, new)
                tree.update_value(new)
            assert tree.root == owner_root
            records[key] = new
            if tree.needs_compaction():
                tree.compact()
                owner_root = build(canonical_order(records.values())).root
                assert tree.root == owner_root
        assert tree.records() == canonical_order(records.values())


class TestBuild:
    def test_duplicate_keys_rejected(self):
        with pytest.raises(AdsError):
            build([rec("a", NR, 1), rec("a", R, 2)])

    def test_out_of_order_rejected(self):
        with pytest.raises(AdsError):
            build([rec("b", NR, 1), rec("a", NR, 2)])

    def test_snapshot_is_unaffected_by_updates(self, tree):
        snap = tree.snapshot()
        tree.update_value(tree.get("w").with_value(word(5)))
        assert snap.root.hex() == GOLDEN_ROOT
        assert tree.root != snap.root

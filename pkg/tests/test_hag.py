import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyberbudget import (
    AttackSequence,
    ConfigError,
    Hag,
    KnowledgeBase,
    Sector,
    Technique,
    ValidationError,
    build_sequence_matrix,
    enumerate_sequences,
    filter_impact_sequences,
    generate_synthetic_hag,
)
from cyberbudget.formats import dumps, hag_to_dict
from cyberbudget.hag import check_tactic_order, validate_hag
from cyberbudget.synthetic import synthetic_knowledge_base

SECTORS = (Sector("s", "s"),)


def layered_kb(n_tactics=3, per_tactic=2) -> KnowledgeBase:
    tactics = tuple(f"tac{j}" for j in range(n_tactics))
    techniques = tuple(
        Technique(f"t{j}{k}", "", tactics[j]) for j in range(n_tactics) for k in range(per_tactic)
    )
    return KnowledgeBase(techniques, (), SECTORS, tactics)


def paths(hag):
    return [s.techniques for s in enumerate_sequences(hag)]


def test_generator_is_deterministic():
    kb = synthetic_knowledge_base(5)
    a = generate_synthetic_hag(kb, 11, 30, 0.2)
    b = generate_synthetic_hag(kb, 11, 30, 0.2)
    assert a == b
    assert dumps(hag_to_dict(a)).encode() == dumps(hag_to_dict(b)).encode()


def test_different_seeds_differ():
    kb = synthetic_knowledge_base(5)
    assert generate_synthetic_hag(kb, 1, 30, 0.2) != generate_synthetic_hag(kb, 2, 30, 0.2)


@pytest.mark.parametrize("density", [0.0, -0.5, 1.5])
def test_density_outside_range_rejected(density):
    with pytest.raises(ConfigError):
        generate_synthetic_hag(layered_kb(), 0, 4, density)


def test_too_many_nodes_rejected():
    with pytest.raises(ConfigError):
        generate_synthetic_hag(layered_kb(), 0, 7, 0.5)


def test_full_density_links_every_increasing_pair():
    hag = generate_synthetic_hag(layered_kb(3, 2), 0, 6, 1.0)
    # three tactic pairs, each a 2 x 2 cross product
    assert len(hag.edges) == 3 * 4


def test_edges_follow_tactic_order_and_impact_is_present():
    kb = synthetic_knowledge_base(3)
    for seed in range(10):
        hag = generate_synthetic_hag(kb, seed, 12, 0.3)
        validate_hag(hag, kb)
        assert any(kb.techniques[kb.technique_index[n]].tactic == kb.impact_tactic for n in hag.nodes)


def test_diamond_gives_two_sequences():
    hag = Hag(("a", "b", "c", "d"), (("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")))
    assert paths(hag) == [("a", "b", "d"), ("a", "c", "d")]


def test_isolated_node_is_one_sequence():
    assert paths(Hag(("a",), ())) == [("a",)]


def test_long_chain_is_truncated():
    nodes = tuple("abcde")
    hag = Hag(nodes, tuple(zip(nodes, nodes[1:])))
    found = enumerate_sequences(hag, max_len=3)
    assert len(found) == 0
    assert found.truncation is not None and found.truncation.dropped_long > 0


def test_max_count_stops_enumeration():
    kb = layered_kb(4, 3)
    hag = generate_synthetic_hag(kb, 0, 12, 1.0)
    found = enumerate_sequences(hag, max_count=5)
    assert len(found) == 5 and found.truncation.hit_max_count


def test_impact_filter():
    kb = KnowledgeBase(
        (Technique("recon", "", "tac0"), Technique("exec", "", "tac1"), Technique("boom", "", "tac2")),
        (), SECTORS, ("tac0", "tac1", "tac2"),
    )
    seqs = [AttackSequence(("recon", "boom")), AttackSequence(("recon", "exec"))]
    assert filter_impact_sequences(seqs, kb) == [seqs[0]]
    assert filter_impact_sequences([], kb) == []
    assert filter_impact_sequences(seqs[:1], kb) == seqs[:1]


def test_sequence_matrix():
    kb = KnowledgeBase(tuple(Technique(t, "", "x") for t in ("t1", "t2", "t3")), (), SECTORS, ("x",))
    ss = build_sequence_matrix([AttackSequence(("t1", "t2"))], kb)
    assert ss.S.tolist() == [[1, 1, 0]]


def test_duplicate_sequences_keep_separate_rows():
    kb = KnowledgeBase(tuple(Technique(t, "", "x") for t in ("t1", "t2")), (), SECTORS, ("x",))
    ss = build_sequence_matrix([AttackSequence(("t1",)), AttackSequence(("t1",))], kb)
    assert ss.S.tolist() == [[1, 0], [1, 0]]


def test_unknown_technique_in_sequence():
    kb = KnowledgeBase((Technique("t1", "", "x"),), (), SECTORS, ("x",))
    with pytest.raises(ValidationError):
        build_sequence_matrix([AttackSequence(("t1", "nope"))], kb)


def test_sequence_rejects_repeats_and_empty():
    with pytest.raises(ValidationError):
        AttackSequence(("a", "a"))
    with pytest.raises(ValidationError):
        AttackSequence(())


def test_validate_hag_rejects_backward_edge():
    kb = layered_kb()
    with pytest.raises(ValidationError):
        validate_hag(Hag(("t10", "t00"), (("t10", "t00"),)), kb)


def brute_force_paths(nodes, edges):
    succ = {n: sorted(v for u, v in edges if u == n) for n in nodes}
    indeg = {n: sum(1 for _, v in edges if v == n) for n in nodes}
    out = []

    def walk(path):
        nxt = succ[path[-1]]
        if not nxt:
            out.append(tuple(path))
        for v in nxt:
            walk(path + [v])

    for n in sorted(nodes):
        if indeg[n] == 0:
            walk([n])
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.data())
def test_enumeration_matches_recursive_oracle(n, data):
    nodes = [f"n{i:02d}" for i in range(n)]
    pairs = list(itertools.combinations(range(n), 2))
    mask = data.draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = tuple((nodes[i], nodes[j]) for (i, j), on in zip(pairs, mask) if on)
    got = paths(Hag(tuple(nodes), edges))
    assert set(got) == set(brute_force_paths(nodes, edges))
    assert len(got) == len(set(got))


def test_enumerated_sequences_climb_tactics_and_rows_match_lengths():
    kb = synthetic_knowledge_base(9)
    hag = generate_synthetic_hag(kb, 4, 25, 0.25)
    seqs = list(enumerate_sequences(hag))
    assert seqs
    assert all(check_tactic_order(s, kb) for s in seqs)
    S = build_sequence_matrix(seqs, kb).S
    assert np.array_equal(S.sum(axis=1), [len(s) for s in seqs])

from cyberbudget import validate_knowledge_base
from cyberbudget.synthetic import REFERENCE_SCALE, reference_scale_instance, synthetic_knowledge_base, tiny_instance


def test_knowledge_base_shape_and_validity():
    kb = synthetic_knowledge_base(2023)
    assert (len(kb.techniques), len(kb.mitigations), len(kb.sectors)) == (120, 40, 7)
    assert validate_knowledge_base(kb).ok
    assert all(3 <= len(m.techniques) <= 10 for m in kb.mitigations)


def test_knowledge_base_is_seeded():
    assert synthetic_knowledge_base(9) == synthetic_knowledge_base(9)
    assert synthetic_knowledge_base(9) != synthetic_knowledge_base(10)


def test_tiny_instances_respect_limits():
    for seed in range(200):
        inst = tiny_instance(seed)
        assert inst.n_mitigations <= 8 and inst.n_sectors <= 3
        assert len(inst.kb.techniques) <= 10 and inst.n_sequences <= 12
        assert set(inst.eta0) <= {0.0, 0.25, 0.5}
        assert inst.lam in (0.5, 1.0, 2.0) and inst.delta in (0.1, 0.2)


def test_reference_scale_sequence_count():
    inst, hag = reference_scale_instance()
    assert 364 <= inst.n_sequences <= 397
    assert inst.lam == REFERENCE_SCALE["lam"]
    assert len(hag.nodes) == REFERENCE_SCALE["n_nodes"]

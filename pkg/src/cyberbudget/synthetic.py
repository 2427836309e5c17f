"""Synthetic knowledge bases and problem instances for tests and benchmarks.

All draws use ``random.Random`` (MT19937) so a seed reproduces the same
model on every platform.
"""

from __future__ import annotations

import random

from .attack_model import DEFAULT_SECTORS, DEFAULT_TACTICS, KnowledgeBase, Mitigation, Sector, Technique
from .hag import (
    AttackSequence,
    Hag,
    build_sequence_matrix,
    enumerate_sequences,
    filter_impact_sequences,
    generate_synthetic_hag,
)
from .milp import ProblemInstance

ETA0_LEVELS = (0.0, 0.25, 0.5)


def synthetic_knowledge_base(
    seed: int,
    n_techniques: int = 120,
    n_mitigations: int = 40,
    n_sectors: int = 7,
    eta0_levels: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3),
    coverage: tuple[int, int] = (3, 10),
) -> KnowledgeBase:
    """ATT&CK-shaped random model: techniques spread over the 12 tactics,
    each mitigation in 1-3 sectors covering ``coverage`` techniques."""
    rng = random.Random(seed)
    tactics = DEFAULT_TACTICS
    techniques = []
    for k in range(n_techniques):
        tactic = tactics[k % len(tactics)]
        techniques.append(Technique(f"T{1001 + k}", f"synthetic technique {k}", tactic))
    if n_sectors <= len(DEFAULT_SECTORS):
        sectors = [Sector(sid, name) for sid, name in DEFAULT_SECTORS[:n_sectors]]
    else:
        sectors = [Sector(f"s{j}", f"sector {j}") for j in range(n_sectors)]
    ids = [t.id for t in techniques]
    mitigations = []
    for i in range(n_mitigations):
        k_sec = min(n_sectors, 1 + int(rng.random() * 3))
        secs = sorted(rng.sample(range(n_sectors), k_sec))
        k_tech = min(n_techniques, coverage[0] + int(rng.random() * (coverage[1] - coverage[0] + 1)))
        techs = sorted(rng.sample(range(n_techniques), k_tech))
        mitigations.append(
            Mitigation(
                id=f"M{1001 + i}",
                name=f"synthetic mitigation {i}",
                eta0=eta0_levels[int(rng.random() * len(eta0_levels))],
                sectors=tuple(sectors[j].id for j in secs),
                techniques=tuple(ids[k] for k in techs),
            )
        )
    return KnowledgeBase(tuple(techniques), tuple(mitigations), tuple(sectors), tactics)


def tiny_instance(seed: int, sparse_tiebreak: bool = True) -> ProblemInstance:
    """Random desk-scale instance: N_M <= 8, N_C <= 3, N_T <= 10, N_D <= 12."""
    rng = random.Random(seed)
    n_t = rng.randint(2, 10)
    n_m = rng.randint(2, 8)
    n_c = rng.choice((1, 2, 2, 3, 3, 3))
    n_d = rng.randint(1, 12)
    tactic_ids = sorted(rng.sample(range(len(DEFAULT_TACTICS)), n_t))
    techniques = [Technique(f"t{k}", f"t{k}", DEFAULT_TACTICS[tactic_ids[k]]) for k in range(n_t)]
    sectors = [Sector(f"s{j}", f"s{j}") for j in range(n_c)]
    mitigations = []
    for i in range(n_m):
        secs = sorted(rng.sample(range(n_c), rng.randint(1, n_c)))
        techs = [k for k in range(n_t) if rng.random() < 0.45]
        mitigations.append(
            Mitigation(
                f"m{i}",
                f"m{i}",
                rng.choice(ETA0_LEVELS),
                tuple(f"s{j}" for j in secs),
                tuple(f"t{k}" for k in techs),
            )
        )
    kb = KnowledgeBase(tuple(techniques), tuple(mitigations), tuple(sectors))
    seqs = []
    for _ in range(n_d):
        length = rng.randint(1, min(5, n_t))
        picked = sorted(rng.sample(range(n_t), length))
        seqs.append(AttackSequence(tuple(f"t{k}" for k in picked)))
    return ProblemInstance(
        kb,
        build_sequence_matrix(seqs, kb),
        lam=rng.choice((0.5, 1.0, 2.0)),
        delta=rng.choice((0.1, 0.2)),
        sparse_tiebreak=sparse_tiebreak,
    )


# Frozen parameters of the reference-scale benchmark: 40 mitigations, 120
# techniques, 7 sectors and a HAG whose impact-filtered source-to-sink
# paths number within the 364-397 band.
REFERENCE_SCALE = {
    "kb_seed": 2023,
    "hag_seed": 1,
    "n_nodes": 60,
    "edge_density": 0.12,
    "lam": 1.0,
    "delta": 0.1,
}


def reference_scale_instance(**overrides) -> tuple[ProblemInstance, Hag]:
    cfg = {**REFERENCE_SCALE, **overrides}
    kb = synthetic_knowledge_base(cfg["kb_seed"])
    hag = generate_synthetic_hag(kb, cfg["hag_seed"], cfg["n_nodes"], cfg["edge_density"])
    seqs = filter_impact_sequences(enumerate_sequences(hag), kb)
    inst = ProblemInstance(kb, build_sequence_matrix(seqs, kb), lam=cfg["lam"], delta=cfg["delta"])
    return inst, hag

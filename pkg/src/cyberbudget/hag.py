"""Hybrid attack graphs: synthesis, path enumeration, impact filtering and
the sequence/technique relation table S."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

import numpy as np

from .attack_model import KnowledgeBase
from .errors import ConfigError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 12
DEFAULT_MAX_COUNT = 10_000


@dataclass(frozen=True)
class Hag:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {n: [] for n in self.nodes}
        for u, v in self.edges:
            succ[u].append(v)
        for vs in succ.values():
            vs.sort()
        return succ

    def in_degree(self) -> dict[str, int]:
        deg = {n: 0 for n in self.nodes}
        for _, v in self.edges:
            deg[v] += 1
        return deg


@dataclass(frozen=True)
class AttackSequence:
    techniques: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "techniques", tuple(self.techniques))
        if not self.techniques:
            raise ValidationError("attack sequence must contain at least one technique")
        if len(set(self.techniques)) != len(self.techniques):
            raise ValidationError(f"attack sequence repeats a technique: {self.techniques}")

    def __len__(self) -> int:
        return len(self.techniques)

    def __iter__(self):
        return iter(self.techniques)


@dataclass(frozen=True)
class TruncationNotice:
    reason: str
    dropped_long: int = 0
    hit_max_count: bool = False


@dataclass
class Enumeration:
    """Result of :func:`enumerate_sequences`; iterable like a list."""

    sequences: list[AttackSequence]
    truncation: TruncationNotice | None = None

    def __iter__(self):
        return iter(self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]


@dataclass(frozen=True)
class SequenceSet:
    sequences: tuple[AttackSequence, ...]
    S: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.sequences)


def validate_hag(hag: Hag, kb: KnowledgeBase) -> None:
    """Raise ValidationError unless every edge climbs the tactic order."""
    known = kb.technique_index
    nodes = set(hag.nodes)
    if len(nodes) != len(hag.nodes):
        raise ValidationError("HAG has duplicate nodes")
    for n in hag.nodes:
        if n not in known:
            raise ValidationError(f"HAG node {n!r} is not a technique of the model")
    for u, v in hag.edges:
        if u not in nodes or v not in nodes:
            raise ValidationError(f"HAG edge ({u}, {v}) references an unknown node")
        if kb.tactic_index(u) >= kb.tactic_index(v):
            raise ValidationError(f"HAG edge ({u}, {v}) does not follow the tactic order")


def generate_synthetic_hag(
    kb: KnowledgeBase,
    seed: int,
    n_nodes: int,
    edge_density: float,
) -> Hag:
    """Draw a tactic-ordered random DAG over ``n_nodes`` techniques of ``kb``.

    The PRNG is Python's ``random.Random`` (MT19937, ``random()`` yields
    53-bit floats), consumed in this fixed order:

    1. if the kb has impact techniques, one of them is picked with
       ``floor(random() * n_impact)``;
    2. the remaining nodes come from a partial Fisher-Yates shuffle over the
       other techniques (kb order), swap index ``i + floor(random() * (n - i))``;
    3. nodes are listed in kb order, and for every ordered pair (u, v) with
       tactic(u) < tactic(v), visited u-major in that order, one draw
       ``random() < edge_density`` decides whether the edge exists.
    """
    if not 0.0 < edge_density <= 1.0:
        raise ConfigError(f"edge_density must lie in (0, 1], got {edge_density}")
    if n_nodes < 1:
        raise ConfigError(f"n_nodes must be positive, got {n_nodes}")
    if n_nodes > len(kb.techniques):
        raise ConfigError(f"n_nodes={n_nodes} exceeds the {len(kb.techniques)} techniques in the model")

    rng = random.Random(seed)
    ids = [t.id for t in kb.techniques]
    impact = [t.id for t in kb.techniques if t.tactic == kb.impact_tactic]

    chosen: list[str] = []
    pool = ids
    if impact:
        first = impact[int(rng.random() * len(impact))]
        chosen.append(first)
        pool = [t for t in ids if t != first]
    need = n_nodes - len(chosen)
    pool = list(pool)
    for i in range(need):
        j = i + int(rng.random() * (len(pool) - i))
        pool[i], pool[j] = pool[j], pool[i]
    chosen.extend(pool[:need])

    order = kb.technique_index
    nodes = sorted(chosen, key=order.__getitem__)
    rank = {n: kb.tactic_index(n) for n in nodes}
    edges = []
    for u in nodes:
        for v in nodes:
            if rank[u] < rank[v] and rng.random() < edge_density:
                edges.append((u, v))
    return Hag(tuple(nodes), tuple(edges))


def enumerate_sequences(
    hag: Hag,
    max_len: int = DEFAULT_MAX_LEN,
    max_count: int = DEFAULT_MAX_COUNT,
) -> Enumeration:
    """All source-to-sink simple paths of ``hag``, depth-first in id order.

    Branches that would exceed ``max_len`` techniques are pruned, and
    enumeration stops after ``max_count`` paths; either event is reported
    through ``Enumeration.truncation`` rather than raised.
    """
    succ = hag.successors()
    indeg = hag.in_degree()
    sources = sorted(n for n in hag.nodes if indeg[n] == 0)

    out: list[AttackSequence] = []
    dropped = 0
    hit_cap = False
    # explicit stack keeps deep graphs clear of the recursion limit
    for src in sources:
        stack: list[tuple[str, int]] = [(src, 0)]
        path: list[str] = [src]
        while stack and not hit_cap:
            node, nxt = stack[-1]
            children = succ[node]
            if not children:
                out.append(AttackSequence(tuple(path)))
                if len(out) >= max_count:
                    hit_cap = True
                stack.pop()
                path.pop()
                continue
            if nxt >= len(children):
                stack.pop()
                path.pop()
                continue
            stack[-1] = (node, nxt + 1)
            if len(path) >= max_len:
                # every completion of this branch is too long
                dropped += 1
                continue
            child = children[nxt]
            stack.append((child, 0))
            path.append(child)
        if hit_cap:
            break

    notice = None
    if hit_cap or dropped:
        parts = []
        if dropped:
            parts.append(f"{dropped} branch(es) longer than {max_len} pruned")
        if hit_cap:
            parts.append(f"stopped at max_count={max_count}")
        notice = TruncationNotice("; ".join(parts), dropped_long=dropped, hit_max_count=hit_cap)
        log.warning("sequence enumeration truncated: %s", notice.reason)
    return Enumeration(out, notice)


def filter_impact_sequences(seqs, kb: KnowledgeBase) -> list[AttackSequence]:
    """Keep the sequences that contain at least one impact-tactic technique."""
    impact = {t.id for t in kb.techniques if t.tactic == kb.impact_tactic}
    return [s for s in seqs if any(t in impact for t in s.techniques)]


def build_sequence_matrix(seqs, kb: KnowledgeBase) -> SequenceSet:
    seqs = tuple(seqs)
    idx = kb.technique_index
    S = np.zeros((len(seqs), len(kb.techniques)), dtype=np.int8)
    for l, seq in enumerate(seqs):
        for t in seq.techniques:
            try:
                S[l, idx[t]] = 1
            except KeyError:
                raise ValidationError(f"sequence {l} references unknown technique {t!r}") from None
    return SequenceSet(seqs, S)


def check_tactic_order(seq: AttackSequence, kb: KnowledgeBase) -> bool:
    ranks = [kb.tactic_index(t) for t in seq.techniques]
    return all(a < b for a, b in zip(ranks, ranks[1:]))

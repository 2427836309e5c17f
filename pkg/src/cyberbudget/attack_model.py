"""Domain vocabulary: techniques, tactics, mitigations, sectors and the
mitigation/technique (M) and mitigation/sector (C) relation tables."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ValidationError

# Classic enterprise ATT&CK tactic order (12 tactics, ending in impact).
DEFAULT_TACTICS: tuple[str, ...] = (
    "initial-access",
    "execution",
    "persistence",
    "privilege-escalation",
    "defense-evasion",
    "credential-access",
    "discovery",
    "lateral-movement",
    "collection",
    "command-and-control",
    "exfiltration",
    "impact",
)

DEFAULT_SECTORS: tuple[tuple[str, str], ...] = (
    ("assets", "Asset management"),
    ("continuity", "Business continuity"),
    ("access", "Access & trust"),
    ("operations", "Operations"),
    ("defense", "Defense"),
    ("governance", "Security governance"),
    ("individual", "Employee training"),
)

DEFAULT_ETA0_CAP = 0.99


@dataclass(frozen=True)
class Technique:
    id: str
    name: str
    tactic: str


@dataclass(frozen=True)
class Mitigation:
    id: str
    name: str
    eta0: float
    sectors: tuple[str, ...]
    techniques: tuple[str, ...] = ()


@dataclass(frozen=True)
class Sector:
    id: str
    name: str = ""


@dataclass(frozen=True)
class Finding:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    def add(self, kind: str, message: str) -> None:
        self.findings.append(Finding(kind, message))

    @property
    def ok(self) -> bool:
        return not self.findings

    @property
    def kinds(self) -> set[str]:
        return {f.kind for f in self.findings}

    def raise_if_invalid(self) -> None:
        if self.findings:
            raise ValidationError("; ".join(str(f) for f in self.findings))

    def __len__(self) -> int:
        return len(self.findings)


@dataclass(frozen=True)
class KnowledgeBase:
    """Techniques, mitigations and sectors of one modelled component.

    List order is significant: it fixes the row/column order of every
    relation table derived from the knowledge base.
    """

    techniques: tuple[Technique, ...]
    mitigations: tuple[Mitigation, ...]
    sectors: tuple[Sector, ...]
    tactic_order: tuple[str, ...] = DEFAULT_TACTICS
    eta0_cap: float = DEFAULT_ETA0_CAP

    def __post_init__(self) -> None:
        for name in ("techniques", "mitigations", "sectors", "tactic_order"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def impact_tactic(self) -> str:
        """The designated impact tactic: the last entry of the tactic order."""
        return self.tactic_order[-1]

    @cached_property
    def technique_index(self) -> dict[str, int]:
        return {t.id: k for k, t in enumerate(self.techniques)}

    @cached_property
    def mitigation_index(self) -> dict[str, int]:
        return {m.id: i for i, m in enumerate(self.mitigations)}

    @cached_property
    def sector_index(self) -> dict[str, int]:
        return {s.id: j for j, s in enumerate(self.sectors)}

    @cached_property
    def _tactic_rank(self) -> dict[str, int]:
        return {t: n for n, t in enumerate(self.tactic_order)}

    def tactic_index(self, technique_id: str) -> int:
        tech = self.techniques[self.technique_index[technique_id]]
        return self._tactic_rank[tech.tactic]

    @property
    def eta0(self) -> np.ndarray:
        return np.array([m.eta0 for m in self.mitigations], dtype=float)

    def without_mitigation(self, mitigation_id: str) -> KnowledgeBase:
        keep = tuple(m for m in self.mitigations if m.id != mitigation_id)
        if len(keep) == len(self.mitigations):
            raise KeyError(mitigation_id)
        return KnowledgeBase(self.techniques, keep, self.sectors, self.tactic_order, self.eta0_cap)


def validate_knowledge_base(kb: KnowledgeBase) -> ValidationReport:
    """Collect every structural problem in ``kb``; an empty report means valid."""
    report = ValidationReport()
    for label, items in (
        ("technique", kb.techniques),
        ("mitigation", kb.mitigations),
        ("sector", kb.sectors),
    ):
        for ident, n in Counter(x.id for x in items).items():
            if n > 1:
                report.add("duplicate-id", f"{label} id {ident!r} appears {n} times")
    for ident, n in Counter(kb.tactic_order).items():
        if n > 1:
            report.add("duplicate-id", f"tactic {ident!r} appears {n} times")

    tactics = set(kb.tactic_order)
    for t in kb.techniques:
        if t.tactic not in tactics:
            report.add("unknown-tactic", f"technique {t.id!r} has unknown tactic {t.tactic!r}")

    if not 0.0 <= kb.eta0_cap < 1.0:
        report.add("eta0-cap", f"eta0_cap {kb.eta0_cap} must lie in [0, 1)")

    tech_ids = {t.id for t in kb.techniques}
    sector_ids = {s.id for s in kb.sectors}
    for m in kb.mitigations:
        if not m.sectors:
            report.add("empty-sectors", f"mitigation {m.id!r} belongs to no sector")
        for s in m.sectors:
            if s not in sector_ids:
                report.add("dangling-reference", f"mitigation {m.id!r} references unknown sector {s!r}")
        for t in m.techniques:
            if t not in tech_ids:
                report.add("dangling-reference", f"mitigation {m.id!r} references unknown technique {t!r}")
        if not (0.0 <= m.eta0 <= kb.eta0_cap):
            kind = "eta0-exceeds-cap" if m.eta0 > kb.eta0_cap else "eta0-out-of-range"
            report.add(kind, f"mitigation {m.id!r} eta0={m.eta0} outside [0, {kb.eta0_cap}]")
    return report


def build_mitigation_matrix(kb: KnowledgeBase) -> np.ndarray:
    """Binary table M with M[i, k] = 1 iff mitigation i prevents technique k."""
    M = np.zeros((len(kb.mitigations), len(kb.techniques)), dtype=np.int8)
    idx = kb.technique_index
    for i, m in enumerate(kb.mitigations):
        for t in m.techniques:
            M[i, idx[t]] = 1
    return M


def build_sector_matrix(kb: KnowledgeBase) -> np.ndarray:
    """Binary table C with C[i, j] = 1 iff mitigation i belongs to sector j."""
    C = np.zeros((len(kb.mitigations), len(kb.sectors)), dtype=np.int8)
    idx = kb.sector_index
    for i, m in enumerate(kb.mitigations):
        if not m.sectors:
            raise ValidationError(f"mitigation {m.id!r} belongs to no sector")
        for s in m.sectors:
            C[i, idx[s]] = 1
    return C

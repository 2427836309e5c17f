"""JSON and CSV file formats for models, graphs, solutions and sweeps.

Every writer produces a deterministic byte stream: keys appear in a fixed
order, floats are printed with 9 significant digits, and nothing
time-dependent is emitted unless explicitly requested.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .attack_model import DEFAULT_TACTICS, KnowledgeBase, Mitigation, Sector, Technique, validate_knowledge_base
from .errors import ParseError, ValidationError
from .hag import AttackSequence, Hag
from .milp import ProblemInstance, Solution, Status
from .scoring import fmt_float, round_sig, rounded_budget

log = logging.getLogger(__name__)

MODEL_KEYS = ("description", "tactic_order", "sectors", "techniques", "mitigations")
TECHNIQUE_KEYS = ("id", "name", "tactic")
MITIGATION_KEYS = ("id", "name", "eta0", "sectors", "techniques")
SECTOR_KEYS = ("id", "name")


def _clean(obj):
    """Prepare a document for json: floats rounded, nan mapped to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return None
        return round_sig(v)
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, ensure_ascii=False) + "\n"


def write_text(text: str, path) -> None:
    if str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _read_json(path):
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{p}: file not found") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _check_keys(obj, allowed, required, where: str, strict: bool) -> None:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object, got {type(obj).__name__}")
    for key in required:
        if key not in obj:
            raise ParseError(f"{where}: missing required key '{key}'")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        msg = f"{where}: unknown key(s) {', '.join(repr(k) for k in extra)}"
        if strict:
            raise ParseError(msg)
        log.warning(msg)


def _str_list(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ParseError(f"{where}: expected a list of strings")
    return tuple(value)


# -- model -------------------------------------------------------------------


def model_from_dict(doc, strict: bool = False, source: str = "model") -> KnowledgeBase:
    """Build and validate a knowledge base from a parsed model document.

    ``tactic_order`` defaults to the 12 enterprise tactics; ``sectors`` is
    required. Validation findings raise in strict mode and are logged as
    warnings otherwise, except for those that would make the relation
    tables meaningless (dangling references, empty sector sets, efficacy
    outside [0, 1)), which always raise.
    """
    _check_keys(doc, MODEL_KEYS, ("sectors", "techniques", "mitigations"), source, strict)
    tactic_order = _str_list(doc.get("tactic_order", list(DEFAULT_TACTICS)), f"{source}.tactic_order")

    sectors = []
    for n, s in enumerate(doc["sectors"]):
        where = f"{source}.sectors[{n}]"
        if isinstance(s, str):
            sectors.append(Sector(s, s))
            continue
        _check_keys(s, SECTOR_KEYS, ("id",), where, strict)
        sectors.append(Sector(str(s["id"]), str(s.get("name", s["id"]))))

    techniques = []
    for n, t in enumerate(doc["techniques"]):
        where = f"{source}.techniques[{n}]"
        _check_keys(t, TECHNIQUE_KEYS, ("id", "tactic"), where, strict)
        techniques.append(Technique(str(t["id"]), str(t.get("name", t["id"])), str(t["tactic"])))

    mitigations = []
    for n, m in enumerate(doc["mitigations"]):
        where = f"{source}.mitigations[{n}]"
        _check_keys(m, MITIGATION_KEYS, ("id", "eta0", "sectors"), where, strict)
        eta0 = m["eta0"]
        if isinstance(eta0, bool) or not isinstance(eta0, (int, float)):
            raise ParseError(f"{where}.eta0: expected a number")
        mitigations.append(
            Mitigation(
                id=str(m["id"]),
                name=str(m.get("name", m["id"])),
                eta0=float(eta0),
                sectors=_str_list(m["sectors"], f"{where}.sectors"),
                techniques=_str_list(m.get("techniques", []), f"{where}.techniques"),
            )
        )

    kb = KnowledgeBase(tuple(techniques), tuple(mitigations), tuple(sectors), tactic_order)
    report = validate_knowledge_base(kb)
    if not report.ok:
        fatal = {"dangling-reference", "empty-sectors", "duplicate-id", "unknown-tactic"}
        if strict or report.kinds & fatal or any(m.eta0 < 0 or m.eta0 >= 1 for m in kb.mitigations):
            report.raise_if_invalid()
        for finding in report.findings:
            log.warning("%s: %s", source, finding)
    return kb


def load_model(path, strict: bool = False) -> KnowledgeBase:
    return model_from_dict(_read_json(path), strict=strict, source=str(path))


def model_to_dict(kb: KnowledgeBase) -> dict:
    return {
        "tactic_order": list(kb.tactic_order),
        "sectors": [{"id": s.id, "name": s.name} for s in kb.sectors],
        "techniques": [{"id": t.id, "name": t.name, "tactic": t.tactic} for t in kb.techniques],
        "mitigations": [
            {
                "id": m.id,
                "name": m.name,
                "eta0": m.eta0,
                "sectors": list(m.sectors),
                "techniques": list(m.techniques),
            }
            for m in kb.mitigations
        ],
    }


def save_model(kb: KnowledgeBase, path) -> None:
    write_text(dumps(model_to_dict(kb)), path)


# -- graphs and sequences ----------------------------------------------------


def hag_from_dict(doc, source: str = "hag") -> Hag:
    _check_keys(doc, ("nodes", "edges"), ("nodes", "edges"), source, strict=True)
    nodes = _str_list(doc["nodes"], f"{source}.nodes")
    edges = []
    for n, e in enumerate(doc["edges"]):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, str) for v in e)):
            raise ParseError(f"{source}.edges[{n}]: expected a [from, to] pair of ids")
        edges.append((e[0], e[1]))
    return Hag(nodes, tuple(edges))


def load_hag(path) -> Hag:
    return hag_from_dict(_read_json(path), source=str(path))


def hag_to_dict(hag: Hag) -> dict:
    return {"nodes": list(hag.nodes), "edges": [list(e) for e in hag.edges]}


def save_hag(hag: Hag, path) -> None:
    write_text(dumps(hag_to_dict(hag)), path)


def load_sequences(path) -> list[AttackSequence]:
    doc = _read_json(path)
    _check_keys(doc, ("sequences",), ("sequences",), str(path), strict=True)
    out = []
    for n, seq in enumerate(doc["sequences"]):
        try:
            out.append(AttackSequence(_str_list(seq, f"{path}.sequences[{n}]")))
        except ValidationError as exc:
            raise ParseError(f"{path}.sequences[{n}]: {exc}") from None
    return out


def sequences_to_dict(seqs) -> dict:
    return {"sequences": [list(s.techniques) for s in seqs]}


def save_sequences(seqs, path) -> None:
    write_text(dumps(sequences_to_dict(seqs)), path)


# -- solutions ---------------------------------------------------------------


def solution_to_dict(sol: Solution, instance: ProblemInstance, warnings=(), timing: bool = False) -> dict:
    """Solution document: selection, budget split, per-sequence and
    per-technique success rates, and the realised mitigation profile."""
    kb = instance.kb
    b = rounded_budget(sol.b)
    br = instance.score(sol.x, b)
    n_d = instance.n_sequences
    selected = sol.selected(kb)
    profile = {}
    for i, m in enumerate(kb.mitigations):
        if sol.x[i] > 0.5:
            profile[m.id] = {t: float(br.eta[i]) for t in m.techniques}
    doc = {
        "status": str(sol.status),
        "objective": br.count,
        "n_sequences": n_d,
        "vulnerability": br.count / n_d if n_d else 0.0,
        "vulnerability_fraction": str(Fraction(br.count, n_d)) if n_d else "0",
        "gap": sol.gap,
        "lambda": instance.lam,
        "delta": instance.delta,
        "sparse_tiebreak": instance.sparse_tiebreak,
        "selected": selected,
        "budget": {s.id: float(v) for s, v in zip(kb.sectors, b)},
        "mitigation_profile": profile,
        "techniques": {t.id: float(np.exp(br.log_r[k])) for k, t in enumerate(kb.techniques)},
        "sequences": [
            {
                "techniques": list(seq.techniques),
                "log_v": float(br.log_v[l]),
                "v": float(np.exp(br.log_v[l])),
                "highly_likely": bool(br.highly_likely[l]),
            }
            for l, seq in enumerate(instance.sequences.sequences)
        ],
        "warnings": list(warnings),
    }
    if timing:
        doc["seconds"] = sol.seconds
    return doc


# -- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    lam: float
    objective: int | None
    vulnerability: float | None
    b: tuple[float, ...]
    status: str
    gap: float | None
    seconds: float | None = None

    @classmethod
    def from_solution(cls, lam: float, sol: Solution, n_d: int, seconds: float | None = None) -> SweepRow:
        b = tuple(float(v) for v in rounded_budget(sol.b))
        gap = None if math.isnan(sol.gap) else round_sig(sol.gap)
        vul = round_sig(sol.objective / n_d) if n_d else 0.0
        return cls(round_sig(lam), int(sol.objective), vul, b, str(sol.status),
                   gap, None if seconds is None else round_sig(seconds))

    @classmethod
    def failed(cls, lam: float, n_sectors: int, reason: str) -> SweepRow:
        return cls(round_sig(lam), None, None, (math.nan,) * n_sectors, f"Error: {reason}", None)


SWEEP_FIXED = ("lambda", "objective", "vulnerability")
SWEEP_TAIL = ("status", "gap", "seconds")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return fmt_float(v)


def sweep_to_csv(rows, sector_ids) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(SWEEP_FIXED) + [f"b_{s}" for s in sector_ids] + list(SWEEP_TAIL))
    for r in rows:
        w.writerow(
            [_cell(r.lam), _cell(r.objective), _cell(r.vulnerability)]
            + [_cell(v) for v in r.b]
            + [r.status, _cell(r.gap), _cell(r.seconds)]
        )
    return buf.getvalue()


def _parse_float(text: str) -> float | None:
    return None if text == "" else float(text)


def read_sweep_csv(text: str) -> tuple[list[str], list[SweepRow]]:
    """Parse sweep CSV text back into (sector ids, rows)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty sweep file") from None
    n_fixed, n_tail = len(SWEEP_FIXED), len(SWEEP_TAIL)
    if tuple(header[:n_fixed]) != SWEEP_FIXED or tuple(header[-n_tail:]) != SWEEP_TAIL:
        raise ParseError(f"unexpected sweep header {header}")
    b_cols = header[n_fixed:-n_tail]
    if not all(c.startswith("b_") for c in b_cols):
        raise ParseError(f"unexpected sweep header {header}")
    rows = []
    for line, rec in enumerate(reader, start=2):
        if len(rec) != len(header):
            raise ParseError(f"sweep line {line}: expected {len(header)} fields, got {len(rec)}")
        obj = None if rec[1] == "" else int(rec[1])
        b = tuple(float(v) for v in rec[n_fixed:-n_tail])
        rows.append(
            SweepRow(
                lam=float(rec[0]),
                objective=obj,
                vulnerability=_parse_float(rec[2]),
                b=b,
                status=rec[-3],
                gap=_parse_float(rec[-2]),
                seconds=_parse_float(rec[-1]),
            )
        )
    return [c[2:] for c in b_cols], rows


def vulnerability_monotone(rows) -> bool:
    vals = [r.vulnerability for r in rows if r.vulnerability is not None]
    return all(b <= a for a, b in zip(vals, vals[1:]))


def all_optimal(rows) -> bool:
    return all(r.status == str(Status.OPTIMAL) for r in rows)


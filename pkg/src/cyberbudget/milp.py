"""Mixed-integer linear model for the budget-partition problem.

Variables (all in [0, 1]):

    b  per-sector budget shares           continuous, N_C
    f  per-mitigation fractional budget   continuous, N_M
    h  linearised product f * x           continuous, N_M
    x  mitigation selected                binary,     N_M
    y  sequence highly likely             binary,     N_D

Row naming (0-based indices): ``mc_<i>_<1..4>`` McCormick rows for h_i,
``fdef_<i>`` fractional-budget definitions, ``simplex`` for sum(b) = 1,
``ind_<l>_<1..2>`` the big-M indicator pair of sequence l, and ``card`` for
the optional cardinality cap.
"""

from __future__ import annotations

import enum
import io
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TextIO

import numpy as np

from . import scoring
from .attack_model import KnowledgeBase, build_mitigation_matrix, build_sector_matrix
from .errors import InfeasibleError, SolverBugError, ValidationError
from .hag import SequenceSet

log = logging.getLogger(__name__)

EPS_STRICT = 1e-9
FEAS_TOL = 1e-6
INT_TOL = 1e-6
# floor on the first indicator row's constant; keeps the row well scaled at delta = 1
_K_UP_FLOOR = 0.01


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ProblemInstance:
    kb: KnowledgeBase
    sequences: SequenceSet
    lam: float = 0.1
    delta: float = 0.1
    sparse_tiebreak: bool = True
    max_mitigations: int | None = None

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 < self.delta <= 1.0:
            raise ValidationError(f"delta must lie in (0, 1], got {self.delta}")
        if self.sequences.S.shape[1] != len(self.kb.techniques):
            raise ValidationError("sequence table does not match the model's technique count")

    @cached_property
    def C(self) -> np.ndarray:
        return build_sector_matrix(self.kb)

    @cached_property
    def M(self) -> np.ndarray:
        return build_mitigation_matrix(self.kb)

    @property
    def S(self) -> np.ndarray:
        return self.sequences.S

    @property
    def eta0(self) -> np.ndarray:
        return self.kb.eta0

    @cached_property
    def P(self) -> np.ndarray:
        return scoring.p_table(self.M, self.eta0)

    @property
    def params(self) -> scoring.ScoringParams:
        return scoring.ScoringParams(self.lam, self.delta, self.eta0)

    @property
    def log_delta(self) -> float:
        return math.log(self.delta)

    @property
    def n_mitigations(self) -> int:
        return len(self.kb.mitigations)

    @property
    def n_sectors(self) -> int:
        return len(self.kb.sectors)

    @property
    def n_sequences(self) -> int:
        return len(self.sequences)

    def with_lambda(self, lam: float) -> ProblemInstance:
        return ProblemInstance(self.kb, self.sequences, lam, self.delta, self.sparse_tiebreak, self.max_mitigations)

    def score(self, x, b) -> scoring.ScoreBreakdown:
        return scoring.score(self.C, self.M, self.S, x, b, self.params)


def compute_big_m(instance: ProblemInstance) -> np.ndarray:
    """Per-sequence constant K_l = |log delta| + sum over covered (k, i) of (|log(1-eta0_i)| + lam)."""
    per_cover = np.abs(scoring.log_one_minus(instance.eta0)) + instance.lam
    SM = instance.S.astype(float) @ instance.M.T.astype(float)
    return abs(instance.log_delta) + SM @ per_cover


def log_success_range(instance: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    """Exact attainable range [lo, 0] of every sequence's log success rate.

    With every term x_i (P - lam f_i) nonpositive the minimum selects all
    mitigations, and the remaining budget term is linear in b, so it peaks
    at a simplex vertex.
    """
    SP = instance.S @ instance.P.T
    SM = instance.S.astype(float) @ instance.M.T.astype(float)
    C = instance.C.astype(float)
    per_sector = SM @ (C / C.sum(axis=1, keepdims=True))  # (N_D, N_C)
    best = per_sector.max(axis=1) if per_sector.shape[1] else np.zeros(len(SM))
    lo = SP.sum(axis=1) - instance.lam * best
    return lo, np.zeros_like(lo)


def mccormick_interval(x: float, f: float) -> tuple[float, float]:
    """Feasible interval of h under h <= x, h >= 0, h <= f, h >= x - (1 - f)."""
    return max(0.0, x - (1.0 - f)), min(x, f)


def mccormick_exactness_check(x: float, f: float, tol: float = 1e-12) -> float:
    if x not in (0, 1):
        raise ValidationError(f"x must be binary, got {x}")
    if not 0.0 <= f <= 1.0:
        raise ValidationError(f"f must lie in [0, 1], got {f}")
    lo, hi = mccormick_interval(x, f)
    if abs(hi - lo) >= tol:
        raise SolverBugError(f"McCormick interval [{lo}, {hi}] is not a point")
    return hi


@dataclass
class MilpModel:
    instance: ProblemInstance
    var_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    is_int: np.ndarray
    blocks: dict[str, slice]
    A: np.ndarray
    senses: list[str]
    rhs: np.ndarray
    row_names: list[str]
    c: np.ndarray
    K: np.ndarray
    K_up: np.ndarray
    SP: np.ndarray
    SM: np.ndarray
    tie_weight: float
    eps: float = EPS_STRICT

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_continuous(self) -> int:
        return int(np.count_nonzero(~self.is_int))

    @property
    def n_binary(self) -> int:
        return int(np.count_nonzero(self.is_int))

    def sequence_log(self, x, h) -> np.ndarray:
        """l = S (P^T x - lam M^T h)."""
        return self.SP @ np.asarray(x, float) - self.instance.lam * (self.SM @ np.asarray(h, float))

    def full_vector(self, x, b, y) -> np.ndarray:
        inst = self.instance
        x = np.asarray(x, float)
        f = scoring.fractional_budget(inst.C, b)
        z = np.zeros(self.n_vars)
        z[self.blocks["b"]] = b
        z[self.blocks["f"]] = f
        z[self.blocks["h"]] = f * x
        z[self.blocks["x"]] = x
        z[self.blocks["y"]] = y
        return z

    def objective_value(self, z) -> float:
        return float(self.c @ z)

    def violations(self, z, tol: float = FEAS_TOL) -> list[str]:
        act = self.A @ z
        bad = []
        for r, (s, a, rhs) in enumerate(zip(self.senses, act, self.rhs)):
            if (s == "<=" and a > rhs + tol) or (s == ">=" and a < rhs - tol) or (s == "=" and abs(a - rhs) > tol):
                bad.append(self.row_names[r])
        if np.any(z < self.lb - tol) or np.any(z > self.ub + tol):
            bad.append("bounds")
        return bad

    def listing(self) -> str:
        buf = io.StringIO()
        write_lp(self, buf)
        return buf.getvalue()


def build_model(instance: ProblemInstance) -> MilpModel:
    nM, nC, nD = instance.n_mitigations, instance.n_sectors, instance.n_sequences
    if nD == 0:
        raise ValidationError("cannot build a model without attack sequences")

    blocks = {}
    names: list[str] = []
    start = 0
    for key, n in (("b", nC), ("f", nM), ("h", nM), ("x", nM), ("y", nD)):
        blocks[key] = slice(start, start + n)
        names.extend(f"{key}_{i}" for i in range(n))
        start += n
    nv = start
    is_int = np.zeros(nv, dtype=bool)
    is_int[blocks["x"]] = True
    is_int[blocks["y"]] = True

    bi = np.arange(nv)
    B, F, H, X, Y = (bi[blocks[k]] for k in ("b", "f", "h", "x", "y"))

    C = instance.C.astype(float)
    SP = instance.S @ instance.P.T
    SM = instance.S.astype(float) @ instance.M.T.astype(float)
    K = compute_big_m(instance)
    dprime = instance.log_delta
    K_up = np.full(nD, max(abs(dprime), _K_UP_FLOOR) + EPS_STRICT)
    lam = instance.lam

    rows: list[np.ndarray] = []
    senses: list[str] = []
    rhs: list[float] = []
    rnames: list[str] = []

    def add(name, coefs, sense, value):
        row = np.zeros(nv)
        for j, a in coefs:
            row[j] += a
        rows.append(row)
        senses.append(sense)
        rhs.append(float(value))
        rnames.append(name)

    for i in range(nM):
        add(f"mc_{i}_1", [(H[i], 1.0), (X[i], -1.0)], "<=", 0.0)
        add(f"mc_{i}_2", [(H[i], 1.0)], ">=", 0.0)
        add(f"mc_{i}_3", [(H[i], 1.0), (F[i], -1.0)], "<=", 0.0)
        add(f"mc_{i}_4", [(H[i], 1.0), (X[i], -1.0), (F[i], -1.0)], ">=", -1.0)
    for i in range(nM):
        add(f"fdef_{i}", [(F[i], C[i].sum())] + [(B[j], -C[i, j]) for j in range(nC) if C[i, j]], "=", 0.0)
    add("simplex", [(B[j], 1.0) for j in range(nC)], "=", 1.0)
    for l in range(nD):
        lx = [(X[i], SP[l, i]) for i in range(nM) if SP[l, i] != 0.0]
        lh = [(H[i], -lam * SM[l, i]) for i in range(nM) if lam * SM[l, i] != 0.0]
        # K_up y - l >= eps - delta'
        add(f"ind_{l}_1", [(Y[l], K_up[l])] + [(j, -a) for j, a in lx + lh], ">=", EPS_STRICT - dprime)
        # l - K y >= delta' - K
        add(f"ind_{l}_2", lx + lh + [(Y[l], -K[l])], ">=", dprime - K[l])
    if instance.max_mitigations is not None:
        add("card", [(X[i], 1.0) for i in range(nM)], "<=", instance.max_mitigations)

    tie_weight = 1.0 / (2 * nM) if (instance.sparse_tiebreak and nM) else 0.0
    c = np.zeros(nv)
    c[Y] = 1.0
    c[X] = tie_weight

    A = np.vstack(rows) if rows else np.zeros((0, nv))
    return MilpModel(
        instance=instance,
        var_names=names,
        lb=np.zeros(nv),
        ub=np.ones(nv),
        is_int=is_int,
        blocks=blocks,
        A=A,
        senses=senses,
        rhs=np.array(rhs),
        row_names=rnames,
        c=c,
        K=K,
        K_up=K_up,
        SP=SP,
        SM=SM,
        tie_weight=tie_weight,
    )


@dataclass
class Incumbent:
    x: np.ndarray
    b: np.ndarray
    y: np.ndarray


@dataclass
class Solution:
    x: np.ndarray
    b: np.ndarray
    objective: int
    vulnerability: float
    breakdown: scoring.ScoreBreakdown
    status: Status
    gap: float
    bound: float = 0.0
    nodes: int = 0
    lp_iterations: int = 0
    seconds: float = 0.0
    notes: list[str] = field(default_factory=list)

    def selected(self, kb: KnowledgeBase) -> list[str]:
        return [m.id for m, on in zip(kb.mitigations, self.x) if on > 0.5]


def extract_solution(
    model: MilpModel,
    incumbent: Incumbent | None,
    instance: ProblemInstance | None = None,
    *,
    status: Status = Status.OPTIMAL,
    gap: float = 0.0,
) -> Solution:
    """Re-score an incumbent through ``scoring`` and cross-check the solver's y.

    The solver's highly-likely vector may only disagree with the re-scored
    flags on sequences whose log success rate sits inside the strictness
    band [delta' - eps, delta'].
    """
    instance = instance or model.instance
    if incumbent is None:
        raise InfeasibleError("solver produced no incumbent")
    x = np.round(np.asarray(incumbent.x, float))
    b = np.clip(np.asarray(incumbent.b, float), 0.0, None)
    b = b / b.sum()
    y = np.round(np.asarray(incumbent.y, float))

    z = model.full_vector(x, b, y)
    bad = model.violations(z)
    if bad:
        raise SolverBugError(f"incumbent violates {len(bad)} constraint(s), first: {bad[0]}")

    br = instance.score(x, b)
    flags = br.highly_likely
    mismatch = np.flatnonzero(flags != (y > 0.5))
    if mismatch.size:
        band = np.abs(br.log_v[mismatch] - instance.log_delta) <= 2 * model.eps + 1e-12
        if not np.all(band):
            l = int(mismatch[~band][0])
            raise SolverBugError(
                f"sequence {l}: solver y={int(y[l])} but re-scored log v={br.log_v[l]:.12g} "
                f"against log delta={instance.log_delta:.12g}"
            )
    count = br.count
    return Solution(
        x=x.astype(int),
        b=b,
        objective=count,
        vulnerability=br.vulnerability,
        breakdown=br,
        status=status,
        gap=gap,
    )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_lp(model: MilpModel, out: TextIO) -> None:
    """Write ``model`` in CPLEX LP text format."""

    def terms(pairs):
        chunks = []
        for n, (name, a) in enumerate(pairs):
            sign = "-" if a < 0 else "+"
            chunks.append(f"{sign} {_fmt(abs(a))} {name}")
        lines = [" ".join(chunks[k:k + 6]) for k in range(0, len(chunks), 6)]
        return "\n   ".join(lines) if lines else "0 " + model.var_names[0]

    out.write("\\ budget-partition MILP\n")
    out.write("Minimize\n")
    obj = [(model.var_names[j], model.c[j]) for j in np.flatnonzero(model.c)]
    out.write(f" obj: {terms(obj)}\n")
    out.write("Subject To\n")
    for r, name in enumerate(model.row_names):
        row = model.A[r]
        pairs = [(model.var_names[j], row[j]) for j in np.flatnonzero(row)]
        out.write(f" {name}: {terms(pairs)} {model.senses[r]} {_fmt(model.rhs[r])}\n")
    out.write("Bounds\n")
    for j, name in enumerate(model.var_names):
        if not model.is_int[j]:
            out.write(f" {_fmt(model.lb[j])} <= {name} <= {_fmt(model.ub[j])}\n")
    out.write("Binaries\n")
    ints = [model.var_names[j] for j in np.flatnonzero(model.is_int)]
    for k in range(0, len(ints), 10):
        out.write(" " + " ".join(ints[k:k + 10]) + "\n")
    out.write("End\n")

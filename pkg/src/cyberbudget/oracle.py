"""Brute-force reference optimum over x in {0,1}^N_M and a lattice of budget
splits. Shares nothing with the MILP/solver path except :mod:`scoring`."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import scoring
from .errors import BudgetExceededError, ConfigError
from .milp import ProblemInstance

MAX_EVALUATIONS = 10**7
MAX_WITNESSES = 100


@dataclass
class OracleResult:
    best_objective: int
    witnesses: list[tuple[tuple[int, ...], tuple[float, ...]]] = field(default_factory=list)
    grid_step: float = 0.1
    evaluations: int = 0


def _steps_per_unit(step: float) -> int:
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-12:
        raise ConfigError(f"grid step {step} does not divide 1")
    return k


def simplex_grid(n: int, step: float) -> np.ndarray:
    """All points of the unit simplex in R^n whose coordinates are multiples of ``step``.

    Rows are in lexicographically descending order of the integer
    compositions; there are C(1/step + n - 1, n - 1) of them.
    """
    if n < 1:
        raise ConfigError("simplex dimension must be at least 1")
    k = _steps_per_unit(step)
    pts = []
    # stars and bars: choose n-1 bar positions among k + n - 1 slots
    for bars in itertools.combinations(range(k + n - 1), n - 1):
        prev = -1
        parts = []
        for bpos in bars:
            parts.append(bpos - prev - 1)
            prev = bpos
        parts.append(k + n - 2 - prev)
        pts.append(parts)
    grid = np.array(pts, dtype=float) / k
    order = np.lexsort(-grid.T[::-1])
    return grid[order]


def grid_size(n: int, step: float) -> int:
    k = _steps_per_unit(step)
    return math.comb(k + n - 1, n - 1)


def default_grid_step(n_sectors: int) -> float:
    return 0.1 if n_sectors <= 3 else 0.25


def exhaustive_optimum(instance: ProblemInstance, grid_step: float | None = None) -> OracleResult:
    """Minimum highly-likely count over every selection and every grid split."""
    nM, nC = instance.n_mitigations, instance.n_sectors
    step = default_grid_step(nC) if grid_step is None else grid_step
    size = grid_size(nC, step)
    total = (2**nM) * size
    if total > MAX_EVALUATIONS:
        raise BudgetExceededError(f"oracle would need {total} evaluations (limit {MAX_EVALUATIONS})")

    grid = simplex_grid(nC, step)
    C, M, S = instance.C, instance.M, instance.S
    params = instance.params
    f = scoring.fractional_budget(C, grid)  # (G, N_M)
    eta = scoring.improve_efficacy(params.eta0, params.lam, f)

    best = None
    witnesses: list = []
    for bits in itertools.product((0, 1), repeat=nM):
        x = np.array(bits, dtype=float)
        log_r = scoring.technique_log_success(M, x, eta)  # (G, N_T)
        log_v = scoring.sequence_log_success(S, log_r)
        counts = scoring.classify(log_v, params.delta).sum(axis=-1)
        m = int(counts.min())
        if best is None or m < best:
            best = m
            witnesses = []
        if m == best and len(witnesses) < MAX_WITNESSES:
            for g in np.flatnonzero(counts == m):
                witnesses.append((bits, tuple(float(v) for v in grid[g])))
                if len(witnesses) >= MAX_WITNESSES:
                    break
    witnesses.sort()
    return OracleResult(best_objective=int(best), witnesses=witnesses, grid_step=step, evaluations=total)

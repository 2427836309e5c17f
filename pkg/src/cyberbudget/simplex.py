"""Dense bounded-variable dual simplex.

Every structural variable has finite bounds, so a slack basis with each
nonbasic variable parked at the bound favoured by its cost is always dual
feasible. That makes the dual simplex a one-phase method here, and it is
also the natural choice for branch-and-bound: tightening a bound keeps a
parent's optimal basis dual feasible, so children re-optimise in a handful
of pivots.

Pivoting picks the most infeasible row and the minimum-ratio column; ties
go to the lowest variable index. After a run of degenerate pivots the
method switches to Bland's rule (lowest index everywhere) until progress
resumes, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-11
REFACTOR_EVERY = 64
DEGENERATE_SWITCH = 50


@dataclass
class LpProblem:
    """min c.z  s.t.  A z (<=|>=|=) rhs,  lb <= z <= ub."""

    c: np.ndarray
    A: np.ndarray
    senses: list[str]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.size == 0:
            self.A = self.A.reshape(0, len(self.c))
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        n = len(self.c)
        m = self.A.shape[0]
        if self.A.shape[1] != n or len(self.lb) != n or len(self.ub) != n:
            raise ValidationError("LP dimensions disagree")
        if len(self.senses) != m or len(self.rhs) != m:
            raise ValidationError("LP row data disagree")
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise ValidationError("all variable bounds must be finite")
        bad = set(self.senses) - {"<=", ">=", "="}
        if bad:
            raise ValidationError(f"unknown constraint sense(s) {sorted(bad)}")


@dataclass
class Basis:
    basic: np.ndarray  # column index per row
    at_upper: np.ndarray  # bool per column, meaningful for nonbasic columns


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    basis: Basis | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, p: LpProblem, lb: np.ndarray, ub: np.ndarray):
        m, n = p.A.shape
        self.m, self.n = m, n
        self.Abar = np.hstack([p.A, np.eye(m)])
        self.cost = np.concatenate([p.c, np.zeros(m)])
        slo = np.array([0.0 if s in ("<=", "=") else -np.inf for s in p.senses])
        sup = np.array([0.0 if s in (">=", "=") else np.inf for s in p.senses])
        self.L = np.concatenate([lb, slo])
        self.U = np.concatenate([ub, sup])
        self.rhs = p.rhs

    def cold_basis(self) -> Basis:
        at_upper = np.zeros(self.n + self.m, dtype=bool)
        at_upper[: self.n] = self.cost[: self.n] < 0
        at_upper[self.n:] = ~np.isfinite(self.L[self.n:])
        return Basis(np.arange(self.n, self.n + self.m), at_upper)

    def load(self, basis: Basis) -> None:
        self.basic = np.array(basis.basic, dtype=int)
        self.at_upper = np.array(basis.at_upper, dtype=bool)
        N = self.n + self.m
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[self.basic] = True
        # a nonbasic column must rest on a finite bound
        nb = ~self.is_basic
        self.at_upper[nb & ~np.isfinite(self.L)] = True
        self.at_upper[nb & ~np.isfinite(self.U)] = False
        self.refactor()
        self._restore_dual_feasibility()

    def nonbasic_values(self) -> np.ndarray:
        v = np.where(self.at_upper, self.U, self.L)
        v[self.is_basic] = 0.0
        return v

    def refactor(self) -> None:
        xn = self.nonbasic_values()
        if np.array_equal(self.basic, np.arange(self.n, self.n + self.m)):
            # slack basis: B is the identity
            self.T = self.Abar.copy()
            self.beta = self.rhs - self.Abar @ xn
        else:
            B = self.Abar[:, self.basic]
            try:
                self.T = np.linalg.solve(B, self.Abar)
                self.beta = np.linalg.solve(B, self.rhs - self.Abar @ xn)
            except np.linalg.LinAlgError as exc:
                raise NumericalError("singular basis during refactorisation") from exc
        self.d = self.cost - self.cost[self.basic] @ self.T
        self.d[self.basic] = 0.0
        if not (np.all(np.isfinite(self.T)) and np.all(np.isfinite(self.beta))):
            raise NumericalError("non-finite tableau after refactorisation")

    def _restore_dual_feasibility(self) -> None:
        nb = ~self.is_basic
        fixed = self.L == self.U
        wrong_lo = nb & ~fixed & ~self.at_upper & (self.d < -DUAL_TOL)
        wrong_hi = nb & ~fixed & self.at_upper & (self.d > DUAL_TOL)
        if not (wrong_lo.any() or wrong_hi.any()):
            return
        if np.any(wrong_lo & ~np.isfinite(self.U)) or np.any(wrong_hi & ~np.isfinite(self.L)):
            raise _ColdStart
        self.at_upper[wrong_lo] = True
        self.at_upper[wrong_hi] = False
        B = self.Abar[:, self.basic]
        self.beta = np.linalg.solve(B, self.rhs - self.Abar @ self.nonbasic_values())

    def run(self, max_iter: int) -> tuple[str, int]:
        it = 0
        degenerate = 0
        bland = False
        since_refactor = 0
        N = self.n + self.m
        idx = np.arange(N)
        while True:
            lo_b = self.L[self.basic]
            up_b = self.U[self.basic]
            tol = PRIMAL_TOL * (1.0 + np.abs(self.beta))
            below = lo_b - self.beta
            above = self.beta - up_b
            infeas = np.maximum(below, above)
            cand = np.flatnonzero(infeas > tol)
            if cand.size == 0:
                return "optimal", it
            if it >= max_iter:
                raise NumericalError(f"simplex iteration limit {max_iter} reached")
            if bland:
                r = cand[np.argmin(self.basic[cand])]
            else:
                worst = infeas[cand].max()
                ties = cand[infeas[cand] >= worst - 1e-12]
                r = ties[np.argmin(self.basic[ties])]
            going_up = below[r] > above[r]
            target = lo_b[r] if going_up else up_b[r]

            row = self.T[r]
            nb = ~self.is_basic & (self.L != self.U)
            if going_up:
                elig = nb & (((~self.at_upper) & (row < -PIVOT_TOL)) | (self.at_upper & (row > PIVOT_TOL)))
            else:
                elig = nb & (((~self.at_upper) & (row > PIVOT_TOL)) | (self.at_upper & (row < -PIVOT_TOL)))
            cols = idx[elig]
            if cols.size == 0:
                return "infeasible", it
            ratios = np.abs(self.d[cols]) / np.abs(row[cols])
            best = ratios.min()
            ties = cols[ratios <= best + 1e-12]
            if bland or ties.size == 1:
                j = int(ties[0])
            else:
                # lowest index among the numerically safest ties
                mags = np.abs(row[ties])
                j = int(ties[mags >= 0.1 * mags.max()][0])
            alpha = row[j]
            if abs(alpha) < PIVOT_TOL or not np.isfinite(alpha):
                raise NumericalError(f"pivot breakdown (alpha={alpha!r})")

            if best <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_SWITCH:
                    bland = True
            else:
                degenerate = 0
                bland = False

            xj = self.U[j] if self.at_upper[j] else self.L[j]
            theta = (self.beta[r] - target) / alpha
            col = self.T[:, j].copy()
            self.beta -= theta * col
            self.beta[r] = xj + theta

            leaving = self.basic[r]
            self.T[r] /= alpha
            col[r] = 0.0
            self.T -= np.outer(col, self.T[r])
            dj = self.d[j]
            self.d -= dj * self.T[r]
            self.d[j] = 0.0

            self.is_basic[leaving] = False
            self.at_upper[leaving] = not going_up
            self.is_basic[j] = True
            self.basic[r] = j
            it += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0

    def solution(self) -> np.ndarray:
        v = self.nonbasic_values()
        v[self.basic] = self.beta
        return v


class _ColdStart(Exception):
    pass


def solve_lp(
    p: LpProblem,
    basis: Basis | None = None,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    max_iter: int | None = None,
) -> LpResult:
    """Solve ``p``; ``lb``/``ub`` override the problem bounds, ``basis`` warm-starts.

    Returns status "optimal" or "infeasible". Finite bounds make the primal
    bounded, so "unbounded" is never produced for a well-formed problem.
    Raises NumericalError on pivot breakdown.
    """
    lb = p.lb if lb is None else np.asarray(lb, dtype=float)
    ub = p.ub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub + PRIMAL_TOL):
        return LpResult("infeasible")
    tab = _Tableau(p, lb, ub)
    if max_iter is None:
        max_iter = 50 * (tab.m + tab.n) + 1000
    try:
        tab.load(basis if basis is not None else tab.cold_basis())
    except (_ColdStart, NumericalError):
        if basis is None:
            raise
        tab.load(tab.cold_basis())
    status, it = tab.run(max_iter)
    if status != "optimal":
        return LpResult(status, iterations=it)
    # final refactorisation removes accumulated drift before reporting
    tab.refactor()
    full = tab.solution()
    z = np.clip(full[: tab.n], lb, ub)
    return LpResult(
        "optimal",
        x=z,
        objective=float(p.c @ z),
        basis=Basis(tab.basic.copy(), tab.at_upper.copy()),
        iterations=it,
    )

"""Branch-and-bound over the binary x/y variables of a :class:`MilpModel`.

Node relaxations are solved with :func:`simplex.solve_lp`, warm-started from
the parent's optimal basis. Before branching the model is presolved:

* sequences whose log success rate cannot reach log(delta) under any
  selection and budget are fixed highly likely and their rows dropped;
* free sequences with identical coefficient rows share one y column whose
  objective weight is the multiplicity;
* under the sparse tie-break, mitigations that touch no free sequence are
  fixed to 0.

Incumbents are always re-scored through :mod:`scoring`; the LP only ever
supplies bounds and candidate points.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import scoring
from .errors import InfeasibleError, NumericalError
from .milp import (
    EPS_STRICT,
    INT_TOL,
    Incumbent,
    MilpModel,
    Solution,
    Status,
    extract_solution,
    log_success_range,
)
from .simplex import Basis, LpProblem, LpResult, solve_lp

log = logging.getLogger(__name__)

GREEDY_STEP = 0.05


@dataclass
class SolverOptions:
    time_limit: float = 60.0
    node_limit: int = 1_000_000
    branching: str = "most-fractional"  # or "pseudo-cost"
    heuristic: bool = True
    seed: int = 0
    parallel: int = 1

    def __post_init__(self) -> None:
        if self.time_limit <= 0 or self.node_limit <= 0 or self.parallel <= 0:
            raise ValueError("solver limits must be positive")
        if self.branching not in ("most-fractional", "pseudo-cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")


class _Scorer:
    """Fast incumbent evaluation: weighted highly-likely count plus tie-break."""

    def __init__(self, model: MilpModel):
        inst = model.instance
        self.inst = inst
        self.tie = model.tie_weight
        C = inst.C.astype(float)
        self.Cn = C / C.sum(axis=1, keepdims=True)
        self.SP = model.SP
        self.SM = model.SM
        self.lam = inst.lam
        self.cut = inst.log_delta - scoring.THRESHOLD_SLACK
        self.dprime = inst.log_delta

    def log_v(self, x, b) -> np.ndarray:
        f = self.Cn @ np.asarray(b, float)
        x = np.asarray(x, float)
        return self.SP @ x - self.lam * (self.SM @ (f * x))

    def evaluate(self, x, b) -> tuple[float, int, float]:
        """(objective, highly-likely count, excess above the threshold)."""
        lv = self.log_v(x, b)
        hot = lv >= self.cut
        count = int(np.count_nonzero(hot))
        excess = float(np.sum(lv[hot] - self.dprime))
        return count + self.tie * float(np.sum(x)), count, excess


def _prune_selection(scorer: _Scorer, x: np.ndarray, b: np.ndarray, order=None, budget=None):
    """Drop mitigations one by one while the highly-likely count is unchanged."""
    x = x.copy()
    _, count, _ = scorer.evaluate(x, b)
    evals = 0
    for i in (order if order is not None else range(len(x))):
        if x[i] == 0:
            continue
        if budget is not None and evals >= budget:
            break
        x[i] = 0
        evals += 1
        if scorer.evaluate(x, b)[1] > count:
            x[i] = 1
    return x, evals


def _prune_order(model: MilpModel) -> list[int]:
    """Mitigations that touch the fewest sequences are tried for removal first."""
    reach = model.SM.sum(axis=0)
    return sorted(range(len(reach)), key=lambda i: (reach[i], i))


def _start_selection(model: MilpModel) -> np.ndarray:
    inst = model.instance
    x = np.ones(inst.n_mitigations)
    cap = inst.max_mitigations
    if cap is not None and cap < len(x):
        reach = model.SM.sum(axis=0)
        keep = sorted(range(len(x)), key=lambda i: (-reach[i], i))[: max(cap, 0)]
        x[:] = 0
        x[keep] = 1
    return x


def greedy_heuristic(model: MilpModel, opts: SolverOptions | None = None) -> Solution:
    """Coordinate descent on the budget split, then a sparsity pass over x.

    Starts from every mitigation selected and a uniform split, moves
    ``GREEDY_STEP`` of budget between sector pairs while (count, excess)
    strictly decreases lexicographically, then prunes selected mitigations
    whose removal leaves the count unchanged. Uses at most
    10 * N_M * N_C objective evaluations.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    inst = model.instance
    nM, nC = inst.n_mitigations, inst.n_sectors
    budget = max(10 * nM * nC, 1)
    scorer = _Scorer(model)

    x = _start_selection(model)
    b = np.full(nC, 1.0 / nC)
    _, count, excess = scorer.evaluate(x, b)
    evals = 1
    reserve = int(np.count_nonzero(x))

    pairs = [(j, k) for j in range(nC) for k in range(nC) if j != k]
    if opts.seed:
        np.random.default_rng(opts.seed).shuffle(pairs)
    p = 0
    since = 0
    while pairs and count > 0 and evals < budget - reserve and since < len(pairs):
        j, k = pairs[p]
        p = (p + 1) % len(pairs)
        since += 1
        if b[j] <= 0.0:
            continue
        moved = min(GREEDY_STEP, b[j])
        cand = b.copy()
        cand[j] -= moved
        cand[k] += moved
        cand[cand < 1e-15] = 0.0
        _, c2, e2 = scorer.evaluate(x, cand)
        evals += 1
        if (c2, e2) < (count, excess - 1e-12):
            b, count, excess = cand, c2, e2
            since = 0

    x, used = _prune_selection(scorer, x, b, budget=budget - evals)
    evals += used
    y = scorer.log_v(x, b) >= scorer.cut
    sol = extract_solution(model, Incumbent(x, b, y.astype(float)), status=Status.FEASIBLE, gap=math.nan)
    sol.seconds = time.perf_counter() - t0
    sol.notes.append(f"greedy evaluations: {evals}")
    return sol


# A sequence counts as certainly unkilled on a region when its largest
# budget term stays within this slack of the kill threshold.
REGION_TOL = 1e-10
MIN_EDGE = 1e-9


@dataclass
class CountSearchResult:
    """Outcome of the budget-space search with every mitigation selected."""

    count: int
    lower: int
    b: np.ndarray
    regions: int
    proved: bool


def count_search(model: MilpModel, deadline: float, region_limit: int = 10**7) -> CountSearchResult:
    """Minimise the highly-likely count over the budget simplex with x = 1.

    Selecting more mitigations never raises a sequence's success rate, so
    the all-ones selection attains the minimum count. With x fixed, each
    sequence's log success rate is affine in b and the sequence is cleared
    exactly when ``g_l . b > c_l``. The search bisects simplices along their
    longest edge; a region's bound counts the sequences whose largest
    budget term over its vertices cannot clear the threshold, and every new
    vertex is scored as a candidate split.
    """
    inst = model.instance
    nC = inst.n_sectors
    scorer = _Scorer(model)
    G = inst.lam * (model.SM @ scorer.Cn)  # (N_D, N_C)
    c0 = model.SP.sum(axis=1) - scorer.cut

    def count_at(b):
        return int(np.count_nonzero(G @ b <= c0))

    hopeless = G.max(axis=1) <= c0 + REGION_TOL if nC else np.ones(len(c0), bool)
    free = np.flatnonzero(~hopeless & (c0 >= 0.0))
    base = int(np.count_nonzero(hopeless))
    Gf, cf = G[free], c0[free]

    V0 = np.eye(nC)
    best_b = V0.mean(axis=0)
    best = count_at(best_b)
    for j in range(nC):
        k = count_at(V0[j])
        if k < best:
            best, best_b = k, V0[j].copy()

    counter = itertools.count()
    # heap entries: (bound, seq, vertices, undecided sequence ids, vertex values, certain unkilled)
    heap = [(base, next(counter), V0, np.arange(len(free)), Gf @ V0.T, base)]
    regions = 1
    while heap:
        if heap[0][0] >= best:
            heap.clear()
            break
        if time.perf_counter() > deadline or regions >= region_limit:
            break
        bound, _, V, und, vals, certain = heapq.heappop(heap)
        d = ((V[:, None, :] - V[None, :, :]) ** 2).sum(axis=2)
        i, j = divmod(int(np.argmax(d)), nC)
        if d[i, j] < MIN_EDGE**2:
            continue  # degenerate sliver, already bounded
        mid = 0.5 * (V[i] + V[j])
        mid_vals = 0.5 * (vals[:, i] + vals[:, j])
        k = certain + int(np.count_nonzero(mid_vals <= cf[und]))
        if k < best:
            k = count_at(mid)  # rescore on the full set
            if k < best:
                best, best_b = k, mid.copy()
        for drop in (i, j):
            W = V.copy()
            W[drop] = mid
            wv = vals.copy()
            wv[:, drop] = mid_vals
            thr = cf[und]
            lost = wv.max(axis=1) <= thr + REGION_TOL
            cleared = wv.min(axis=1) > thr
            keep = ~lost & ~cleared
            cert = certain + int(np.count_nonzero(lost))
            regions += 1
            if cert < best:
                heapq.heappush(heap, (cert, next(counter), W, und[keep], wv[keep], cert))
    lower = min([best] + [h[0] for h in heap])
    return CountSearchResult(best, lower, best_b, regions, proved=lower >= best)


@dataclass
class _Reduced:
    lp: LpProblem
    n_cols: int
    b_cols: np.ndarray
    x_cols: np.ndarray  # LP column of x_i for each active mitigation
    y_cols: np.ndarray
    active: np.ndarray  # mitigation indices with an x column
    groups: list[np.ndarray]  # sequences represented by each y column
    forced: np.ndarray  # bool per sequence
    offset: float


def presolve(model: MilpModel) -> _Reduced:
    inst = model.instance
    nM, nC, nD = inst.n_mitigations, inst.n_sectors, inst.n_sequences
    lo, _ = log_success_range(inst)
    forced = lo > inst.log_delta - EPS_STRICT + 1e-9

    free = np.flatnonzero(~forced)
    groups: dict[bytes, list[int]] = {}
    for l in free:
        key = model.SP[l].tobytes() + model.SM[l].tobytes()
        groups.setdefault(key, []).append(int(l))
    reps = [np.array(g) for g in groups.values()]
    reps.sort(key=lambda g: g[0])

    if model.tie_weight > 0:
        touched = (np.abs(model.SP[free]).sum(axis=0) + model.SM[free].sum(axis=0)) > 0
        active = np.flatnonzero(touched)
    else:
        active = np.arange(nM)

    bl = model.blocks
    col_ids = list(range(bl["b"].start, bl["b"].stop))
    col_ids += [bl["f"].start + i for i in active]
    col_ids += [bl["h"].start + i for i in active]
    col_ids += [bl["x"].start + i for i in active]
    col_ids += [bl["y"].start + int(g[0]) for g in reps]
    col_ids = np.array(col_ids, dtype=int)

    row_ids = []
    for i in active:
        row_ids += [4 * i + r for r in range(4)]
    row_ids += [4 * nM + i for i in active]
    row_ids.append(5 * nM)
    for g in reps:
        l = int(g[0])
        row_ids += [5 * nM + 1 + 2 * l, 5 * nM + 2 + 2 * l]
    if inst.max_mitigations is not None:
        row_ids.append(model.n_rows - 1)
    row_ids = np.array(row_ids, dtype=int)

    A = model.A[np.ix_(row_ids, col_ids)]
    c = model.c[col_ids].copy()
    na = len(active)
    y0 = nC + 3 * na
    c[y0:] = [len(g) for g in reps]
    lp = LpProblem(
        c=c,
        A=A,
        senses=[model.senses[r] for r in row_ids],
        rhs=model.rhs[row_ids],
        lb=model.lb[col_ids],
        ub=model.ub[col_ids],
    )
    return _Reduced(
        lp=lp,
        n_cols=len(col_ids),
        b_cols=np.arange(nC),
        x_cols=np.arange(nC + 2 * na, nC + 3 * na),
        y_cols=np.arange(y0, y0 + len(reps)),
        active=active,
        groups=reps,
        forced=forced,
        offset=float(np.count_nonzero(forced)),
    )


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    fixings: tuple = field(compare=False, default=())
    basis: Basis | None = field(compare=False, default=None)
    branched: tuple | None = field(compare=False, default=None)  # (col, frac, direction, parent_bound)


class _Search:
    def __init__(self, model: MilpModel, opts: SolverOptions):
        self.model = model
        self.opts = opts
        self.inst = model.instance
        self.scorer = _Scorer(model)
        self.red = presolve(model)
        self.step = model.tie_weight if model.tie_weight > 0 else 1.0
        self.nodes = 0
        self.lp_iterations = 0
        self.counter = itertools.count()
        nM, nC = self.inst.n_mitigations, self.inst.n_sectors
        # feasibility anchor: nothing selected, uniform split, every sequence flagged
        self.inc_x = np.zeros(nM)
        self.inc_b = np.full(nC, 1.0 / nC)
        self.inc_obj = self.scorer.evaluate(self.inc_x, self.inc_b)[0]
        # global lower bound on the highly-likely count (from the budget search)
        self.count_lb = 0.0
        self.x_col_set = set(int(cc) for cc in self.red.x_cols)
        self.pc_sum = np.ones((self.red.n_cols, 2))
        self.pc_cnt = np.ones((self.red.n_cols, 2))

    def offer(self, x, b) -> bool:
        x = np.round(np.asarray(x, float))
        b = np.clip(np.asarray(b, float), 0.0, None)
        b = b / b.sum()
        obj = self.scorer.evaluate(x, b)[0]
        # prefer the 9-digit split that reports identically
        rb = scoring.rounded_budget(b)
        if np.all(rb >= 0) and self.scorer.evaluate(x, rb)[0] == obj:
            b = rb
        better = obj < self.inc_obj - 1e-9
        tie = abs(obj - self.inc_obj) <= 1e-9 and tuple(x) < tuple(self.inc_x)
        if better or tie:
            self.inc_x, self.inc_b, self.inc_obj = x, b, obj
            return better
        return False

    def prunable(self, bound: float) -> bool:
        return bound > self.inc_obj - self.step + 1e-6

    def floor_bound(self, bound: float) -> float:
        return math.ceil((bound - 1e-6) / self.step) * self.step

    def solve_node(self, node: _Node) -> LpResult:
        lb = self.red.lp.lb.copy()
        ub = self.red.lp.ub.copy()
        for col, val in node.fixings:
            lb[col] = ub[col] = val
        try:
            return solve_lp(self.red.lp, basis=node.basis, lb=lb, ub=ub)
        except NumericalError:
            log.debug("numerical trouble at node %d, retrying cold", node.seq)
            return solve_lp(self.red.lp, lb=lb, ub=ub)

    def rounding(self, res: LpResult) -> None:
        red = self.red
        b = res.x[red.b_cols]
        x = _start_selection(self.model)
        _, count, _ = self.scorer.evaluate(x, b)
        if count <= self.inc_obj + 1e-9:
            xv = np.zeros(self.inst.n_mitigations)
            xv[red.active] = res.x[red.x_cols]
            order = sorted(np.flatnonzero(x), key=lambda i: (xv[i], i))
            x, _ = _prune_selection(self.scorer, x, b, order=order)
        self.offer(x, b)

    def pick_branch(self, res: LpResult) -> int | None:
        red = self.red
        for block in (red.x_cols, red.y_cols):
            v = res.x[block]
            frac = np.minimum(v, 1.0 - v)
            cand = np.flatnonzero(frac > INT_TOL)
            if cand.size == 0:
                continue
            if self.opts.branching == "pseudo-cost":
                cols = block[cand]
                f = v[cand]
                down = self.pc_sum[cols, 0] / self.pc_cnt[cols, 0] * f
                up = self.pc_sum[cols, 1] / self.pc_cnt[cols, 1] * (1.0 - f)
                score = np.minimum(down, up) + 1e-6 * np.maximum(down, up)
                return int(cols[np.argmax(score)])
            return int(block[cand[np.argmax(frac[cand])]])
        return None

    def run(self, t_start: float) -> tuple[Status, float]:
        opts = self.opts
        red = self.red
        if opts.heuristic:
            g = greedy_heuristic(self.model, opts)
            self.offer(g.x, g.b)

        root = _Node(bound=-math.inf, seq=next(self.counter), depth=0)
        heap: list[_Node] = [root]
        pool = ThreadPoolExecutor(max_workers=opts.parallel) if opts.parallel > 1 else None
        status = Status.OPTIMAL
        try:
            while heap:
                if time.perf_counter() - t_start > opts.time_limit or self.nodes >= opts.node_limit:
                    status = Status.TIMED_OUT
                    break
                batch = []
                while heap and len(batch) < opts.parallel:
                    node = heapq.heappop(heap)
                    if node.bound > -math.inf and self.prunable(red.offset + node.bound):
                        continue
                    batch.append(node)
                if not batch:
                    break
                results = list(pool.map(self.solve_node, batch)) if pool else [self.solve_node(n) for n in batch]
                for node, res in zip(batch, results):
                    self.nodes += 1
                    self.lp_iterations += res.iterations
                    self.expand(node, res, heap)
        finally:
            if pool:
                pool.shutdown()

        if status == Status.OPTIMAL:
            return status, self.inc_obj
        open_bounds = [red.offset + n.bound for n in heap if not self.prunable(red.offset + n.bound)]
        # an unsolved root carries -inf; the objective itself is never negative
        best = max(min(open_bounds + [self.inc_obj]), 0.0)
        return status, self.floor_bound(best)

    def expand(self, node: _Node, res: LpResult, heap: list) -> None:
        red = self.red
        if not res.optimal:
            return
        bound = res.objective
        if node.branched is not None:
            col, frac, direction, parent = node.branched
            change = frac if direction == 0 else 1.0 - frac
            if change > 1e-9:
                self.pc_sum[col, direction] += max(bound - parent, 0.0) / change
                self.pc_cnt[col, direction] += 1
        if self.opts.heuristic:
            self.rounding(res)
        # every completion keeps at least count_lb sequences flagged and
        # pays the tie-break weight on each x already fixed to one
        ones = sum(1 for col, val in node.fixings if val == 1.0 and col in self.x_col_set)
        bound = max(bound, self.count_lb + self.model.tie_weight * ones - red.offset)
        if self.prunable(red.offset + bound):
            return
        col = self.pick_branch(res)
        if col is None:
            xv = np.zeros(self.inst.n_mitigations)
            xv[red.active] = res.x[red.x_cols]
            self.offer(xv, res.x[red.b_cols])
            return
        v = res.x[col]
        for val in (1.0, 0.0) if v >= 0.5 else (0.0, 1.0):
            heapq.heappush(
                heap,
                _Node(
                    bound=bound,
                    seq=next(self.counter),
                    depth=node.depth + 1,
                    fixings=node.fixings + ((col, val),),
                    basis=res.basis,
                    branched=(col, v, int(val), bound),
                ),
            )


def branch_and_bound(model: MilpModel, opts: SolverOptions | None = None) -> Solution:
    """Solve ``model`` to optimality, or until a time/node limit is hit.

    On a limit the best incumbent is returned with status TimedOut and the
    relative gap (incumbent - bound) / max(incumbent, 1).
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    inst = model.instance
    search = _Search(model, opts)
    counted = None
    if inst.max_mitigations is None or inst.max_mitigations >= inst.n_mitigations:
        counted = count_search(model, t0 + opts.time_limit, region_limit=opts.node_limit)
        x, _ = _prune_selection(search.scorer, np.ones(inst.n_mitigations), counted.b, order=_prune_order(model))
        search.offer(x, counted.b)
        search.count_lb = float(counted.lower)
    if counted is not None and counted.proved and model.tie_weight == 0:
        if opts.heuristic:
            g = greedy_heuristic(model, opts)
            search.offer(g.x, g.b)
        status, bound = Status.OPTIMAL, search.inc_obj
    else:
        status, bound = search.run(t0)
        if status != Status.OPTIMAL:
            bound = max(bound, search.count_lb)
    inc = search.inc_obj
    gap = 0.0 if status == Status.OPTIMAL else max(inc - bound, 0.0) / max(inc, 1.0)
    if search.inc_x is None:
        raise InfeasibleError("no integer-feasible point found")
    y = search.scorer.log_v(search.inc_x, search.inc_b) >= search.scorer.cut
    sol = extract_solution(model, Incumbent(search.inc_x, search.inc_b, y.astype(float)), status=status, gap=gap)
    sol.bound = bound
    sol.nodes = search.nodes
    sol.lp_iterations = search.lp_iterations
    sol.seconds = time.perf_counter() - t0
    sol.notes.append(
        f"presolve: {int(search.red.forced.sum())} sequence(s) fixed highly likely, "
        f"{len(search.red.groups)} free y column(s), {len(search.red.active)} active mitigation(s)"
    )
    if counted is not None:
        sol.notes.append(
            f"budget search: count {counted.count}, lower bound {counted.lower}, "
            f"{counted.regions} region(s){'' if counted.proved else ', not proved'}"
        )
    if model.instance.lam == 0:
        sol.notes.append("lambda = 0: the budget split has no effect on the objective")
    return sol

import itertools
import time

import numpy as np
import pytest

from cyberbudget import SolverOptions, Status, branch_and_bound, build_model, greedy_heuristic
from cyberbudget.oracle import simplex_grid
from cyberbudget.simplex import LpProblem, solve_lp
from cyberbudget.solver import count_search, presolve
from cyberbudget.synthetic import tiny_instance

from instances import instance_a, instance_b, instance_zero_m

FAST = SolverOptions(time_limit=20.0)


def solve(inst, **kw):
    return branch_and_bound(build_model(inst), SolverOptions(**{"time_limit": 20.0, **kw}))


def test_instance_a_lambda_two():
    sol = solve(instance_a(lam=2.0))
    assert sol.status == Status.OPTIMAL
    assert sol.objective == 0
    assert sol.vulnerability == 0.0
    assert sol.gap == 0.0


def test_instance_a_lambda_one_is_always_flagged():
    sol = solve(instance_a(lam=1.0))
    assert sol.objective == 1
    assert sol.vulnerability == 1.0
    # with nothing to gain, the tie-break empties the selection
    assert sol.x.sum() == 0


def test_instance_b_threshold():
    sol = solve(instance_b())
    assert sol.objective == 0
    assert sol.b[0] >= 0.7881
    assert sol.breakdown.log_v[0] < instance_b().log_delta


def test_greedy_examples():
    g = greedy_heuristic(build_model(instance_a()))
    assert g.objective == 0 and g.status == Status.FEASIBLE
    g = greedy_heuristic(build_model(instance_b()))
    assert g.objective == 0
    assert g.b == pytest.approx([0.8, 0.2], abs=1e-9)
    z = instance_zero_m()
    g = greedy_heuristic(build_model(z))
    assert g.objective == z.n_sequences
    assert g.x.sum() == 0


def test_greedy_evaluation_budget():
    for seed in range(25):
        inst = tiny_instance(seed)
        g = greedy_heuristic(build_model(inst))
        used = int(g.notes[-1].split()[-1])
        assert used <= max(10 * inst.n_mitigations * inst.n_sectors, 1)


@pytest.mark.parametrize("seed", range(25))
def test_heuristic_never_beats_exact(seed):
    inst = tiny_instance(seed)
    model = build_model(inst)
    assert greedy_heuristic(model).objective >= branch_and_bound(model, FAST).objective


@pytest.mark.parametrize("seed", range(12))
def test_scipy_milp_agrees(seed):
    opt = pytest.importorskip("scipy.optimize")
    inst = tiny_instance(seed)
    model = build_model(inst)
    lo = np.full(model.n_rows, -np.inf)
    hi = np.full(model.n_rows, np.inf)
    for r, s in enumerate(model.senses):
        if s in ("<=", "="):
            hi[r] = model.rhs[r]
        if s in (">=", "="):
            lo[r] = model.rhs[r]
    ref = opt.milp(
        model.c,
        constraints=opt.LinearConstraint(model.A, lo, hi),
        integrality=model.is_int.astype(int),
        bounds=opt.Bounds(model.lb, model.ub),
        options={"mip_rel_gap": 0.0},
    )
    assert ref.status == 0
    sol = branch_and_bound(model, FAST)
    ours = sol.objective + model.tie_weight * sol.x.sum()
    # both solve the same model up to the strictness band eps
    assert ours == pytest.approx(ref.fun, abs=1e-6)


SMALL_SEEDS = [s for s in range(40) if tiny_instance(s).n_mitigations <= 6][:15]


@pytest.mark.parametrize("seed", SMALL_SEEDS)
def test_root_and_subtree_bounds_are_valid(seed):
    """LP bounds never exceed a feasible value found by enumeration inside the subtree."""
    inst = tiny_instance(seed)
    model = build_model(inst)
    p = LpProblem(model.c, model.A, model.senses, model.rhs, model.lb, model.ub)
    grid = simplex_grid(inst.n_sectors, 0.1)
    xs = model.blocks["x"]
    for fix in (None, 0, 1):
        ub = model.ub.copy()
        lb = model.lb.copy()
        best = np.inf
        for bits in itertools.product((0, 1), repeat=inst.n_mitigations):
            if fix is not None and bits[0] != fix:
                continue
            for b in grid:
                best = min(best, inst.score(bits, b).count + model.tie_weight * sum(bits))
        if fix is not None:
            lb[xs.start] = ub[xs.start] = fix
        res = solve_lp(p, lb=lb, ub=ub)
        assert res.optimal
        assert res.objective <= best + 1e-7


def test_presolve_keeps_root_bound_valid():
    for seed in range(20):
        inst = tiny_instance(seed)
        model = build_model(inst)
        red = presolve(model)
        res = solve_lp(red.lp)
        sol = branch_and_bound(model, FAST)
        assert red.offset + res.objective <= sol.objective + model.tie_weight * sol.x.sum() + 1e-7


def test_parallel_matches_sequential():
    for seed in range(10):
        model = build_model(tiny_instance(seed))
        a = branch_and_bound(model, SolverOptions(time_limit=20.0))
        b = branch_and_bound(model, SolverOptions(time_limit=20.0, parallel=4))
        assert a.objective == b.objective
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.b, b.b)


def test_repeat_runs_identical():
    model = build_model(tiny_instance(11))
    a = branch_and_bound(model, FAST)
    b = branch_and_bound(model, FAST)
    assert (a.objective, tuple(a.x), tuple(a.b)) == (b.objective, tuple(b.x), tuple(b.b))


def test_pseudo_cost_branching_agrees():
    for seed in range(10):
        model = build_model(tiny_instance(seed))
        a = branch_and_bound(model, FAST)
        b = branch_and_bound(model, SolverOptions(time_limit=20.0, branching="pseudo-cost"))
        assert a.objective == b.objective
        assert a.x.sum() == b.x.sum()


def test_no_heuristic_still_optimal():
    for seed in range(10):
        model = build_model(tiny_instance(seed))
        a = branch_and_bound(model, FAST)
        b = branch_and_bound(model, SolverOptions(time_limit=20.0, heuristic=False))
        assert a.objective == b.objective


def test_cardinality_cap():
    inst = instance_b(max_mitigations=1)
    sol = solve(inst)
    assert sol.x.sum() <= 1
    assert sol.objective == 0
    assert sol.x.tolist() == [1, 0]


def test_zero_coverage_gives_feasibility_anchor():
    inst = instance_zero_m()
    sol = solve(inst)
    assert sol.objective == inst.n_sequences
    assert sol.vulnerability == 1.0
    assert sol.x.sum() == 0


def test_time_limit_returns_incumbent_with_gap():
    from cyberbudget.synthetic import reference_scale_instance

    inst, _ = reference_scale_instance()
    model = build_model(inst)
    t = time.perf_counter()
    sol = branch_and_bound(model, SolverOptions(time_limit=0.5))
    assert time.perf_counter() - t < 20.0
    assert sol.status in (Status.TIMED_OUT, Status.OPTIMAL)
    if sol.status == Status.TIMED_OUT:
        assert 0.0 <= sol.gap <= 1.0
        assert sol.bound <= sol.objective + model.tie_weight * sol.x.sum() + 1e-9
    assert sol.objective == inst.score(sol.x, sol.b).count


def test_count_search_matches_grid():
    for seed in range(30):
        inst = tiny_instance(seed, sparse_tiebreak=False)
        model = build_model(inst)
        res = count_search(model, time.perf_counter() + 10.0)
        assert res.proved
        assert res.lower == res.count
        assert inst.score(np.ones(inst.n_mitigations), res.b).count == res.count
        grid = simplex_grid(inst.n_sectors, 0.05)
        grid_best = min(inst.score(np.ones(inst.n_mitigations), b).count for b in grid)
        assert res.count <= grid_best


def test_invalid_options():
    with pytest.raises(ValueError):
        SolverOptions(time_limit=0)
    with pytest.raises(ValueError):
        SolverOptions(branching="random")
    with pytest.raises(ValueError):
        SolverOptions(parallel=0)


def test_lambda_zero_note():
    sol = solve(instance_a(lam=0.0))
    assert any("lambda = 0" in n for n in sol.notes)
    assert sol.objective == 1

"""Command-line interface: optimize, sweep, generate and verify.

Exit codes: 0 success (or verify PASS), 1 error (or verify FAIL),
2 solver time limit reached, 3 oracle guard tripped.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from . import formats
from .errors import BudgetExceededError, ConfigError, CyberBudgetError
from .hag import (
    build_sequence_matrix,
    enumerate_sequences,
    filter_impact_sequences,
    generate_synthetic_hag,
    validate_hag,
)
from .milp import ProblemInstance, Solution, Status, build_model, write_lp
from .oracle import exhaustive_optimum
from .solver import SolverOptions, branch_and_bound

log = logging.getLogger("cyberbudget")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TIMEOUT = 2
EXIT_GUARD = 3

BUNDLED = {
    "smart-inverter-model": "smart_inverter_model.json",
    "smart-inverter-hag": "smart_inverter_hag.json",
}

SolverHook = Callable[..., Solution]


def bundled_path(name: str):
    """Filesystem path of a bundled data file, by key of ``BUNDLED``."""
    return resources.files("cyberbudget") / "data" / BUNDLED[name]


def _resolve(path: str) -> str:
    # "bundled:<key>" names one of the shipped example files
    if path.startswith("bundled:"):
        key = path.split(":", 1)[1]
        if key not in BUNDLED:
            raise ConfigError(f"unknown bundled file {key!r}; choose from {sorted(BUNDLED)}")
        return str(bundled_path(key))
    return path


@dataclass
class RunConfig:
    model_path: str
    hag_path: str | None = None
    sequences_path: str | None = None
    lam: float = 0.1
    delta: float = 0.1
    solver: SolverOptions = field(default_factory=SolverOptions)
    sparse_tiebreak: bool = True
    max_mitigations: int | None = None
    strict: bool = False
    out: str = "-"

    def __post_init__(self) -> None:
        if (self.hag_path is None) == (self.sequences_path is None):
            raise ConfigError("give exactly one of --hag or --sequences")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be a nonnegative number, got {self.lam}")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")

    def load_instance(self, lam: float | None = None) -> ProblemInstance:
        kb = formats.load_model(_resolve(self.model_path), strict=self.strict)
        if self.hag_path is not None:
            hag = formats.load_hag(_resolve(self.hag_path))
            validate_hag(hag, kb)
            seqs = filter_impact_sequences(enumerate_sequences(hag), kb)
        else:
            seqs = formats.load_sequences(_resolve(self.sequences_path))
        return ProblemInstance(
            kb,
            build_sequence_matrix(seqs, kb),
            lam=self.lam if lam is None else lam,
            delta=self.delta,
            sparse_tiebreak=self.sparse_tiebreak,
            max_mitigations=self.max_mitigations,
        )


def _solve(instance: ProblemInstance, opts: SolverOptions) -> Solution:
    return branch_and_bound(build_model(instance), opts)


def _warnings_for(instance: ProblemInstance, sol: Solution) -> list[str]:
    out = []
    if instance.lam == 0:
        out.append("lambda = 0: the budget split has no effect on the objective")
    if sol.status == Status.TIMED_OUT:
        out.append(f"time limit reached; relative gap {formats.fmt_float(sol.gap)}")
    return out


def cmd_optimize(cfg: RunConfig, lp_out: str | None = None, timing: bool = False, solver: SolverHook | None = None) -> int:
    instance = cfg.load_instance()
    if lp_out:
        with open(lp_out, "w", encoding="utf-8", newline="\n") as fh:
            write_lp(build_model(instance), fh)
    sol = (solver or _solve)(instance, cfg.solver)
    warnings = _warnings_for(instance, sol)
    for w in warnings:
        log.warning(w)
    doc = formats.solution_to_dict(sol, instance, warnings, timing=timing)
    formats.write_text(formats.dumps(doc), cfg.out)
    return EXIT_TIMEOUT if sol.status == Status.TIMED_OUT else EXIT_OK


def lambda_grid(lam_min=None, lam_max=None, steps=None, explicit=None) -> list[float]:
    if explicit is not None:
        grid = [float(v) for v in explicit]
    else:
        if lam_min is None or lam_max is None or steps is None:
            raise ConfigError("sweep needs --lambdas or all of --lambda-min, --lambda-max, --steps")
        if steps < 1:
            raise ConfigError("--steps must be at least 1")
        if steps == 1:
            grid = [float(lam_min)]
        else:
            grid = [formats.round_sig(v) for v in np.linspace(lam_min, lam_max, steps)]
    if not grid:
        raise ConfigError("empty lambda grid")
    if len(set(grid)) != len(grid):
        raise ConfigError("lambda grid contains duplicate values")
    if any(v < 0 or not math.isfinite(v) for v in grid):
        raise ConfigError("lambda values must be nonnegative numbers")
    return sorted(grid)


def run_sweep(cfg: RunConfig, grid, jobs: int = 1, timing: bool = False, solver: SolverHook | None = None):
    """Solve one instance per lambda; returns (sector ids, rows in lambda order)."""
    base = cfg.load_instance()
    solve = solver or _solve
    n_d = base.n_sequences

    def one(lam: float) -> formats.SweepRow:
        t0 = time.perf_counter()
        try:
            sol = solve(base.with_lambda(lam), cfg.solver)
        except CyberBudgetError as exc:
            log.error("lambda=%s failed: %s", lam, exc)
            return formats.SweepRow.failed(lam, base.n_sectors, type(exc).__name__)
        seconds = time.perf_counter() - t0 if timing else None
        return formats.SweepRow.from_solution(lam, sol, n_d, seconds)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, grid))
    else:
        rows = [one(lam) for lam in grid]
    if not formats.vulnerability_monotone(rows):
        if formats.all_optimal(rows):
            log.warning("vulnerability increases along the lambda grid although every row is optimal")
        else:
            log.warning("vulnerability is not monotone in lambda; some rows did not solve to optimality")
    return [s.id for s in base.kb.sectors], rows


def cmd_sweep(cfg: RunConfig, grid, jobs: int = 1, timing: bool = False, solver: SolverHook | None = None) -> int:
    sectors, rows = run_sweep(cfg, grid, jobs=jobs, timing=timing, solver=solver)
    formats.write_text(formats.sweep_to_csv(rows, sectors), cfg.out)
    if any(r.status.startswith("Error") for r in rows):
        return EXIT_ERROR
    if any(r.status == str(Status.TIMED_OUT) for r in rows):
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_generate(model_path: str, seed: int, nodes: int, density: float, hag_out: str, sequences_out: str,
                 max_len: int, max_count: int, strict: bool = False) -> int:
    kb = formats.load_model(_resolve(model_path), strict=strict)
    hag = generate_synthetic_hag(kb, seed, nodes, density)
    found = enumerate_sequences(hag, max_len=max_len, max_count=max_count)
    impact = filter_impact_sequences(found, kb)
    formats.save_hag(hag, hag_out)
    formats.save_sequences(impact, sequences_out)
    print(f"nodes {len(hag.nodes)} edges {len(hag.edges)} sequences {len(found)} impact-sequences {len(impact)}")
    if not impact:
        log.warning("no attack sequence reaches an impact technique")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, grid_step: float | None, solver: SolverHook | None = None) -> int:
    instance = cfg.load_instance()
    try:
        ref = exhaustive_optimum(instance, grid_step)
    except BudgetExceededError as exc:
        log.error("%s", exc)
        return EXIT_GUARD
    sol = (solver or _solve)(instance, cfg.solver)
    rescored = instance.score(sol.x, sol.b).count
    ok = sol.objective <= ref.best_objective and rescored == sol.objective
    verdict = "PASS" if ok else "FAIL"
    print(
        f"{verdict}: solver objective {sol.objective} (rescored {rescored}), "
        f"oracle objective {ref.best_objective} on grid step {formats.fmt_float(ref.grid_step)}"
    )
    return EXIT_OK if ok else EXIT_ERROR


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model JSON (or bundled:smart-inverter-model)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--hag", help="HAG JSON; source-to-sink paths reaching an impact technique become sequences")
    src.add_argument("--sequences", help="sequence list JSON")
    p.add_argument("--delta", type=float, default=0.1, help="highly-likely threshold (default 0.1)")
    p.add_argument("--strict", action="store_true", help="reject unknown keys and any validation finding")
    p.add_argument("--no-sparse-tiebreak", dest="sparse_tiebreak", action="store_false",
                   help="do not prefer smaller mitigation sets among optima")
    p.add_argument("--max-mitigations", type=int, default=None, help="cap on the number of selected mitigations")
    p.add_argument("--time-limit", type=float, default=60.0, help="seconds per solve (default 60)")
    p.add_argument("--node-limit", type=int, default=1_000_000)
    p.add_argument("--heuristic", dest="heuristic", action="store_true", default=True)
    p.add_argument("--no-heuristic", dest="heuristic", action="store_false")
    p.add_argument("--branching", choices=("most-fractional", "pseudo-cost"), default="most-fractional")
    p.add_argument("--parallel", type=int, default=1, help="LP relaxations solved per batch")
    p.add_argument("--seed", type=int, default=0, help="heuristic seed")
    p.add_argument("--out", default="-", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyberbudget", description="Budget partitioning across security sectors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="solve one instance and write a solution JSON")
    _add_instance_args(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="defender skill (default 0.1)")
    p.add_argument("--lp-out", help="also write the MILP in LP format")
    p.add_argument("--timing", action="store_true", help="include solve seconds (breaks byte determinism)")

    p = sub.add_parser("sweep", help="solve across a lambda grid and write CSV")
    _add_instance_args(p)
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--lambdas", help="comma-separated explicit grid")
    p.add_argument("--jobs", type=int, default=1, help="rows solved concurrently")
    p.add_argument("--timing", action="store_true", help="fill the seconds column")

    p = sub.add_parser("generate", help="draw a synthetic HAG and its impact sequences")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--max-len", type=int, default=12)
    p.add_argument("--max-count", type=int, default=10_000)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--hag-out", required=True)
    p.add_argument("--sequences-out", required=True)

    p = sub.add_parser("verify", help="compare the solver with the brute-force oracle")
    _add_instance_args(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--grid-step", type=float, default=None, help="oracle budget grid step")
    return parser


def _config(args) -> RunConfig:
    opts = SolverOptions(
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        branching=args.branching,
        heuristic=args.heuristic,
        seed=args.seed,
        parallel=args.parallel,
    )
    return RunConfig(
        model_path=args.model,
        hag_path=args.hag,
        sequences_path=args.sequences,
        lam=getattr(args, "lam", 0.1),
        delta=args.delta,
        solver=opts,
        sparse_tiebreak=args.sparse_tiebreak,
        max_mitigations=args.max_mitigations,
        strict=args.strict,
        out=args.out,
    )


def main(argv=None, solver: SolverHook | None = None) -> int:
    """Entry point; ``solver`` replaces branch-and-bound (used for fault injection)."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "generate":
            return cmd_generate(args.model, args.seed, args.nodes, args.density, args.hag_out,
                                args.sequences_out, args.max_len, args.max_count, args.strict)
        if args.command == "sweep":
            explicit = args.lambdas.split(",") if args.lambdas else None
            grid = lambda_grid(args.lambda_min, args.lambda_max, args.steps, explicit)
            return cmd_sweep(_config(args), grid, jobs=args.jobs, timing=args.timing, solver=solver)
        cfg = _config(args)
        if args.command == "optimize":
            return cmd_optimize(cfg, lp_out=args.lp_out, timing=args.timing, solver=solver)
        return cmd_verify(cfg, args.grid_step, solver=solver)
    except (CyberBudgetError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Monte Carlo sweeps over random instances, with CSV output.

Trial ``t`` of a sweep with base seed ``s`` uses instance seed
``mix_seed(s ^ t)`` (SplitMix64), so any single row can be reproduced on its
own and sub-sweeps match the rows of a larger sweep.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .bp import bp_solve
from .exact import brute_force, reduction_solve
from .graph import gen_instance, is_feasible, many_side_size, mix_seed
from .rde import c_star

__all__ = [
    "SOLVERS",
    "ExperimentConfig",
    "TrialRecord",
    "McSummary",
    "trial_seed",
    "run_trial",
    "run_mc",
    "mc_to_csv",
    "CompareRow",
    "run_compare",
    "compare_to_csv",
]

SOLVERS = ("brute", "exact", "bp")


def trial_seed(seed: int, trial: int) -> int:
    return mix_seed(seed ^ trial)


@dataclass
class ExperimentConfig:
    alpha: float = 2.0
    n: int = 100
    trials: int = 10
    k_max: int = 50
    seed: int = 0
    solver: str = "exact"
    workers: int = 1
    ks: Sequence[int] = field(default_factory=lambda: (5, 10, 25, 50))

    def validate(self) -> "ExperimentConfig":
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        for name in ("n", "trials", "k_max", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if not self.ks or min(self.ks) < 1:
            raise ValueError("k values must be positive")
        many_side_size(self.n, self.alpha)
        return self


@dataclass
class TrialRecord:
    trial: int
    n: int
    m: int
    alpha: float
    seed: int
    solver: str
    k: int | None
    cost: float
    cost_over_n: float
    runtime_ms: float
    uncovered_before_repair: int | None


def _solve(inst, solver: str, k_max: int):
    if solver == "brute":
        M, cost = brute_force(inst)
        return M, cost, None, None
    if solver == "exact":
        M, cost = reduction_solve(inst)
        return M, cost, None, None
    M, cost, diag = bp_solve(inst, k_max)
    return M, cost, k_max, diag.uncovered[-1]


def run_trial(config: ExperimentConfig, trial: int) -> TrialRecord:
    s = trial_seed(config.seed, trial)
    inst = gen_instance(config.n, config.alpha, s)
    t0 = time.perf_counter()
    M, cost, k, uncovered = _solve(inst, config.solver, config.k_max)
    elapsed = 1e3 * (time.perf_counter() - t0)
    if not is_feasible(inst, M):
        raise AssertionError(f"trial {trial}: solver {config.solver} returned an infeasible matching")
    return TrialRecord(trial, inst.n, inst.m, inst.alpha, s, config.solver, k, cost,
                       cost / inst.n, elapsed, uncovered)


def _map_trials(fn, config, trials):
    if config.workers == 1:
        return [fn(config, t) for t in trials]
    with ProcessPoolExecutor(max_workers=config.workers) as ex:
        # map() yields in submission order regardless of completion order
        return list(ex.map(fn, [config] * len(trials), trials))


@dataclass
class McSummary:
    records: list[TrialRecord]
    mean: float
    stderr: float
    c_star: float

    @property
    def abs_gap(self) -> float:
        return abs(self.mean - self.c_star)


def run_mc(config: ExperimentConfig) -> McSummary:
    """Solve ``config.trials`` independent instances; summarize ``cost / n``."""
    config.validate()
    records = _map_trials(run_trial, config, list(range(config.trials)))
    x = np.array([r.cost_over_n for r in records])
    stderr = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return McSummary(records, float(x.mean()), stderr, c_star(config.alpha))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


MC_COLUMNS = [f.name for f in fields(TrialRecord)] + ["stderr", "c_star", "abs_gap"]


def mc_to_csv(summary: McSummary, include_runtime: bool = True) -> str:
    """Trial rows, then a ``summary`` row whose ``cost_over_n`` is the mean.

    ``include_runtime=False`` blanks the timing column so the output is a pure
    function of the configuration.
    """
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(MC_COLUMNS)
    for r in summary.records:
        row = asdict(r)
        if not include_runtime:
            row["runtime_ms"] = None
        wr.writerow([_fmt(row[c]) for c in MC_COLUMNS[:-3]] + ["", "", ""])
    first = summary.records[0]
    wr.writerow(["summary", first.n, first.m, first.alpha, "", first.solver, _fmt(first.k),
                 "", _fmt(summary.mean), "", "", _fmt(summary.stderr),
                 _fmt(summary.c_star), _fmt(summary.abs_gap)])
    return buf.getvalue()


@dataclass
class CompareRow:
    trial: int
    n: int
    m: int
    alpha: float
    seed: int
    k: int
    bp_cost: float
    exact_cost: float
    ratio: float
    uncovered_before_repair: int
    brute_cost: float | None = None


def _compare_trial(config: ExperimentConfig, trial: int) -> list[CompareRow]:
    s = trial_seed(config.seed, trial)
    inst = gen_instance(config.n, config.alpha, s)
    _, exact = reduction_solve(inst)
    brute = None
    if inst.n <= 7 and inst.m <= 4:
        _, brute = brute_force(inst)
    rows = []
    for k in sorted(config.ks):
        M, cost, diag = bp_solve(inst, k)
        if not is_feasible(inst, M):
            raise AssertionError("bp_solve returned an infeasible matching")
        rows.append(CompareRow(trial, inst.n, inst.m, inst.alpha, s, k, cost, exact,
                               cost / exact if exact > 0 else 1.0, diag.uncovered[-1], brute))
    return rows


def run_compare(config: ExperimentConfig) -> list[CompareRow]:
    """BP (one row per k in ``config.ks``) against the exact optimum, per instance."""
    config.validate()
    per_trial = _map_trials(_compare_trial, config, list(range(config.trials)))
    return [row for rows in per_trial for row in rows]


def compare_to_csv(rows: list[CompareRow]) -> str:
    buf = io.StringIO()
    cols = [f.name for f in fields(CompareRow)]
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        d = asdict(r)
        wr.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()

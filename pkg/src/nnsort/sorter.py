"""Iterative model-guided sorting.

Each iteration maps the current input through the predictor into a relaxed
sparse array of ``ceil(m * len(input))`` slots.  The first key to reach a slot
keeps it; later keys go to the conflict array, which becomes the next
iteration's input.  Iteration stops once the conflict array is no larger than
``tau`` or after ``epsilon`` rounds.  The leftover conflicts are quicksorted
and everything is merged by :func:`nnsort.polish.merge`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import quicksort
from .core import IterationMetrics, OpCounters, SortConfig, validate_keys
from .model import predict_many
from .polish import SparseRun, compact, count_out_of_order, merge

PHASES = ("approximate_ordering", "handling_conflicts", "merging")


def output_size(m: float, batch_size: int) -> int:
    return max(1, math.ceil(m * batch_size))


def position(logit, m: float, batch_size: int):
    """Slot index ``round(logit * (S - 1))`` in an array of ``S = ceil(m * batch_size)`` slots.

    Works on scalars and arrays.  Halves round up, which keeps the map monotone.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    s = output_size(m, batch_size)
    idx = np.floor(np.clip(np.asarray(logit, dtype=np.float64), 0.0, 1.0) * (s - 1) + 0.5)
    idx = np.clip(idx, 0, s - 1).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def map_iteration(keys: np.ndarray, p, m: float, iteration_index: int = 1,
                  counters: OpCounters | None = None):
    """One mapping round.  Returns ``(run, conflicts, metrics)``.

    Conflicts keep their input order.  Each key costs one model invocation
    and one move (into its slot or onto the conflict array).
    """
    keys = np.asarray(keys, dtype=np.float64)
    n = len(keys)
    if n == 0:
        raise ValueError("map_iteration needs a non-empty input")
    logits = predict_many(p, keys, counters)
    pos = position(logits, m, n)
    size = output_size(m, n)

    # np.unique reports the first occurrence of each slot: first come keeps it
    _, first = np.unique(pos, return_index=True)
    placed = np.zeros(n, dtype=bool)
    placed[first] = True

    values = np.zeros(size)
    filled = np.zeros(size, dtype=bool)
    values[pos[first]] = keys[first]
    filled[pos[first]] = True
    conflicts = keys[~placed]
    if counters is not None:
        counters.moves += n

    run = SparseRun(values, filled)
    ooo = count_out_of_order(values[filled])
    metrics = IterationMetrics(
        iteration_index=iteration_index,
        input_size=n,
        conflict_size=len(conflicts),
        sigma=len(conflicts) / n,
        out_of_order_rate=ooo / max(1, len(first)),
    )
    return run, conflicts, metrics


@dataclass
class RunSet:
    """Everything a sort produced besides the output itself."""

    n: int
    runs: list = field(default_factory=list)
    final_conflicts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    metrics: list = field(default_factory=list)
    counters: OpCounters = field(default_factory=OpCounters)
    phase_counters: dict = field(default_factory=lambda: {p: OpCounters() for p in PHASES})
    phase_seconds: dict = field(default_factory=lambda: {p: 0.0 for p in PHASES})
    bypassed: bool = False

    @property
    def iterations(self) -> int:
        return len(self.runs)

    @property
    def fallback_fraction(self) -> float:
        """Share of the input left for the comparison sort."""
        return len(self.final_conflicts) / self.n if self.n else 0.0

    @property
    def out_of_order_count(self) -> int:
        return sum(round(mt.out_of_order_rate * mt.placed) for mt in self.metrics)


def nn_sort(a, p, cfg: SortConfig = SortConfig()):
    """Sort ``a`` with predictor ``p``.  Returns ``(sorted list, RunSet)``.

    Inputs no larger than ``cfg.tau`` skip the model and are quicksorted.
    """
    keys = validate_keys(a)
    rs = RunSet(n=len(keys))
    ctr = rs.counters
    clock = time.perf_counter

    w = keys
    if len(w) <= cfg.tau:
        rs.bypassed = True
    else:
        i = 0
        while i < cfg.epsilon and len(w) > cfg.tau:
            phase = PHASES[0] if i == 0 else PHASES[1]
            before, t0 = ctr.copy(), clock()
            o, w, metrics = map_iteration(w, p, cfg.m, i + 1, ctr)
            rs.phase_counters[phase].add(ctr - before)
            rs.phase_seconds[phase] += clock() - t0
            rs.runs.append(o)
            rs.metrics.append(metrics)
            i += 1

    before, t0 = ctr.copy(), clock()
    w_sorted = quicksort(w, ctr)
    rs.phase_counters[PHASES[1]].add(ctr - before)
    rs.phase_seconds[PHASES[1]] += clock() - t0
    rs.final_conflicts = np.asarray(w_sorted, dtype=np.float64)

    before, t0 = ctr.copy(), clock()
    result = merge(rs.runs, w_sorted, ctr)
    rs.phase_counters[PHASES[2]].add(ctr - before)
    rs.phase_seconds[PHASES[2]] += clock() - t0
    return result, rs


def phase_breakdown(rs: RunSet, theta: float | None = None) -> dict:
    """Per-phase op counts and seconds; the three buckets partition the totals."""
    from .core import DEFAULT_THETA

    theta = DEFAULT_THETA if theta is None else theta
    out = {}
    for name in PHASES:
        c = rs.phase_counters[name]
        out[name] = {**c.as_dict(), "ops": c.total(theta), "seconds": rs.phase_seconds[name]}
    out["total"] = {**rs.counters.as_dict(), "ops": rs.counters.total(theta),
                    "seconds": sum(rs.phase_seconds.values())}
    return out


def compacted_runs(rs: RunSet):
    return [compact(o) for o in rs.runs]

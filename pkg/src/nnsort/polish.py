"""Polish phase: compact the roughly ordered runs and merge them with the
sorted conflict array into an exactly sorted output.

A run element counts as in order when it is not smaller than the largest
element already consumed from the same run.  In-order elements go through a
two-finger merge; the rest are placed by binary-search insertion into the
partial result.  Correctness never depends on run quality.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .core import OpCounters


@dataclass(frozen=True)
class SparseRun:
    """Output array of one mapping iteration; ``filled[k]`` marks occupied slots."""

    values: np.ndarray
    filled: np.ndarray

    @classmethod
    def from_slots(cls, slots) -> "SparseRun":
        """Build from a list where ``None`` is an empty slot."""
        filled = np.array([v is not None for v in slots], dtype=bool)
        values = np.array([0.0 if v is None else v for v in slots], dtype=np.float64)
        return cls(values, filled)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class CompactedRun:
    keys: np.ndarray
    out_of_order_count: int

    @property
    def out_of_order_rate(self) -> float:
        return self.out_of_order_count / max(1, len(self.keys))


def count_out_of_order(keys: np.ndarray) -> int:
    """Number of keys smaller than some earlier key (below the running maximum)."""
    if len(keys) < 2:
        return 0
    running = np.maximum.accumulate(keys)
    return int(np.count_nonzero(keys[1:] < running[:-1]))


def compact(o: SparseRun, counters: OpCounters | None = None) -> CompactedRun:
    keys = o.values[o.filled]
    if counters is not None:
        counters.moves += len(keys)
    return CompactedRun(keys, count_out_of_order(keys))


def merge_one(run, w, counters: OpCounters | None = None) -> list:
    """Merge one roughly ordered run into sorted ``w``; returns a new sorted list.

    ``run`` is a :class:`CompactedRun` or a plain key sequence.  Ties take the
    element from ``w`` first.
    """
    keys = run.keys if isinstance(run, CompactedRun) else run
    if isinstance(keys, np.ndarray):
        keys = keys.tolist()
    if isinstance(w, np.ndarray):
        w = w.tolist()
    result: list = []
    append = result.append
    nw = len(w)
    i = 0
    cmp = moves = shifts = 0
    broom = None
    for a in keys:
        if broom is not None:
            cmp += 1
            if a < broom:
                # a < broom <= result[-1], so the insertion point is interior
                pos = bisect_right(result, a)
                cmp += len(result).bit_length()
                shifts += len(result) - pos
                result.insert(pos, a)
                moves += 1
                continue
        j = bisect_right(w, a, i)
        # a two-finger merge compares a against each w head it passes, plus the one that stops it
        cmp += (j - i) + (j < nw)
        if j > i:
            result.extend(w[i:j])
            moves += j - i
            i = j
        append(a)
        moves += 1
        broom = a
    if i < nw:
        result.extend(w[i:])
        moves += nw - i
    if counters is not None:
        counters.comparisons += cmp
        counters.moves += moves
        counters.insert_shifts += shifts
    return result


def merge(runs, w, counters: OpCounters | None = None) -> list:
    """Fold :func:`merge_one` over ``runs`` in order, threading the result as ``w``.

    ``runs`` may hold :class:`SparseRun` (compacted here) or
    :class:`CompactedRun` items.
    """
    result = w.tolist() if isinstance(w, np.ndarray) else list(w)
    for o in runs:
        run = compact(o, counters) if isinstance(o, SparseRun) else o
        result = merge_one(run, result, counters)
    return result


def insertion_count(runs) -> int:
    """Insertions :func:`merge` performs for these runs (one per out-of-order key)."""
    return sum((compact(o) if isinstance(o, SparseRun) else o).out_of_order_count for o in runs)

"""Instrumented comparison sorts and the single-pass learned sort baseline."""

from __future__ import annotations

import numpy as np

from .core import OpCounters

INSERTION_CUTOFF = 16


def _as_list(a) -> list:
    return a.tolist() if isinstance(a, np.ndarray) else list(a)


def _charge(counters, cmp, mv):
    if counters is not None:
        counters.comparisons += cmp
        counters.moves += mv


def _insertion_sort(a: list, lo: int, hi: int):
    """Sort a[lo..hi] inclusive in place; returns (comparisons, moves)."""
    cmp = mv = 0
    for k in range(lo + 1, hi + 1):
        v = a[k]
        j = k - 1
        while j >= lo:
            cmp += 1
            if a[j] <= v:
                break
            a[j + 1] = a[j]
            mv += 1
            j -= 1
        if j + 1 != k:
            a[j + 1] = v
            mv += 1
    return cmp, mv


def quicksort(a, counters: OpCounters | None = None) -> list:
    """Median-of-three quicksort with Hoare partitioning.

    Equal keys stop both scans, so runs of duplicates split evenly.  The
    larger side goes on an explicit stack, bounding it at O(log n).
    """
    a = _as_list(a)
    cmp = mv = 0
    stack = [(0, len(a) - 1)]
    while stack:
        lo, hi = stack.pop()
        while hi - lo >= INSERTION_CUTOFF:
            mid = (lo + hi) // 2
            if a[mid] < a[lo]:
                a[mid], a[lo] = a[lo], a[mid]
                mv += 2
            if a[hi] < a[lo]:
                a[hi], a[lo] = a[lo], a[hi]
                mv += 2
            if a[hi] < a[mid]:
                a[hi], a[mid] = a[mid], a[hi]
                mv += 2
            cmp += 3
            pivot = a[mid]
            i, j = lo - 1, hi + 1
            while True:
                i += 1
                cmp += 1
                while a[i] < pivot:
                    i += 1
                    cmp += 1
                j -= 1
                cmp += 1
                while pivot < a[j]:
                    j -= 1
                    cmp += 1
                if i >= j:
                    break
                a[i], a[j] = a[j], a[i]
                mv += 2
            if j - lo < hi - j - 1:
                stack.append((j + 1, hi))
                hi = j
            else:
                stack.append((lo, j))
                lo = j + 1
        c, m = _insertion_sort(a, lo, hi)
        cmp += c
        mv += m
    _charge(counters, cmp, mv)
    return a


def heapsort(a, counters: OpCounters | None = None) -> list:
    """Max-heap sort: bottom-up (Floyd) heap construction, then sift-down extraction."""
    a = _as_list(a)
    n = len(a)
    cmp = mv = 0

    def sift(start, end):
        # move a[start] down within a[:end] using a hole; returns op counts
        c = m = 0
        v = a[start]
        hole = start
        child = 2 * hole + 1
        while child < end:
            if child + 1 < end:
                c += 1
                if a[child] < a[child + 1]:
                    child += 1
            c += 1
            if not v < a[child]:
                break
            a[hole] = a[child]
            m += 1
            hole = child
            child = 2 * hole + 1
        if hole != start:
            a[hole] = v
            m += 1
        return c, m

    for start in range(n // 2 - 1, -1, -1):
        c, m = sift(start, n)
        cmp += c
        mv += m
    for end in range(n - 1, 0, -1):
        a[0], a[end] = a[end], a[0]
        mv += 2
        c, m = sift(0, end)
        cmp += c
        mv += m
    _charge(counters, cmp, mv)
    return a


def mergesort(a, counters: OpCounters | None = None) -> list:
    """Top-down mergesort with one scratch buffer; stable."""
    a = _as_list(a)
    n = len(a)
    buf = [0.0] * n
    ops = [0, 0]

    def sort(lo, hi):  # half-open
        if hi - lo < 2:
            return
        mid = (lo + hi) // 2
        sort(lo, mid)
        sort(mid, hi)
        if not a[mid] < a[mid - 1]:
            ops[0] += 1
            return
        buf[lo:mid] = a[lo:mid]
        i, j, k = lo, mid, lo
        cmp = 0
        while i < mid and j < hi:
            cmp += 1
            if a[j] < buf[i]:
                a[k] = a[j]
                j += 1
            else:
                a[k] = buf[i]
                i += 1
            k += 1
        if i < mid:
            a[k:hi] = buf[i:mid]
        ops[0] += cmp + 1
        # copy-out of the left half plus one write per output slot before j
        ops[1] += (mid - lo) + (k - lo) + (mid - i)

    sort(0, n)
    _charge(counters, ops[0], ops[1])
    return a


def single_pass_learned_sort(a, p, m: float = 2.0, counters: OpCounters | None = None):
    """Map every key through the model once, quicksort the collisions, merge.

    Returns ``(sorted list, conflict_rate)``.
    """
    from .sorter import map_iteration
    from .polish import merge

    keys = np.asarray(a, dtype=np.float64)
    if keys.size == 0:
        return [], 0.0
    o, c, metrics = map_iteration(keys, p, m, counters=counters)
    w = quicksort(c, counters)
    return merge([o], w, counters), metrics.sigma


SORTERS = {
    "quicksort": quicksort,
    "heapsort": heapsort,
    "mergesort": mergesort,
}

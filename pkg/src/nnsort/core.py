"""Shared key handling, sort configuration and operation counters.

Keys are finite 64-bit floats.  Every sort routine in the package accepts an
optional :class:`OpCounters` and charges comparisons, moves and model
invocations to it, so the measured work can be set against the closed-form
cost model in :mod:`nnsort.analysis`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

# Operations charged per forward pass of the 1-32-8-4-1 network (its parameter
# count).  Shared by the op counters and the cost-model formulas.
DEFAULT_THETA = 369


class InvalidKeyError(ValueError):
    """Raised when input keys are not finite 64-bit floats."""


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


@dataclass(frozen=True)
class SortConfig:
    """Relaxation factor ``m``, conflict threshold ``tau`` and iteration cap ``epsilon``."""

    m: float = 2.0
    tau: int = 1000
    epsilon: int = 3

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m >= 1.0):
            raise ConfigError(f"relaxation factor m must be >= 1.0, got {self.m}")
        if int(self.tau) != self.tau or self.tau < 0:
            raise ConfigError(f"tau must be a non-negative integer, got {self.tau}")
        if int(self.epsilon) != self.epsilon or self.epsilon < 1:
            raise ConfigError(f"epsilon must be a positive integer, got {self.epsilon}")


@dataclass
class OpCounters:
    """Operation tallies for a single sort call.

    ``insert_shifts`` records how many slots were shifted by insertions into
    the merged output.  It is reported but not folded into :meth:`total`,
    since the cost model charges an insertion at its search cost.
    """

    comparisons: int = 0
    moves: int = 0
    model_invocations: int = 0
    insert_shifts: int = 0

    def total(self, theta: float = DEFAULT_THETA) -> float:
        return self.comparisons + self.moves + theta * self.model_invocations

    def add(self, other: "OpCounters") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def copy(self) -> "OpCounters":
        return OpCounters(**self.as_dict())

    def __sub__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(**{f.name: getattr(self, f.name) - getattr(other, f.name)
                             for f in fields(self)})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class IterationMetrics:
    iteration_index: int
    input_size: int
    conflict_size: int
    sigma: float
    out_of_order_rate: float = 0.0
    placed: int = field(init=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "placed", self.input_size - self.conflict_size)

    def as_dict(self) -> dict:
        return {
            "iteration_index": self.iteration_index,
            "input_size": self.input_size,
            "conflict_size": self.conflict_size,
            "sigma": self.sigma,
            "out_of_order_rate": self.out_of_order_rate,
        }


def validate_keys(data) -> np.ndarray:
    """Return ``data`` as a float64 array, rejecting NaN and infinities.

    Order and duplicates are preserved.  The error message names the first
    offending index.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.argmax(bad))
        raise InvalidKeyError(f"non-finite key {arr[idx]!r} at index {idx}")
    return arr


def normalize(x, lo: float, hi: float):
    """Map ``x`` linearly from ``[lo, hi]`` onto ``[0, 1]``, clamping outside."""
    if not lo < hi:
        raise ConfigError(f"normalization bounds need lo < hi, got lo={lo}, hi={hi}")
    out = np.clip((np.asarray(x, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


# --- dataset files -----------------------------------------------------------

def read_keys(path) -> np.ndarray:
    """Load a dataset: ``.bin`` is raw little-endian float64, ``.csv`` is one column."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) % 8:
            raise InvalidKeyError(f"{path}: size {len(raw)} is not a multiple of 8 bytes")
        return validate_keys(np.frombuffer(raw, dtype="<f8").astype(np.float64))
    if suffix == ".csv":
        return _read_single_column_csv(path)
    raise InvalidKeyError(f"{path}: unknown dataset extension {suffix!r} (want .bin or .csv)")


def write_keys(path, keys) -> None:
    path = Path(path)
    keys = validate_keys(keys)
    suffix = path.suffix.lower()
    if suffix == ".bin":
        path.write_bytes(keys.astype("<f8").tobytes())
    elif suffix == ".csv":
        with open(path, "w", newline="") as fh:
            fh.write("key\n")
            for v in keys.tolist():
                fh.write(repr(v) + "\n")
    else:
        raise InvalidKeyError(f"{path}: unknown dataset extension {suffix!r} (want .bin or .csv)")


def _read_single_column_csv(path: Path) -> np.ndarray:
    values = []
    with open(path, newline="") as fh:
        for rowno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            cell = row[0].strip()
            try:
                values.append(float(cell))
            except ValueError:
                if rowno == 1:  # header line
                    continue
                raise InvalidKeyError(f"{path}: row {rowno}: non-numeric cell {cell!r}") from None
    return validate_keys(np.array(values, dtype=np.float64))

"""Reproducible synthetic datasets and CSV key ingestion.

Random numbers come from a counter-based SplitMix64 stream rather than the
platform RNG, so a (distribution, n, seed, params) tuple yields the same keys
on every machine.  Normal variates use Box-Muller over that stream.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import ConfigError, InvalidKeyError, validate_keys

DISTRIBUTIONS = ("uniform", "normal", "lognormal")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to uint64 values."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _stream(seed: int, n: int, lane: int = 0) -> np.ndarray:
    """n uint64 draws for (seed, lane); lanes give independent streams."""
    base = splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64) ^ np.uint64(lane * 0xD1B54A32D192ED03 & 0xFFFFFFFFFFFFFFFF))[0]
    with np.errstate(over="ignore"):
        ctr = base + np.arange(n, dtype=np.uint64) * _GOLDEN
    return splitmix64(ctr)


def uniform01(seed: int, n: int, lane: int = 0) -> np.ndarray:
    """Doubles in [0, 1) with 53 random bits each."""
    return (_stream(seed, n, lane) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def standard_normal(seed: int, n: int, lane: int = 0) -> np.ndarray:
    u1 = uniform01(seed, n, 2 * lane + 1)
    u2 = uniform01(seed, n, 2 * lane + 2)
    # 1 - u1 lies in (0, 1], keeping the log finite
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def generate(dist: str, n: int, seed: int = 0, *, low: float = 0.0, high: float = 1.0,
             mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Draw ``n`` keys from ``uniform`` [low, high), ``normal`` or ``lognormal`` (mu, sigma)."""
    if n < 0:
        raise ConfigError(f"n must be non-negative, got {n}")
    if dist == "uniform":
        if not low < high:
            raise ConfigError("uniform needs low < high")
        out = low + (high - low) * uniform01(seed, n)
    elif dist in ("normal", "lognormal"):
        if not sigma > 0:
            raise ConfigError(f"sigma must be positive, got {sigma}")
        out = mu + sigma * standard_normal(seed, n)
        if dist == "lognormal":
            out = np.exp(out)
    else:
        raise ConfigError(f"unknown distribution {dist!r}; choose from {', '.join(DISTRIBUTIONS)}")
    return validate_keys(out)


def permutation(seed: int, n: int, lane: int = 7) -> np.ndarray:
    """Deterministic shuffle order: argsort of pinned random words."""
    return np.argsort(_stream(seed, n, lane), kind="stable")


def noisy_mix(n: int, noise_fraction: float, seed: int = 0) -> np.ndarray:
    """floor((1-f)*n) uniform keys plus normal 'noise' keys, shuffled."""
    if not 0.0 <= noise_fraction <= 1.0:
        raise ConfigError(f"noise fraction must lie in [0, 1], got {noise_fraction}")
    n_uniform = int(np.floor((1.0 - noise_fraction) * n + 1e-9))
    clean = generate("uniform", n_uniform, seed)
    noise = generate("normal", n - n_uniform, seed + 1)
    mixed = np.concatenate([clean, noise])
    return mixed[permutation(seed, n)]


def load_csv_keys(path, column=0) -> np.ndarray:
    """Read one numeric column from a CSV with a header row.

    ``column`` is a header name or a zero-based index.  Non-numeric cells are
    reported with their 1-based file row number.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidKeyError(f"{path}: empty CSV file") from None
        if isinstance(column, int):
            if not 0 <= column < len(header):
                raise InvalidKeyError(f"{path}: column index {column} out of range; "
                                      f"available columns: {header}")
            col = column
        else:
            if column not in header:
                raise InvalidKeyError(f"{path}: no column {column!r}; available columns: {header}")
            col = header.index(column)
        values = []
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(float(row[col]))
            except (ValueError, IndexError):
                cell = row[col] if col < len(row) else ""
                raise InvalidKeyError(f"{path}: row {rowno}: non-numeric cell {cell!r}") from None
    return validate_keys(np.array(values, dtype=np.float64))

"""Closed-form operation counts for NN-sort and their reconciliation with
measured counters.

Logarithms are natural.  ``sigma`` is the per-iteration collision rate, ``e``
the mis-ordered fraction of placed keys, ``t`` the completed iterations and
``theta`` the cost of one forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .core import DEFAULT_THETA, ConfigError


@dataclass(frozen=True)
class CostParams:
    n: float = 2
    theta: float = DEFAULT_THETA
    sigma: float = 0.1
    e: float = 0.0
    t: int = 1
    epsilon: int = 3

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise ConfigError(f"sigma must lie in [0, 1), got {self.sigma}")
        if not 0.0 <= self.e <= 1.0:
            raise ConfigError(f"e must lie in [0, 1], got {self.e}")
        if self.t < 1:
            raise ConfigError(f"t must be >= 1, got {self.t}")
        if self.theta < 0:
            raise ConfigError("theta must be non-negative")


def _xlogx(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x)


def t_best(n: float, theta: float = DEFAULT_THETA) -> float:
    if n <= 0:
        return 0.0
    if n == 1:
        return 1.0
    return theta * n + n


def coeffs_general(p: CostParams) -> tuple[float, float]:
    """Return ``(C1, C2)`` with ``T_g(n) = C1*n + C2*n*log(n)``."""
    s, e, t, theta = p.sigma, p.e, p.t, p.theta
    if s >= 1.0:
        raise ConfigError("sigma must be < 1")
    c1 = ((1 - s) + (1 - s ** (t - 1)) * (theta + 1)) / (1 - s)
    c1 += sum(s ** i + (1 - e) * (s ** (i - 1) - s ** i) for i in range(1, t + 1))
    c1 += _xlogx(s ** t)
    c2 = s ** t + e * (s ** t + s ** (t - 1))
    return float(c1), float(c2)


def t_general(p: CostParams) -> float:
    n = p.n
    if n <= 0:
        return 0.0
    if n == 1:
        return 1.0
    c1, c2 = coeffs_general(p)
    return c1 * n + c2 * n * math.log(n)


def t_worst(n: float, theta: float = DEFAULT_THETA, epsilon: int = 3) -> float:
    if n <= 0:
        return 0.0
    if n == 1:
        return 1.0
    return theta * epsilon * n + 2 * n * math.log(n)


def break_even_n(p: CostParams) -> float:
    """Smallest n past which ``t_general`` beats ``n*log(n)``; ``inf`` when C2 >= 1."""
    c1, c2 = coeffs_general(p)
    if c2 >= 1.0:
        return math.inf
    x = c1 / (1.0 - c2)
    return math.exp(x) if x < 709.0 else math.inf


def beats_comparison_sort(p: CostParams) -> bool:
    return t_general(p) < p.n * math.log(p.n)


def params_from_runset(rs, theta: float = DEFAULT_THETA, epsilon: int = 3) -> CostParams:
    """Estimate cost-model parameters from a finished sort.

    sigma is the geometric mean of the per-iteration collision rates and e
    the mean out-of-order rate.
    """
    ms = rs.metrics
    if not ms:
        return CostParams(n=rs.n, theta=theta, sigma=0.0, e=0.0, t=1, epsilon=epsilon)
    sigmas = [m.sigma for m in ms]
    if min(sigmas) == 0.0:
        sigma = 0.0
    else:
        sigma = math.exp(sum(math.log(x) for x in sigmas) / len(sigmas))
    sigma = min(sigma, 1.0 - 1e-12)
    e = sum(m.out_of_order_rate for m in ms) / len(ms)
    return CostParams(n=rs.n, theta=theta, sigma=sigma, e=e, t=len(ms), epsilon=epsilon)


def reconcile(rs, p: CostParams | None = None, theta: float = DEFAULT_THETA,
              epsilon: int = 3) -> dict:
    """Compare measured operations with the cost-model predictions."""
    if p is None:
        p = params_from_runset(rs, theta, epsilon)
    p = replace(p, n=rs.n)
    measured = rs.counters.total(p.theta)
    c1, c2 = coeffs_general(p)
    predicted = t_general(p)
    best = t_best(rs.n, p.theta)
    worst = t_worst(rs.n, p.theta, p.epsilon)
    return {
        "n": rs.n,
        "theta": p.theta,
        "sigma": p.sigma,
        "e": p.e,
        "t": p.t,
        "epsilon": p.epsilon,
        "C1": c1,
        "C2": c2,
        "break_even_n": break_even_n(p),
        "measured_ops": measured,
        "predicted_general": predicted,
        "predicted_best": best,
        "predicted_worst": worst,
        "ratio_general": measured / predicted if predicted else math.nan,
        "ratio_best": measured / best if best else math.nan,
        "ratio_worst": measured / worst if worst else math.nan,
    }

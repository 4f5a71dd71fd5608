"""Position models: a small rectifier MLP trained with Huber loss, plus the
synthetic predictors used to drive best/worst-case behaviour.

Every predictor maps a key to a normalized rank in ``[0, 1]``.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigError, OpCounters, normalize, validate_keys

LAYER_DIMS = (1, 32, 8, 4, 1)
MAGIC = b"NNS1"


class TrainingError(ValueError):
    pass


class ModelFileError(ValueError):
    pass


# --- predictors --------------------------------------------------------------

class MlpModel:
    """1-32-8-4-1 fully connected regression network.

    Parameters live in one flat float64 buffer; ``weights[k]`` (fan_in x
    fan_out) and ``biases[k]`` are views into it, which keeps optimizer
    updates to a handful of vector operations.
    """

    def __init__(self, params: np.ndarray, norm_lo: float, norm_hi: float, dims=LAYER_DIMS):
        self.dims = tuple(int(d) for d in dims)
        if self.dims != LAYER_DIMS:
            raise ConfigError(f"layer widths must be {LAYER_DIMS}, got {self.dims}")
        if params.shape != (param_count(self.dims),):
            raise ConfigError("parameter vector has the wrong length")
        if not np.all(np.isfinite(params)):
            raise ConfigError("model parameters must be finite")
        if not norm_lo < norm_hi:
            raise ConfigError("normalization bounds need lo < hi")
        self.params = np.ascontiguousarray(params, dtype=np.float64)
        self.norm_lo = float(norm_lo)
        self.norm_hi = float(norm_hi)
        self.weights, self.biases = _views(self.params, self.dims)

    def __reduce__(self):
        # weights/biases are views into params; rebuild them after unpickling
        return (MlpModel, (self.params.copy(), self.norm_lo, self.norm_hi, self.dims))

    @property
    def n_params(self) -> int:
        return self.params.size

    def raw_output(self, u: np.ndarray) -> np.ndarray:
        """Network output for normalized inputs ``u`` (no clamping)."""
        h = u.reshape(-1, 1)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                np.maximum(h, 0.0, out=h)
        return h[:, 0]

    def predict(self, keys) -> np.ndarray:
        u = normalize(np.atleast_1d(np.asarray(keys, dtype=np.float64)), self.norm_lo, self.norm_hi)
        return np.clip(self.raw_output(u), 0.0, 1.0)

    def __eq__(self, other):
        return (isinstance(other, MlpModel)
                and self.dims == other.dims
                and np.array_equal(self.params, other.params)
                and self.norm_lo == other.norm_lo
                and self.norm_hi == other.norm_hi)

    def __repr__(self):
        return f"MlpModel(dims={self.dims}, norm=[{self.norm_lo}, {self.norm_hi}])"


@dataclass(frozen=True)
class OracleRank:
    """Exact rank lookup over a sorted reference sample."""

    sorted_keys: np.ndarray

    @classmethod
    def from_keys(cls, keys) -> "OracleRank":
        keys = validate_keys(keys)
        if keys.size == 0:
            raise ConfigError("OracleRank needs at least one key")
        return cls(np.sort(keys))

    def predict(self, keys) -> np.ndarray:
        keys = np.atleast_1d(np.asarray(keys, dtype=np.float64))
        n = self.sorted_keys.size
        if n == 1:
            return np.zeros(keys.shape)
        rank = np.searchsorted(self.sorted_keys, keys, side="left")
        return np.clip(rank / (n - 1), 0.0, 1.0)


@dataclass(frozen=True)
class Constant:
    """Maps every key to the same output; forces a collision on every key but one."""

    c: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ConfigError(f"constant output must lie in [0, 1], got {self.c}")

    def predict(self, keys) -> np.ndarray:
        return np.full(np.atleast_1d(keys).shape, float(self.c))


@dataclass(frozen=True)
class RandomPredictor:
    """Adversarial predictor: a seeded hash of the key bits, uniform on [0, 1).

    Deterministic per key, with no relation to the key order.
    """

    seed: int = 0

    def predict(self, keys) -> np.ndarray:
        bits = np.atleast_1d(np.asarray(keys, dtype=np.float64)).view(np.uint64)
        from .datagen import splitmix64

        h = splitmix64(bits ^ np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF))
        return (h >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def forward(p, x: float, counters: OpCounters | None = None) -> float:
    """Single-key forward pass, charging one model invocation."""
    if counters is not None:
        counters.model_invocations += 1
    return float(p.predict(np.array([x], dtype=np.float64))[0])


def predict_many(p, keys: np.ndarray, counters: OpCounters | None = None) -> np.ndarray:
    """Vectorized :func:`forward`; charges one invocation per key."""
    if counters is not None:
        counters.model_invocations += int(len(keys))
    if len(keys) == 0:
        return np.zeros(0)
    return p.predict(keys)


# --- loss --------------------------------------------------------------------

def huber_loss(pred, label, delta: float = 1.0):
    err = np.abs(np.asarray(pred, dtype=np.float64) - label)
    out = np.where(err <= delta, 0.5 * err * err, delta * err - 0.5 * delta * delta)
    return float(out) if out.ndim == 0 else out


def huber_grad(pred, label, delta: float = 1.0):
    """d loss / d pred; magnitude never exceeds ``delta``."""
    err = np.asarray(pred, dtype=np.float64) - label
    out = np.clip(err, -delta, delta)
    return float(out) if out.ndim == 0 else out


# --- training ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    delta: float = 1.0
    epochs: int = 500
    batch_size: int = 256
    rho: float = 0.95
    eps_opt: float = 1e-6
    rng_seed: int = 0
    learning_rate: float = 0.1

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0.0 < self.rho < 1.0 or not self.eps_opt > 0:
            raise ConfigError("need 0 < rho < 1 and eps_opt > 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class TrainResult:
    model: MlpModel
    loss_history: list
    elapsed: list  # seconds since training start, per epoch


def param_count(dims=LAYER_DIMS) -> int:
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


def _views(flat: np.ndarray, dims):
    weights, biases = [], []
    off = 0
    for a, b in zip(dims[:-1], dims[1:]):
        weights.append(flat[off:off + a * b].reshape(a, b))
        off += a * b
        biases.append(flat[off:off + b])
        off += b
    return weights, biases


def init_params(rng: np.random.Generator, dims=LAYER_DIMS) -> np.ndarray:
    flat = np.zeros(param_count(dims))
    weights, _ = _views(flat, dims)
    for w in weights:
        fan_in, fan_out = w.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return flat


def rank_labels(keys: np.ndarray) -> np.ndarray:
    """rank/(N-1) of each key; duplicates share their first-occurrence rank."""
    s = np.sort(keys)
    return np.searchsorted(s, keys, side="left") / (len(keys) - 1)


def loss_and_grad(model: MlpModel, u: np.ndarray, y: np.ndarray, delta: float, grad_out: np.ndarray):
    """Mean Huber loss over a batch; writes the parameter gradient into ``grad_out``.

    Unrolled for the fixed 1-32-8-4-1 shape: small-array numpy calls are
    overhead bound, so the op count per step is kept low.
    """
    (w1, w2, w3, w4), (b1, b2, b3, b4) = model.weights, model.biases
    (g1, g2, g3, g4), (gb1, gb2, gb3, gb4) = _views(grad_out, model.dims)
    n = len(u)
    ones = np.ones(n)

    z1 = np.multiply.outer(u, w1[0])
    z1 += b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2
    z2 += b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ w3
    z3 += b3
    a3 = np.maximum(z3, 0.0)
    err = a3 @ w4[:, 0]
    err += b4[0] - y

    d = np.clip(err, -delta, delta)  # huber_grad
    # with c = clip(err), c*(err - c/2) equals both branches of the Huber loss
    loss = float(d @ (err - 0.5 * d)) / n
    d *= 1.0 / n

    g4[:, 0] = d @ a3
    gb4[0] = d.sum()
    d = np.multiply.outer(d, w4[:, 0])
    d *= z3 > 0
    g3[...] = a2.T @ d
    gb3[...] = ones @ d
    d = d @ w3.T
    d *= z2 > 0
    g2[...] = a1.T @ d
    gb2[...] = ones @ d
    d = d @ w2.T
    d *= z1 > 0
    g1[0] = u @ d
    gb1[...] = ones @ d
    return loss


def train(keys, cfg: TrainConfig = TrainConfig(), progress=None) -> TrainResult:
    """Fit an :class:`MlpModel` mapping keys to their normalized sorted rank.

    Mini-batch backpropagation with Adadelta updates.  Deterministic for a
    given ``(keys, cfg)``.  ``progress`` is called as ``progress(epoch, loss)``.
    """
    keys = validate_keys(keys)
    if keys.size == 0 or np.unique(keys).size < 2:
        raise TrainingError("training needs at least two distinct keys")
    if cfg.batch_size > keys.size:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds training set size {keys.size}")

    lo, hi = float(keys.min()), float(keys.max())
    u = normalize(keys, lo, hi)
    y = rank_labels(keys)

    rng = np.random.default_rng(cfg.rng_seed)
    model = MlpModel(init_params(rng), lo, hi)
    theta = model.params
    grad = np.zeros_like(theta)
    acc_g = np.zeros_like(theta)
    acc_dx = np.zeros_like(theta)
    rho, eps, lr = cfg.rho, cfg.eps_opt, cfg.learning_rate

    history, elapsed = [], []
    start = time.perf_counter()
    n, bs = keys.size, cfg.batch_size
    tmp = np.empty_like(theta)
    step = np.empty_like(theta)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        u_ep, y_ep = u[order], y[order]
        total = 0.0
        for s in range(0, n, bs):
            total += loss_and_grad(model, u_ep[s:s + bs], y_ep[s:s + bs], cfg.delta, grad) * len(u_ep[s:s + bs])
            # Adadelta: running averages of squared gradients and squared updates
            np.multiply(grad, grad, out=tmp)
            acc_g *= rho
            acc_g += (1.0 - rho) * tmp
            np.add(acc_dx, eps, out=step)
            np.add(acc_g, eps, out=tmp)
            step /= tmp
            np.sqrt(step, out=step)
            step *= grad
            np.multiply(step, step, out=tmp)
            acc_dx *= rho
            acc_dx += (1.0 - rho) * tmp
            step *= lr
            theta -= step
        history.append(total / n)
        elapsed.append(time.perf_counter() - start)
        if progress is not None:
            progress(epoch, history[-1])
    if not np.all(np.isfinite(theta)):
        raise TrainingError("training diverged (non-finite parameters)")
    return TrainResult(model, history, elapsed)


# --- persistence -------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    """Binary layout: magic, dim count, dims (u32), params (f64 LE), lo, hi."""
    buf = bytearray(MAGIC)
    buf += struct.pack("<I", len(model.dims))
    buf += struct.pack(f"<{len(model.dims)}I", *model.dims)
    buf += model.params.astype("<f8").tobytes()
    buf += struct.pack("<2d", model.norm_lo, model.norm_hi)
    Path(path).write_bytes(bytes(buf))


def load_model(path) -> MlpModel:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ModelFileError(f"{path}: truncated model file")
    if raw[:3] != MAGIC[:3]:
        raise ModelFileError(f"{path}: not a model file (bad magic {raw[:4]!r})")
    if raw[:4] != MAGIC:
        raise ModelFileError(f"{path}: unsupported model version {raw[3:4]!r}")
    (ndims,) = struct.unpack_from("<I", raw, 4)
    if ndims != len(LAYER_DIMS):
        raise ModelFileError(f"{path}: expected {len(LAYER_DIMS)} layer dims, found {ndims}")
    off = 8
    if len(raw) < off + 4 * ndims:
        raise ModelFileError(f"{path}: truncated model file")
    dims = struct.unpack_from(f"<{ndims}I", raw, off)
    off += 4 * ndims
    if tuple(dims) != LAYER_DIMS:
        raise ModelFileError(f"{path}: unsupported layer widths {dims}")
    count = param_count(dims)
    expected = off + 8 * count + 16
    if len(raw) != expected:
        raise ModelFileError(f"{path}: expected {expected} bytes, found {len(raw)}")
    params = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(np.float64)
    lo, hi = struct.unpack_from("<2d", raw, off + 8 * count)
    try:
        return MlpModel(params, lo, hi, dims)
    except ConfigError as exc:
        raise ModelFileError(f"{path}: {exc}") from None

"""Shallow fully connected regression head mapping feature pairs to SUR values.

The network is a stack of affine->ReLU->dropout hidden layers and a linear
scalar output, trained with Adam on the mean absolute error.  Everything is
implemented directly on numpy arrays: weights live in float64 so the
analytic gradients can be checked against finite differences, while feature
vectors are stored in float32 and promoted on entry.  Training is a
single-threaded deterministic loop; given a seed, initialization, batch
shuffling, and dropout masks are all fixed streams.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, TrainingError

_MODEL_MAGIC = b"SURMLP01"
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 30_144
    hidden: tuple[int, ...] = (512, 256, 128)
    dropout: float = 0.25
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 30
    batch: int = 16
    seed: int = 0
    patch_count: int = 5

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim <= 0 or any(h <= 0 for h in self.hidden):
            raise DomainError("layer dimensions must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise DomainError("dropout must lie in [0, 1)")
        if self.lr <= 0:
            raise DomainError("learning rate must be positive")
        if self.batch <= 0 or self.epochs < 0:
            raise DomainError("batch must be positive and epochs nonnegative")
        if self.patch_count <= 0:
            raise DomainError("patch_count must be positive")

    def to_json(self) -> dict:
        return {
            "input_dim": self.input_dim, "hidden": list(self.hidden),
            "dropout": self.dropout, "lr": self.lr, "beta1": self.beta1,
            "beta2": self.beta2, "epochs": self.epochs, "batch": self.batch,
            "seed": self.seed, "patch_count": self.patch_count,
        }

    @staticmethod
    def from_json(obj: dict) -> "MlpConfig":
        return MlpConfig(input_dim=int(obj["input_dim"]),
                         hidden=tuple(obj["hidden"]),
                         dropout=float(obj["dropout"]), lr=float(obj["lr"]),
                         beta1=float(obj["beta1"]), beta2=float(obj["beta2"]),
                         epochs=int(obj["epochs"]), batch=int(obj["batch"]),
                         seed=int(obj["seed"]),
                         patch_count=int(obj.get("patch_count", 5)))


@dataclass
class MlpModel:
    weights: list[np.ndarray]   # per layer, shape (fan_out, fan_in)
    biases: list[np.ndarray]    # per layer, shape (fan_out,)
    config: MlpConfig
    best_validation_loss: float = float("nan")

    def layer_dims(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.weights]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights],
                        [b.copy() for b in self.biases],
                        self.config, self.best_validation_loss)


@dataclass(frozen=True)
class TrainRecord:
    """One (reference, distorted) feature pair with its SUR target."""

    ref_features: np.ndarray
    dist_features: np.ndarray
    target: float
    image_id: int = 0
    level: int = 0
    patch_id: int = 0

    def __post_init__(self):
        ref = np.asarray(self.ref_features, dtype=np.float32)
        dist = np.asarray(self.dist_features, dtype=np.float32)
        if ref.shape != dist.shape or ref.ndim != 1:
            raise DomainError("feature vectors must be 1-D and of equal length")
        if not (0.0 <= self.target <= 1.0):
            raise DomainError(f"SUR target must lie in [0, 1], got {self.target}")
        object.__setattr__(self, "ref_features", ref)
        object.__setattr__(self, "dist_features", dist)


def assemble_input(ref_features, dist_features) -> np.ndarray:
    """Concatenate [f_ref, f_dist, f_ref - f_dist] into one 3d-length vector."""
    ref = np.asarray(ref_features, dtype=np.float32).ravel()
    dist = np.asarray(dist_features, dtype=np.float32).ravel()
    if ref.shape != dist.shape:
        raise DomainError(f"feature length mismatch: {ref.size} vs {dist.size}")
    return np.concatenate([ref, dist, ref - dist])


def init_model(cfg: MlpConfig) -> MlpModel:
    """He-uniform initialization, seeded; biases start at zero."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    dims = [cfg.input_dim, *cfg.hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, config=cfg)


def _forward_batch(m: MlpModel, x: np.ndarray, training: bool,
                   rng: np.random.Generator | None, keep_cache: bool):
    """Batched forward pass; returns (outputs (B,), cache for backprop)."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    if h.shape[1] != m.config.input_dim:
        raise DomainError(f"input length {h.shape[1]} != configured {m.config.input_dim}")
    p = m.config.dropout
    cache = {"acts": [h], "masks": []} if keep_cache else None
    n_hidden = len(m.weights) - 1
    for li in range(n_hidden):
        a = h @ m.weights[li].T + m.biases[li]
        h = np.maximum(a, 0.0)
        if training and p > 0.0:
            if rng is None:
                raise DomainError("training-mode forward needs a random generator")
            mask = (rng.random(h.shape) >= p) / (1.0 - p)  # inverted scaling
            h = h * mask
        else:
            mask = None
        if keep_cache:
            cache["acts"].append(h)
            cache["masks"].append(mask)
    out = h @ m.weights[-1].T + m.biases[-1]
    return out[:, 0], cache


def forward(m: MlpModel, x, training: bool = False,
            rng: np.random.Generator | None = None) -> float:
    """Single-input forward pass to a scalar SUR prediction (unclamped).

    Dropout is applied only when ``training`` is true, with inverted scaling
    so inference needs no rescale.
    """
    out, _ = _forward_batch(m, np.asarray(x), training, rng, keep_cache=False)
    return float(out[0])


def _l1_grads(m: MlpModel, x: np.ndarray, targets: np.ndarray,
              rng: np.random.Generator | None):
    """Mean-L1 loss and its gradients for one batch (training mode)."""
    out, cache = _forward_batch(m, x, training=True, rng=rng, keep_cache=True)
    resid = out - targets
    loss = float(np.mean(np.abs(resid)))
    # subgradient at zero residual pinned to 0
    dout = np.sign(resid)[:, None] / resid.size

    grads_w = [None] * len(m.weights)
    grads_b = [None] * len(m.weights)
    delta = dout
    grads_w[-1] = delta.T @ cache["acts"][-1]
    grads_b[-1] = delta.sum(axis=0)
    for li in range(len(m.weights) - 2, -1, -1):
        delta = delta @ m.weights[li + 1]
        mask = cache["masks"][li]
        if mask is not None:
            delta = delta * mask
        delta = delta * (cache["acts"][li + 1] > 0.0)
        grads_w[li] = delta.T @ cache["acts"][li]
        grads_b[li] = delta.sum(axis=0)
    return loss, grads_w, grads_b


def l1_loss(m: MlpModel, x: np.ndarray, targets: np.ndarray) -> float:
    """Mean absolute error in inference mode (no dropout)."""
    out, _ = _forward_batch(m, x, training=False, rng=None, keep_cache=False)
    return float(np.mean(np.abs(out - np.asarray(targets, dtype=float))))


def _stack_records(records, cfg: MlpConfig):
    xs = np.stack([assemble_input(r.ref_features, r.dist_features) for r in records])
    if xs.shape[1] != cfg.input_dim:
        raise DomainError(
            f"records assemble to dimension {xs.shape[1]}, config says {cfg.input_dim}")
    ys = np.array([r.target for r in records], dtype=np.float64)
    return xs, ys


def train(records, val, cfg: MlpConfig) -> MlpModel:
    """Adam training on mean L1 loss, keeping the best-validation-epoch weights.

    Validation L1 is evaluated after every epoch (and once at
    initialization, which is what a zero-epoch run returns).  Raises
    TrainingError with the epoch index if the loss turns non-finite.
    """
    records = list(records)
    val = list(val)
    if not records or not val:
        raise DomainError("training needs nonempty train and validation sets")
    x_train, y_train = _stack_records(records, cfg)
    x_val, y_val = _stack_records(val, cfg)

    model = init_model(cfg)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    dropout_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2,)))

    best = model.copy()
    best_val = l1_loss(model, x_val, y_val)

    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    t = 0

    n = x_train.shape[0]
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch):
            idx = order[start:start + cfg.batch]
            loss, gw, gb = _l1_grads(model, x_train[idx], y_train[idx], dropout_rng)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            t += 1
            c1 = 1.0 - cfg.beta1 ** t
            c2 = 1.0 - cfg.beta2 ** t
            for li in range(len(model.weights)):
                for g, mm, vv, param in ((gw[li], m_w[li], v_w[li], model.weights[li]),
                                         (gb[li], m_b[li], v_b[li], model.biases[li])):
                    mm *= cfg.beta1
                    mm += (1.0 - cfg.beta1) * g
                    vv *= cfg.beta2
                    vv += (1.0 - cfg.beta2) * g * g
                    param -= cfg.lr * (mm / c1) / (np.sqrt(vv / c2) + _ADAM_EPS)
        val_loss = l1_loss(model, x_val, y_val)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            best = model.copy()

    best.best_validation_loss = best_val
    return best


def predict_image_level(m: MlpModel, patch_inputs) -> float:
    """Average the per-patch predictions and clamp into [0, 1].

    ``patch_inputs`` holds exactly the configured number of assembled input
    vectors (one per patch of the same image/level pair).
    """
    x = np.asarray(patch_inputs)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] != m.config.patch_count:
        raise DomainError(
            f"expected {m.config.patch_count} patches, got {x.shape[0]}")
    out, _ = _forward_batch(m, x, training=False, rng=None, keep_cache=False)
    return float(np.clip(np.mean(out), 0.0, 1.0))


# ---------------------------------------------------------------------------
# Model file format: magic, u32 layer count, per-layer u32 rows/cols, then
# row-major f32 weights followed by the f32 bias per layer, then the config
# echoed as a length-prefixed JSON blob.  All integers and floats little-endian.


def save_model(m: MlpModel, path) -> None:
    blob = json.dumps(m.config.to_json(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<I", len(m.weights)))
        for w in m.weights:
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in zip(m.weights, m.biases):
            fh.write(w.astype("<f4").tobytes(order="C"))
            fh.write(b.astype("<f4").tobytes(order="C"))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def load_model(path) -> MlpModel:
    from .errors import FormatError

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MODEL_MAGIC:
        raise FormatError(f"bad model magic {raw[:8]!r}")
    off = 8

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise FormatError("truncated model file")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    (n_layers,) = take("<I")
    shapes = [take("<II") for _ in range(n_layers)]
    weights, biases = [], []
    for rows, cols in shapes:
        count = rows * cols
        if off + 4 * (count + rows) > len(raw):
            raise FormatError("truncated model payload")
        w = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(rows, cols)
        off += 4 * count
        b = np.frombuffer(raw, dtype="<f4", count=rows, offset=off)
        off += 4 * rows
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    (blob_len,) = take("<I")
    if off + blob_len > len(raw):
        raise FormatError("truncated model config blob")
    cfg = MlpConfig.from_json(json.loads(raw[off:off + blob_len].decode("utf-8")))
    off += blob_len
    if off != len(raw):
        raise FormatError("trailing bytes after model config blob")

    dims = [cfg.input_dim, *cfg.hidden, 1]
    expect = list(zip(dims[1:], dims[:-1]))
    if [tuple(s) for s in shapes] != expect:
        raise FormatError(f"layer shapes {shapes} do not chain with config {expect}")
    return MlpModel(weights=weights, biases=biases, config=cfg)

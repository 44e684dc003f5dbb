"""The trainable classification head: multi-region 1-D convolution over
token embeddings, ReLU, max-over-time pooling, one hidden dense layer,
and a per-tag sigmoid output, with hand-rolled backprop, an adaptive-
moment optimizer, and binary model serialization.

Parameters are stored in the model's dtype (float32 by default, matching
the file format); all forward/backward arithmetic runs in float64.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import EmbeddingMatrix
from .errors import DataError, FormatError, MinimumLengthError, NumericError

MODEL_MAGIC = b"TGBH"
MODEL_VERSION = 1

SCORE_EPS = 1e-7  # scores are clamped into [SCORE_EPS, 1 - SCORE_EPS]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class HeadConfig:
    """Shapes and seed of the head; region sizes are kept ascending."""

    embed_dim: int
    num_tags: int
    region_sizes: tuple[int, ...] = (2, 3, 4)
    filters_per_region: int = 50
    hidden_units: int = 256
    seed: int = 0

    def __post_init__(self):
        regions = tuple(sorted(int(r) for r in self.region_sizes))
        object.__setattr__(self, "region_sizes", regions)
        if self.embed_dim < 1 or self.num_tags < 1 or self.filters_per_region < 1 or self.hidden_units < 1:
            raise DataError(f"all head dimensions must be >= 1: {self}")
        if not regions or any(r < 1 for r in regions):
            raise DataError(f"region sizes must be positive: {regions}")
        if len(set(regions)) != len(regions):
            raise DataError(f"region sizes must be distinct: {regions}")
        if self.seed < 0:
            raise DataError(f"seed must be unsigned, got {self.seed}")

    @property
    def min_tokens(self) -> int:
        """Shortest valid_len the head accepts (largest region size)."""
        return max(self.region_sizes)

    @property
    def feature_size(self) -> int:
        return len(self.region_sizes) * self.filters_per_region


@dataclass
class HeadModel:
    """All trainable parameters, keyed by the config's shapes."""

    config: HeadConfig
    conv_w: dict[int, np.ndarray]  # region -> (region, embed_dim, filters)
    conv_b: dict[int, np.ndarray]  # region -> (filters,)
    dense_w: np.ndarray  # (regions*filters, hidden)
    dense_b: np.ndarray  # (hidden,)
    out_w: np.ndarray  # (hidden, tags)
    out_b: np.ndarray  # (tags,)

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """(name, array) pairs in declaration order: conv weights+biases
        per region ascending, dense, then output."""
        params: list[tuple[str, np.ndarray]] = []
        for r in self.config.region_sizes:
            params.append((f"conv{r}_w", self.conv_w[r]))
            params.append((f"conv{r}_b", self.conv_b[r]))
        params.append(("dense_w", self.dense_w))
        params.append(("dense_b", self.dense_b))
        params.append(("out_w", self.out_w))
        params.append(("out_b", self.out_b))
        return params

    def set_param(self, name: str, value: np.ndarray) -> None:
        if name.startswith("conv"):
            region = int(name[4:].split("_")[0])
            if name.endswith("_w"):
                self.conv_w[region] = value
            else:
                self.conv_b[region] = value
        else:
            setattr(self, name, value)

    def copy(self) -> "HeadModel":
        return HeadModel(
            config=self.config,
            conv_w={r: w.copy() for r, w in self.conv_w.items()},
            conv_b={r: b.copy() for r, b in self.conv_b.items()},
            dense_w=self.dense_w.copy(),
            dense_b=self.dense_b.copy(),
            out_w=self.out_w.copy(),
            out_b=self.out_b.copy(),
        )

    def astype(self, dtype) -> "HeadModel":
        return HeadModel(
            config=self.config,
            conv_w={r: w.astype(dtype) for r, w in self.conv_w.items()},
            conv_b={r: b.astype(dtype) for r, b in self.conv_b.items()},
            dense_w=self.dense_w.astype(dtype),
            dense_b=self.dense_b.astype(dtype),
            out_w=self.out_w.astype(dtype),
            out_b=self.out_b.astype(dtype),
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for _, a in self.parameters())

    def num_params(self) -> int:
        return sum(a.size for _, a in self.parameters())


def init_model(config: HeadConfig, dtype=np.float32) -> HeadModel:
    """Seeded initialization: weights uniform in +-sqrt(6/(fan_in+fan_out))
    per layer, biases zero. Deterministic per (config, dtype)."""
    rng = np.random.default_rng(config.seed)

    def uniform(shape, fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    d, f, h, n = config.embed_dim, config.filters_per_region, config.hidden_units, config.num_tags
    conv_w = {}
    conv_b = {}
    for r in config.region_sizes:
        conv_w[r] = uniform((r, d, f), fan_in=r * d, fan_out=f)
        conv_b[r] = np.zeros(f, dtype=dtype)
    dense_w = uniform((config.feature_size, h), fan_in=config.feature_size, fan_out=h)
    dense_b = np.zeros(h, dtype=dtype)
    out_w = uniform((h, n), fan_in=h, fan_out=n)
    out_b = np.zeros(n, dtype=dtype)
    return HeadModel(config=config, conv_w=conv_w, conv_b=conv_b,
                     dense_w=dense_w, dense_b=dense_b, out_w=out_w, out_b=out_b)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _windows(x: np.ndarray, region: int) -> np.ndarray:
    """All length-``region`` token windows, flattened: (T, region*dim)."""
    t = x.shape[0] - region + 1
    view = np.lib.stride_tricks.sliding_window_view(x, (region, x.shape[1]))
    return view.reshape(t, region * x.shape[1])


def _forward_full(model: HeadModel, x: EmbeddingMatrix):
    """Forward pass over the valid rows only; returns (cache, sigmoid scores).

    Slicing to ``valid_len`` first makes padded and unpadded inputs go
    through bit-identical arithmetic.
    """
    cfg = model.config
    if x.cols != cfg.embed_dim:
        raise DataError(f"{x.object_id!r}: embedding dim {x.cols} != model dim {cfg.embed_dim}")
    if x.valid_len < cfg.min_tokens:
        raise MinimumLengthError(
            f"{x.object_id!r}: {x.valid_len} valid tokens < largest region size {cfg.min_tokens}"
        )
    xv = np.asarray(x.values[: x.valid_len], dtype=np.float64)
    f = cfg.filters_per_region
    region_cache = []
    feat = np.empty(cfg.feature_size, dtype=np.float64)
    for i, r in enumerate(cfg.region_sizes):
        w = model.conv_w[r].astype(np.float64).reshape(r * cfg.embed_dim, f)
        windows = _windows(xv, r)
        pre = windows @ w + model.conv_b[r].astype(np.float64)  # (T, F)
        act = np.maximum(pre, 0.0)
        argmax = np.argmax(act, axis=0)  # first index on ties
        pooled = act[argmax, np.arange(f)]
        feat[i * f : (i + 1) * f] = pooled
        region_cache.append((r, windows, pre, argmax))
    dense_w = model.dense_w.astype(np.float64)
    pre_h = feat @ dense_w + model.dense_b.astype(np.float64)
    hidden = np.maximum(pre_h, 0.0)
    out_w = model.out_w.astype(np.float64)
    logits = hidden @ out_w + model.out_b.astype(np.float64)
    sig = _sigmoid(logits)
    cache = {
        "regions": region_cache,
        "feat": feat,
        "pre_h": pre_h,
        "hidden": hidden,
        "dense_w64": dense_w,
        "out_w64": out_w,
        "sig": sig,
    }
    return cache, sig


def forward(model: HeadModel, x: EmbeddingMatrix) -> np.ndarray:
    """Score every vocabulary tag, each strictly inside (0, 1).

    Padding rows beyond ``valid_len`` never influence the result.
    """
    _, sig = _forward_full(model, x)
    return np.clip(sig, SCORE_EPS, 1.0 - SCORE_EPS)


def loss_bce(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean per-tag binary cross-entropy with scores clamped to
    [1e-7, 1 - 1e-7]."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape:
        raise DataError(f"scores shape {s.shape} != labels shape {y.shape}")
    s = np.clip(s, SCORE_EPS, 1.0 - SCORE_EPS)
    return float(-np.mean(y * np.log(s) + (1.0 - y) * np.log1p(-s)))


def backward(model: HeadModel, x: EmbeddingMatrix, labels: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of ``loss_bce(forward(x), labels)`` for every
    parameter, as float64 arrays keyed like :meth:`HeadModel.parameters`.

    Max-over-time pooling routes gradient to the argmax position (first
    index on ties); ReLU passes gradient only where pre-activations are
    strictly positive.
    """
    cfg = model.config
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (cfg.num_tags,):
        raise DataError(f"labels shape {y.shape} != ({cfg.num_tags},)")
    cache, sig = _forward_full(model, x)
    f = cfg.filters_per_region

    dz = (sig - y) / cfg.num_tags  # d loss / d logits
    grads: dict[str, np.ndarray] = {}
    grads["out_w"] = np.outer(cache["hidden"], dz)
    grads["out_b"] = dz
    dh = cache["out_w64"] @ dz
    dpre_h = dh * (cache["pre_h"] > 0.0)
    grads["dense_w"] = np.outer(cache["feat"], dpre_h)
    grads["dense_b"] = dpre_h
    dfeat = cache["dense_w64"] @ dpre_h
    for i, (r, windows, pre, argmax) in enumerate(cache["regions"]):
        dpool = dfeat[i * f : (i + 1) * f]
        cols = np.arange(f)
        gsel = dpool * (pre[argmax, cols] > 0.0)
        grads[f"conv{r}_b"] = gsel
        # windows[argmax]: (F, region*dim); scale rows, transpose back.
        gw = (windows[argmax] * gsel[:, None]).T
        grads[f"conv{r}_w"] = gw.reshape(r, cfg.embed_dim, f)
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators, float64, one slot per parameter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_adam(model: HeadModel) -> AdamState:
    return AdamState(
        m={name: np.zeros(a.shape, dtype=np.float64) for name, a in model.parameters()},
        v={name: np.zeros(a.shape, dtype=np.float64) for name, a in model.parameters()},
    )


def adam_step(
    model: HeadModel,
    grads: dict[str, np.ndarray],
    state: AdamState,
    t: int,
    lr: float,
) -> tuple[HeadModel, AdamState]:
    """One adaptive-moment update (beta1=0.9, beta2=0.999, eps=1e-8) with
    bias correction by step index ``t`` (1-based). Mutates ``model`` and
    ``state`` in place and returns them."""
    if t < 1:
        raise DataError(f"step index must be >= 1, got {t}")
    names = [name for name, _ in model.parameters()]
    if set(grads) != set(names):
        raise DataError(f"gradient keys {sorted(grads)} != parameter keys {sorted(names)}")
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for name, param in model.parameters():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != param.shape:
            raise DataError(f"gradient {name} shape {g.shape} != parameter shape {param.shape}")
        state.m[name] = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        state.v[name] = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        updated = param.astype(np.float64) - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        model.set_param(name, updated.astype(param.dtype))
    return model, state


@dataclass(frozen=True)
class TrainParams:
    """Training hyperparameters; the shuffle seed defaults to the model's."""

    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    patience: int = 10
    k: int = 10
    val_tau: float = 0.5
    shuffle_seed: int | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0 or self.patience < 1 or self.k < 1:
            raise DataError(f"invalid training parameters: {self}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_f1: float | None


def train(
    model: HeadModel,
    train_set: Sequence[tuple[EmbeddingMatrix, np.ndarray]],
    val_set: Sequence[tuple[EmbeddingMatrix, np.ndarray]] | None,
    params: TrainParams,
) -> tuple[HeadModel, list[EpochStats]]:
    """Mini-batch training with bucketed batches (equal padded length
    within a batch), per-epoch validation F1@K, and early stopping.

    Deterministic for a fixed seed: fixed shuffle order, sequential
    single-threaded gradient accumulation. Returns the best-validation
    model (the final model when no validation set is given) and the
    per-epoch history. Aborts with :class:`NumericError` if any
    parameter becomes non-finite.
    """
    if not train_set:
        raise DataError("training set is empty")
    cfg = model.config
    for x, y in list(train_set) + list(val_set or []):
        if x.cols != cfg.embed_dim:
            raise DataError(f"{x.object_id!r}: embedding dim {x.cols} != model dim {cfg.embed_dim}")
        if len(y) != cfg.num_tags:
            raise DataError(f"{x.object_id!r}: label length {len(y)} != tag count {cfg.num_tags}")
        if x.valid_len < cfg.min_tokens:
            raise MinimumLengthError(
                f"{x.object_id!r}: {x.valid_len} valid tokens < largest region size {cfg.min_tokens}"
            )

    current = model.copy()
    history: list[EpochStats] = []
    if params.epochs == 0:
        return current, history

    rng = np.random.default_rng(cfg.seed if params.shuffle_seed is None else params.shuffle_seed)
    state = init_adam(current)
    step = 0
    best_f1 = -math.inf
    best_model = current.copy()
    epochs_without_improvement = 0

    for epoch in range(1, params.epochs + 1):
        order = rng.permutation(len(train_set))
        # Bucket by padded length, preserving shuffled order inside each
        # bucket; buckets run shortest first.
        buckets: dict[int, list[int]] = {}
        for idx in order:
            buckets.setdefault(train_set[idx][0].rows, []).append(int(idx))
        epoch_loss = 0.0
        for rows in sorted(buckets):
            members = buckets[rows]
            for start in range(0, len(members), params.batch_size):
                batch = members[start : start + params.batch_size]
                acc: dict[str, np.ndarray] | None = None
                for idx in batch:
                    x, y = train_set[idx]
                    grads = backward(current, x, y)
                    epoch_loss += loss_bce(forward(current, x), y)
                    if acc is None:
                        acc = grads
                    else:
                        for name in acc:
                            acc[name] += grads[name]
                assert acc is not None
                for name in acc:
                    acc[name] /= len(batch)
                step += 1
                adam_step(current, acc, state, step, params.lr)
                if not current.all_finite():
                    raise NumericError(
                        f"non-finite parameter after epoch {epoch}, step {step}; aborting training"
                    )
        train_loss = epoch_loss / len(train_set)

        val_f1 = None
        if val_set:
            val_f1 = _validation_f1(current, val_set, params.k, params.val_tau)
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_model = current.copy()
                epochs_without_improvement = 0
            else:
                epochs_without_improvement += 1
        history.append(EpochStats(epoch=epoch, train_loss=train_loss, val_f1=val_f1))
        if val_set and epochs_without_improvement >= params.patience:
            break

    return (best_model if val_set else current), history


def _validation_f1(model: HeadModel, val_set, k: int, tau: float) -> float:
    """Mean F1@K (effective precision denominator) over the validation set."""
    from . import metrics  # deferred: metrics imports this module at top level

    total = 0.0
    for x, y in val_set:
        scores = forward(model, x)
        true_idx = {int(i) for i in np.flatnonzero(np.asarray(y))}
        order = np.argsort(-scores, kind="stable")
        rec_idx = {int(i) for i in order[:k] if scores[i] >= tau}
        recall = metrics.recall_at_k_single(rec_idx, true_idx, k)
        precision = metrics.precision_at_k_single(rec_idx, true_idx, k, mode="effective")
        total += metrics.f1_at_k_single(precision, recall)
    return total / len(val_set)


# --- serialization ----------------------------------------------------------

_MODEL_FIXED = struct.Struct("<4sIII")  # magic | version | embed_dim | region_count
_MODEL_TAIL = struct.Struct("<IIIQ")  # filters | hidden | num_tags | seed
_U32 = struct.Struct("<I")


def save_model(model: HeadModel, path) -> None:
    """Write the model in the little-endian "TGBH" layout; parameter
    tensors are stored as float32 in declaration order."""
    cfg = model.config
    try:
        fh = open(path, "wb")
    except OSError as e:
        raise DataError(f"cannot write model file {path}: {e}") from e
    with fh:
        fh.write(_MODEL_FIXED.pack(MODEL_MAGIC, MODEL_VERSION, cfg.embed_dim, len(cfg.region_sizes)))
        for r in cfg.region_sizes:
            fh.write(_U32.pack(r))
        fh.write(_MODEL_TAIL.pack(cfg.filters_per_region, cfg.hidden_units, cfg.num_tags, cfg.seed))
        for _, param in model.parameters():
            fh.write(np.ascontiguousarray(param, dtype="<f4").tobytes())


def load_model(path) -> HeadModel:
    """Read a "TGBH" model file; the payload size must match the header
    shapes exactly."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    if len(data) < _MODEL_FIXED.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, embed_dim, region_count = _MODEL_FIXED.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    offset = _MODEL_FIXED.size
    if len(data) < offset + region_count * _U32.size + _MODEL_TAIL.size:
        raise FormatError(f"{path}: truncated header (region sizes)")
    regions = []
    for _ in range(region_count):
        (r,) = _U32.unpack_from(data, offset)
        regions.append(r)
        offset += _U32.size
    filters, hidden, num_tags, seed = _MODEL_TAIL.unpack_from(data, offset)
    offset += _MODEL_TAIL.size
    config = HeadConfig(
        embed_dim=embed_dim,
        num_tags=num_tags,
        region_sizes=tuple(regions),
        filters_per_region=filters,
        hidden_units=hidden,
        seed=seed,
    )
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for r in config.region_sizes:
        shapes.append((f"conv{r}_w", (r, embed_dim, filters)))
        shapes.append((f"conv{r}_b", (filters,)))
    shapes.append(("dense_w", (config.feature_size, hidden)))
    shapes.append(("dense_b", (hidden,)))
    shapes.append(("out_w", (hidden, num_tags)))
    shapes.append(("out_b", (num_tags,)))
    expected = sum(int(np.prod(s)) for _, s in shapes) * 4
    payload = data[offset:]
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated record: payload {len(payload)} bytes, header implies {expected}")
    if len(payload) > expected:
        raise FormatError(f"{path}: payload {len(payload)} bytes does not match header shapes ({expected})")
    tensors: dict[str, np.ndarray] = {}
    pos = 0
    for name, shape in shapes:
        size = int(np.prod(shape)) * 4
        tensors[name] = np.frombuffer(payload[pos : pos + size], dtype="<f4").reshape(shape).copy()
        pos += size
    model = HeadModel(
        config=config,
        conv_w={r: tensors[f"conv{r}_w"] for r in config.region_sizes},
        conv_b={r: tensors[f"conv{r}_b"] for r in config.region_sizes},
        dense_w=tensors["dense_w"],
        dense_b=tensors["dense_b"],
        out_w=tensors["out_w"],
        out_b=tensors["out_b"],
    )
    if not model.all_finite():
        raise FormatError(f"{path}: model contains non-finite parameters")
    return model

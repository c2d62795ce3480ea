"""Small fully-connected ReLU network written directly on numpy.

Layout: min-max input scaling, ``hidden_layers`` dense ReLU layers of
``width`` units with inverted dropout after each, and a dense ReLU output
layer. Weight matrices are stored ``(out, in)`` so a layer computes
``relu(x @ W.T + b)`` on row-major batches.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError, ModelLoadError, TrainingError

N_FEATURES = 7
N_OUTPUTS = 2
MODEL_FORMAT = "phaseshift-mlp/1"


class Activation(enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"

    def __call__(self, z):
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        return z

    def grad(self, z):
        if self is Activation.RELU:
            return (z > 0).astype(z.dtype)
        return np.ones_like(z)


@dataclass
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DomainError(f"inconsistent layer shapes {self.weights.shape} / {self.biases.shape}")
        self.activation = Activation(self.activation)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class MlpModel:
    layers: list[DenseLayer]
    x_min: np.ndarray
    x_max: np.ndarray
    fused: bool = False
    seed: int = 0
    # per-output cut point on the unit circle; see wrap_cut_offsets()
    target_offset: np.ndarray = field(default_factory=lambda: np.zeros(N_OUTPUTS))

    def __post_init__(self):
        self.target_offset = np.asarray(self.target_offset, dtype=float)
        self.x_min = np.asarray(self.x_min, dtype=float)
        self.x_max = np.asarray(self.x_max, dtype=float)
        if self.x_min.shape != self.x_max.shape:
            raise DomainError("x_min and x_max must have the same shape")
        if np.any(self.x_max < self.x_min):
            raise DomainError("x_max must be >= x_min for every feature")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DomainError(f"layer dims do not chain: {a.n_out} -> {b.n_in}")
        if self.layers and self.layers[0].n_in != len(self.x_min):
            raise DomainError("first layer width does not match the normalisation vector")

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def copy(self) -> "MlpModel":
        layers = [DenseLayer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers]
        return replace(self, layers=layers, x_min=self.x_min.copy(), x_max=self.x_max.copy(),
                       target_offset=self.target_offset.copy())


@dataclass
class TrainConfig:
    hidden_layers: int = 3
    width: int = 20
    dropout: float = 0.05
    batch_size: int = 256
    learning_rate: float = 1e-3
    max_epochs: int = 2000
    patience: int = 10
    seed: int = 0
    # reduce-on-plateau: lr *= lr_factor after lr_patience stale epochs (0 disables)
    lr_patience: int = 0
    lr_factor: float = 0.5
    min_lr: float = 1e-5

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise DomainError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if self.width < 1:
            raise DomainError("width must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise DomainError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be > 0")
        if self.max_epochs < 1 or self.patience < 1:
            raise DomainError("max_epochs and patience must be >= 1")
        if self.lr_patience < 0 or not 0.0 < self.lr_factor <= 1.0 or self.min_lr < 0:
            raise DomainError("lr_patience >= 0, 0 < lr_factor <= 1 and min_lr >= 0 are required")

    @classmethod
    def tuned(cls, **overrides) -> "TrainConfig":
        """Schedule that reaches sub-3-degree errors on a coarse (~8k row) grid.

        Without dropout, with small batches and a slowly decaying learning
        rate. The plain defaults stop after a few hundred epochs and
        underfit the steep regions near the triangle-inequality boundary.
        """
        base = dict(dropout=0.0, batch_size=32, learning_rate=1e-3, max_epochs=8000, patience=500,
                    lr_patience=100, lr_factor=0.5, min_lr=1e-6)
        base.update(overrides)
        return cls(**base)


@dataclass
class EvalReport:
    mse: float
    mae_deg: float
    pii3: float
    mae_per_output: tuple[float, float]
    mae_deg_quantized: float | None = None
    pii3_quantized: float | None = None

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mae_deg": self.mae_deg,
            "pii3": self.pii3,
            "mae_per_output_deg": list(self.mae_per_output),
            "mae_deg_quantized": self.mae_deg_quantized,
            "pii3_quantized": self.pii3_quantized,
        }


@dataclass
class History:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def feature_ranges(X) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    return X.min(axis=0), X.max(axis=0)


def wrap_cut_offsets(Y) -> np.ndarray:
    """Per-column centre of the widest empty arc of circular targets in [0, 1).

    Relative shifts are angles, so ``0`` and ``1`` are the same point. Encoding
    ``(y - offset) mod 1`` with the offset inside the widest gap keeps the
    encoded targets contiguous instead of split across the 0/1 seam.
    """
    Y = np.asarray(Y, dtype=float).reshape(len(Y), -1)
    offsets = np.zeros(Y.shape[1])
    for j in range(Y.shape[1]):
        v = np.unique(np.mod(Y[:, j], 1.0))
        if len(v) < 2:
            offsets[j] = np.mod(v[0] + 0.5, 1.0) if len(v) else 0.0
            continue
        gaps = np.diff(np.append(v, v[0] + 1.0))
        i = int(np.argmax(gaps))
        offsets[j] = np.mod(v[i] + gaps[i] / 2.0, 1.0)
    return offsets


def encode_targets(model: MlpModel, Y) -> np.ndarray:
    return np.mod(np.asarray(Y, dtype=float) - model.target_offset, 1.0)


def decode_targets(model: MlpModel, out) -> np.ndarray:
    dec = np.mod(np.asarray(out, dtype=float) + model.target_offset, 1.0)
    return np.where(dec >= 1.0, 0.0, dec)


def build_model(cfg: TrainConfig, x_min, x_max, seed: int | None = None,
                target_offset=None) -> MlpModel:
    """He-initialised network ``7 -> width x hidden_layers -> 2``, all ReLU."""
    if cfg.hidden_layers < 1:
        raise DomainError(f"hidden_layers must be >= 1, got {cfg.hidden_layers}")
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    x_min = np.asarray(x_min, dtype=float)
    dims = [len(x_min)] + [cfg.width] * cfg.hidden_layers + [N_OUTPUTS]
    layers = []
    for n_in, n_out in zip(dims, dims[1:]):
        w = rng.normal(0.0, math.sqrt(2.0 / n_in), size=(n_out, n_in))
        layers.append(DenseLayer(w, np.zeros(n_out), Activation.RELU))
    # start the output ReLUs mid-range so they cannot begin dead on [0, 1) targets
    layers[-1].biases[:] = 0.5
    if target_offset is None:
        target_offset = np.zeros(N_OUTPUTS)
    return MlpModel(layers, x_min, x_max, fused=False, seed=seed, target_offset=target_offset)


def normalize(model: MlpModel, X) -> np.ndarray:
    """Min-max scale raw features into [0, 1]; constant features map to 0."""
    span = model.x_max - model.x_min
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (X - model.x_min) / safe, 0.0)


def _as_batch(model, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.layers[0].n_in:
        raise DomainError(f"expected {model.layers[0].n_in} features, got {X.shape[1]}")
    return X, single


def forward(model: MlpModel, x) -> np.ndarray:
    """Inference on raw features (dropout off). Accepts one row or a batch."""
    X, single = _as_batch(model, x)
    A = X if model.fused else normalize(model, X)
    for layer in model.layers:
        A = layer.activation(A @ layer.weights.T + layer.biases)
    return A[0] if single else A


def predict(model: MlpModel, x) -> np.ndarray:
    """Relative shifts as fractions of a period in [0, 1) (network output decoded)."""
    return decode_targets(model, forward(model, x))


def predict_relative_shifts(model: MlpModel, x) -> np.ndarray:
    """Shifts of phases 2 and 3 relative to phase 1, in degrees."""
    return predict(model, x) * 360.0


def _forward_train(layers, A, rng, dropout):
    """Forward pass keeping the caches backprop needs."""
    cache = []
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        Z = A @ layer.weights.T + layer.biases
        H = layer.activation(Z)
        mask = None
        if dropout > 0 and i < last and rng is not None:
            mask = (rng.random(H.shape) >= dropout) / (1.0 - dropout)
            H = H * mask
        cache.append((A, Z, mask))
        A = H
    return A, cache


def _backward(layers, cache, dA):
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        A_prev, Z, mask = cache[i]
        if mask is not None:
            dA = dA * mask
        dZ = dA * layers[i].activation.grad(Z)
        grads[i] = (dZ.T @ A_prev, dZ.sum(axis=0))
        dA = dZ @ layers[i].weights
    return grads


def mse_loss_and_grads(model: MlpModel, X_scaled, Y, rng=None, dropout=0.0):
    """MSE over all outputs and its gradients w.r.t. every layer's (W, b).

    ``X_scaled`` is already normalised. Pass ``rng`` to enable dropout masks.
    """
    out, cache = _forward_train(model.layers, X_scaled, rng, dropout)
    diff = out - Y
    loss = float(np.mean(diff**2))
    dA = 2.0 * diff / diff.size
    return loss, _backward(model.layers, cache, dA)


class _Adam:
    def __init__(self, layers, lr, beta1=0.9, beta2=0.999, eps=1e-7):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in layers]
        self.v = [(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in layers]
        self.t = 0

    def step(self, layers, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for layer, g, m, v in zip(layers, grads, self.m, self.v):
            for param, gp, mp, vp in zip((layer.weights, layer.biases), g, m, v):
                mp *= self.beta1
                mp += (1.0 - self.beta1) * gp
                vp *= self.beta2
                vp += (1.0 - self.beta2) * gp * gp
                param -= self.lr * (mp / c1) / (np.sqrt(vp / c2) + self.eps)


def _batch_mse(model, X_scaled, Y):
    out = X_scaled
    for layer in model.layers:
        out = layer.activation(out @ layer.weights.T + layer.biases)
    return float(np.mean((out - Y) ** 2))


def train(model: MlpModel, train_X, train_Y, val_X, val_Y, cfg: TrainConfig,
          verbose: bool = False) -> tuple[MlpModel, History]:
    """Mini-batch Adam on MSE with early stopping on validation MSE.

    Targets are relative shifts in [0, 1); they are re-encoded with the
    model's ``target_offset`` before the loss is formed. Returns a new
    (unfused) model holding the best-validation weights.
    """
    if model.fused:
        raise DomainError("train an unfused model; fuse afterwards")
    train_X, train_Y = np.asarray(train_X, float), np.asarray(train_Y, float)
    val_X, val_Y = np.asarray(val_X, float), np.asarray(val_Y, float)
    if len(train_X) == 0 or len(val_X) == 0:
        raise DomainError("training and validation sets must be non-empty")
    for Y in (train_Y, val_Y):
        if np.any(Y < 0) or np.any(Y >= 1):
            raise DomainError("targets must lie in [0, 1)")

    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    Xs = normalize(model, train_X)
    Vs = normalize(model, val_X)
    train_Y = encode_targets(model, train_Y)
    val_Y = encode_targets(model, val_Y)
    opt = _Adam(model.layers, cfg.learning_rate)
    history = History()
    best_val, best_layers, waited, stale = math.inf, model.copy().layers, 0, 0
    n = len(Xs)

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = mse_loss_and_grads(model, Xs[idx], train_Y[idx], rng, cfg.dropout)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            opt.step(model.layers, grads)
            total += loss * len(idx)
        val = _batch_mse(model, Vs, val_Y)
        if not math.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        history.train_mse.append(total / n)
        history.val_mse.append(val)
        if verbose and epoch % 50 == 0:
            print(f"epoch {epoch:5d}  train {total / n:.3e}  val {val:.3e}")
        if val < best_val:
            best_val, waited, stale = val, 0, 0
            best_layers = model.copy().layers
            history.best_epoch = epoch
        else:
            waited += 1
            stale += 1
            if cfg.lr_patience and stale >= cfg.lr_patience and opt.lr > cfg.min_lr:
                opt.lr = max(opt.lr * cfg.lr_factor, cfg.min_lr)
                stale = 0
            if waited >= cfg.patience:
                history.stopped_early = True
                break

    model.layers = best_layers
    return model, history


def fit(train_X, train_Y, val_X, val_Y, cfg: TrainConfig, wrap_targets: bool = True,
        verbose: bool = False) -> tuple[MlpModel, History]:
    """Build a model scaled to the training features and train it.

    With ``wrap_targets`` each output's 0/1 seam is moved into the widest gap
    of the training targets (see :func:`wrap_cut_offsets`).
    """
    x_min, x_max = feature_ranges(train_X)
    offset = wrap_cut_offsets(train_Y) if wrap_targets else None
    model = build_model(cfg, x_min, x_max, target_offset=offset)
    return train(model, train_X, train_Y, val_X, val_Y, cfg, verbose=verbose)


def fuse_normalization(model: MlpModel) -> MlpModel:
    """Fold min-max scaling into the first dense layer.

    ``W' = W / span`` and ``b' = b - W @ (x_min / span)``; columns of constant
    features (zero span) are zeroed because they normalise to 0.
    """
    if model.fused:
        raise DomainError("model is already fused")
    fused = model.copy()
    first = fused.layers[0]
    span = model.x_max - model.x_min
    live = span > 0
    scale = np.where(live, 1.0 / np.where(live, span, 1.0), 0.0)
    W = first.weights * scale[None, :]
    b = first.biases - W @ np.where(live, model.x_min, 0.0)
    fused.layers[0] = DenseLayer(W, b, first.activation)
    fused.fused = True
    return fused


def circular_error_deg(pred_deg, true_deg):
    diff = np.abs(np.asarray(pred_deg) - np.asarray(true_deg)) % 360.0
    return np.minimum(diff, 360.0 - diff)


def quantize_to_pwm(angle, counter_ratio: int = 120):
    """Snap degrees to the PWM counter grid ``360/counter_ratio``; ties round up."""
    if counter_ratio < 1:
        raise DomainError(f"counter_ratio must be >= 1, got {counter_ratio}")
    step = 360.0 / counter_ratio
    q = np.floor(np.asarray(angle, dtype=float) / step + 0.5) * step
    q = np.mod(q, 360.0)
    q = np.where(np.isclose(q, 360.0), 0.0, q)
    return float(q) if q.ndim == 0 else q


def _angle_metrics(pred_deg, true_deg):
    err = circular_error_deg(pred_deg, true_deg)
    per_output = err.mean(axis=0)
    pii3 = 100.0 * float(np.mean(np.all(err <= 3.0, axis=1)))
    return float(err.mean()), pii3, (float(per_output[0]), float(per_output[1]))


def evaluate(model_or_pred, X=None, Y=None, counter_ratio: int | None = 120) -> EvalReport:
    """Circular MSE on the [0, 1) scale plus circular MAE and PII3 in degrees.

    Pass a model and ``(X, Y)``, or a prediction array as the first argument
    with ``X=None``. PII3 counts a row only when both outputs are within 3 deg.
    """
    if isinstance(model_or_pred, MlpModel):
        pred = predict(model_or_pred, X)
    else:
        pred = np.asarray(model_or_pred, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if len(Y) == 0:
        raise DomainError("test set is empty")
    # residual taken on the unit circle so a 0.999-vs-0.001 miss costs 0.002
    diff = np.mod(pred - Y + 0.5, 1.0) - 0.5
    mse = float(np.mean(diff**2))
    mae, pii3, per = _angle_metrics(pred * 360.0, Y * 360.0)
    report = EvalReport(mse, mae, pii3, per)
    if counter_ratio is not None:
        q_mae, q_pii3, _ = _angle_metrics(quantize_to_pwm(pred * 360.0, counter_ratio), Y * 360.0)
        report.mae_deg_quantized, report.pii3_quantized = q_mae, q_pii3
    return report


def count_params(model: MlpModel) -> int:
    return sum(l.n_in * l.n_out + l.n_out for l in model.layers)


def count_flops(model: MlpModel) -> int:
    """Multiplies and adds counted separately per dense layer, plus one add per bias.

    Activations are free: ``sum(2 * in * out + out)``.
    """
    return sum(2 * l.n_in * l.n_out + l.n_out for l in model.layers)


def model_to_dict(model: MlpModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "metadata": {
            "dims": model.dims,
            "activations": [l.activation.value for l in model.layers],
            "fused": model.fused,
            "seed": model.seed,
        },
        "target_offset": model.target_offset.tolist(),
        "norm": {"x_min": model.x_min.tolist(), "x_max": model.x_max.tolist()},
        "layers": [{"weights": l.weights.tolist(), "biases": l.biases.tolist(),
                    "activation": l.activation.value} for l in model.layers],
    }


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ModelLoadError(f"missing field {where}{key!r}")
    return obj[key]


def model_from_dict(doc: dict) -> MlpModel:
    fmt = _require(doc, "format", "")
    if fmt != MODEL_FORMAT:
        raise ModelLoadError(f"field 'format': unsupported {fmt!r}")
    meta = _require(doc, "metadata", "")
    norm = _require(doc, "norm", "")
    raw_layers = _require(doc, "layers", "")
    try:
        layers = [DenseLayer(np.array(_require(l, "weights", "layers[].")),
                             np.array(_require(l, "biases", "layers[].")),
                             Activation(_require(l, "activation", "layers[].")))
                  for l in raw_layers]
        model = MlpModel(layers, _require(norm, "x_min", "norm."), _require(norm, "x_max", "norm."),
                         fused=bool(_require(meta, "fused", "metadata.")),
                         seed=int(_require(meta, "seed", "metadata.")),
                         target_offset=_require(doc, "target_offset", ""))
    except ModelLoadError:
        raise
    except (ValueError, TypeError) as exc:
        raise ModelLoadError(f"field 'layers': {exc}") from None
    if model.dims != list(_require(meta, "dims", "metadata.")):
        raise ModelLoadError(f"field 'metadata.dims': {meta['dims']} does not match weights {model.dims}")
    return model


def save_model(model: MlpModel, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> MlpModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"not a valid model document: {exc}") from None
    return model_from_dict(doc)

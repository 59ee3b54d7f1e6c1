"""Current-based LIF classifier with surrogate-gradient training.

The neuron keeps two state variables per step: a synaptic current that
low-pass filters incoming spikes and a membrane potential driven by that
current.  A neuron fires when the potential reaches the threshold and is
hard-reset to zero.  Training backpropagates through time, replacing the
threshold derivative with a fast-sigmoid surrogate; a fully differentiable
soft mode (sigmoid spikes) exists so the whole backward pass can be checked
against finite differences.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .core import Rng, SpikeTensor
from .errors import (
    BadMagicError,
    ConfigError,
    DivergenceError,
    EmptyDatasetError,
    ShapeError,
    TruncatedPayloadError,
    VersionMismatchError,
)

CHECKPOINT_MAGIC = b"CUB1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class CubaParams:
    """Neuron constants: firing threshold and the per-step decay fractions
    of the synaptic current and the membrane potential."""

    threshold: float = 1.0
    current_decay: float = 0.5
    voltage_decay: float = 0.3

    def __post_init__(self):
        if self.threshold <= 0:
            raise ConfigError(f"threshold must be positive, got {self.threshold}")
        if not 0 < self.current_decay <= 1:
            raise ConfigError(f"current_decay must be in (0, 1], got {self.current_decay}")
        if not 0 < self.voltage_decay <= 1:
            raise ConfigError(f"voltage_decay must be in (0, 1], got {self.voltage_decay}")


@dataclass(frozen=True)
class LossSpec:
    """Target firing rates for the output layer: high for the true class,
    low for all others."""

    true_rate: float = 0.9
    false_rate: float = 0.1

    def __post_init__(self):
        if not 0 < self.true_rate <= 1:
            raise ConfigError(f"true_rate must be in (0, 1], got {self.true_rate}")
        if not 0 <= self.false_rate < 1:
            raise ConfigError(f"false_rate must be in [0, 1), got {self.false_rate}")
        if self.false_rate >= self.true_rate:
            raise ConfigError("false_rate must be below true_rate")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    surrogate_slope: float = 10.0
    soft_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.surrogate_slope <= 0:
            raise ConfigError(f"surrogate_slope must be positive, got {self.surrogate_slope}")


class CubaNetwork:
    """Feed-forward dense network of CUBA neurons.

    layer_sizes includes the input width, e.g. (7, 256, 64, 12).  Weights are
    drawn from a seeded normal scaled by 1/sqrt(fan_in) unless given.
    """

    def __init__(self, layer_sizes, params=None, dropout_p: float = 0.1,
                 weights=None, seed: int = 0, init_gain: float = 2.0):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2:
            raise ConfigError("layer_sizes needs at least input and output widths")
        if any(s < 1 for s in sizes):
            raise ConfigError(f"layer sizes must be positive, got {sizes}")
        if not 0 <= dropout_p < 1:
            raise ConfigError(f"dropout_p must be in [0, 1), got {dropout_p}")
        self.layer_sizes = sizes
        self.dropout_p = float(dropout_p)
        n_layers = len(sizes) - 1
        if params is None:
            params = CubaParams()
        if isinstance(params, CubaParams):
            params = [params] * n_layers
        self.params = list(params)
        if len(self.params) != n_layers:
            raise ShapeError(f"{len(self.params)} param sets for {n_layers} layers")
        if weights is None:
            rng = Rng(seed)
            weights = [
                rng.normal(size=(sizes[i + 1], sizes[i]),
                           scale=init_gain / np.sqrt(sizes[i]))
                for i in range(n_layers)
            ]
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        for i, w in enumerate(self.weights):
            expected = (sizes[i + 1], sizes[i])
            if w.shape != expected:
                raise ShapeError(f"layer {i} weights {w.shape} != {expected}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def copy_weights(self):
        return [w.copy() for w in self.weights]

    def set_weights(self, weights):
        for w, new in zip(self.weights, weights):
            if w.shape != new.shape:
                raise ShapeError(f"weight shape {new.shape} != {w.shape}")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]


def cuba_step(state, input_spikes, weights: np.ndarray, params: CubaParams):
    """One discrete-time update of a dense CUBA layer.

    state is (current, potential) matching the layer width, or None for a
    fresh layer.  Accepts a single input vector or a (batch, n_in) block.
    Returns (spikes, (current, potential)) with the potential already reset
    at neurons that fired.
    """
    x = np.asarray(input_spikes, dtype=np.float64)
    if x.shape[-1] != weights.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} != fan-in {weights.shape[1]}")
    if state is None:
        u_prev = np.zeros(x.shape[:-1] + (weights.shape[0],))
        v_prev = np.zeros_like(u_prev)
    else:
        u_prev, v_prev = state
        if np.shape(u_prev)[-1] != weights.shape[0]:
            raise ShapeError(
                f"state width {np.shape(u_prev)[-1]} != layer width {weights.shape[0]}"
            )
    u = (1.0 - params.current_decay) * u_prev + x @ weights.T
    v = (1.0 - params.voltage_decay) * v_prev + u
    spikes = (v >= params.threshold).astype(np.float64)
    v = v * (1.0 - spikes)
    return spikes, (u, v)


def _surrogate_grad(v: np.ndarray, params: CubaParams, slope: float) -> np.ndarray:
    """Fast-sigmoid surrogate for the threshold derivative."""
    return 1.0 / np.square(1.0 + slope * np.abs(v - params.threshold))


def _soft_spike(v: np.ndarray, params: CubaParams, slope: float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-slope * (v - params.threshold)))


def _soft_spike_grad(s: np.ndarray, slope: float) -> np.ndarray:
    return slope * s * (1.0 - s)


@dataclass
class ForwardResult:
    """Output raster of shape (classes, timesteps) plus the per-class mean
    firing rates over the whole duration."""

    spikes: np.ndarray
    rates: np.ndarray
    potentials: list = None


@dataclass(frozen=True)
class Classification:
    label: int
    rates: np.ndarray
    no_spikes: bool


def _as_features(x) -> np.ndarray:
    if isinstance(x, SpikeTensor):
        return x.features()
    return np.asarray(x, dtype=np.float64)


def _stack_batch(tensors) -> np.ndarray:
    feats = [_as_features(t) for t in tensors]
    shapes = {f.shape for f in feats}
    if len(shapes) != 1:
        raise ShapeError(f"batch mixes input shapes: {sorted(shapes)}")
    return np.stack(feats)  # (B, F, T)


def _simulate(net: CubaNetwork, x: np.ndarray, soft: bool = False,
              slope: float = 10.0, record: bool = False,
              dropout_masks=None):
    """Run the network over a (B, F, T) block.

    Returns (out_spikes (T, B, C), tape).  When record is set, the tape holds
    per layer the inputs, pre-reset potentials, spikes, and post-reset
    potentials needed for backpropagation, all in (T, B, n) layout.
    """
    b, f, t_len = x.shape
    if f != net.n_inputs:
        raise ShapeError(f"input features {f} != network input width {net.n_inputs}")
    current = np.ascontiguousarray(x.transpose(2, 0, 1))  # (T, B, F)
    tape = []
    for li in range(net.n_layers):
        w = net.weights[li]
        p = net.params[li]
        au = 1.0 - p.current_decay
        av = 1.0 - p.voltage_decay
        n_out = w.shape[0]
        u = np.zeros((b, n_out))
        v = np.zeros((b, n_out))
        spikes_seq = np.empty((t_len, b, n_out))
        v_pre_seq = np.empty((t_len, b, n_out)) if record else None
        v_post_seq = np.empty((t_len, b, n_out)) if record else None
        for t in range(t_len):
            u = au * u + current[t] @ w.T
            v = av * v + u
            if soft:
                s = _soft_spike(v, p, slope)
            else:
                s = (v >= p.threshold).astype(np.float64)
            if record:
                v_pre_seq[t] = v
            v = v * (1.0 - s)
            if record:
                v_post_seq[t] = v
            spikes_seq[t] = s
        layer_input = current
        out = spikes_seq
        if dropout_masks is not None and li < net.n_layers - 1:
            out = out * dropout_masks[li]
        if record:
            tape.append({
                "x": layer_input,
                "v": v_pre_seq,
                "v_post": v_post_seq,
                "s": spikes_seq,
                "out": out,
            })
        current = out
    return current, tape


def forward(net: CubaNetwork, spikes_in, record_potentials: bool = False) -> ForwardResult:
    """Run one sample through the network; rates are mean output spikes over
    the duration."""
    x = _as_features(spikes_in)[np.newaxis]  # (1, F, T)
    out, tape = _simulate(net, x, record=record_potentials)
    raster = out[:, 0, :].T  # (classes, T)
    rates = raster.mean(axis=1)
    potentials = None
    if record_potentials:
        potentials = [layer["v_post"][:, 0, :].T for layer in tape]
    return ForwardResult(spikes=raster, rates=rates, potentials=potentials)


def rates_batch(net: CubaNetwork, tensors) -> np.ndarray:
    """Per-class output rates for a batch of inputs; (B, classes)."""
    x = _stack_batch(tensors)
    out, _ = _simulate(net, x)
    return out.mean(axis=0)


def classify(net: CubaNetwork, spikes_in) -> int:
    """Class with the highest output rate; ties break toward the lowest
    index."""
    rates = forward(net, spikes_in).rates
    return int(np.argmax(rates))


def classify_detailed(net: CubaNetwork, spikes_in) -> Classification:
    rates = forward(net, spikes_in).rates
    return Classification(label=int(np.argmax(rates)), rates=rates,
                          no_spikes=bool(rates.sum() == 0.0))


def classify_batch(net: CubaNetwork, tensors) -> np.ndarray:
    return np.argmax(rates_batch(net, tensors), axis=1)


def spike_rate_loss(rates, label: int, spec: LossSpec = LossSpec()) -> float:
    """Mean squared error between output rates and the target rate vector."""
    rates = np.asarray(rates, dtype=np.float64)
    n = rates.shape[0]
    if not 0 <= label < n:
        raise IndexError(f"label {label} out of range for {n} classes")
    target = np.full(n, spec.false_rate)
    target[label] = spec.true_rate
    return float(np.mean(np.square(rates - target)))


def _targets(labels: np.ndarray, n_classes: int, spec: LossSpec) -> np.ndarray:
    t = np.full((labels.shape[0], n_classes), spec.false_rate)
    t[np.arange(labels.shape[0]), labels] = spec.true_rate
    return t


def _loss_and_grads(net: CubaNetwork, x: np.ndarray, labels: np.ndarray,
                    loss_spec: LossSpec, slope: float, soft: bool,
                    dropout_masks=None):
    """Forward plus backpropagation through time over a (B, F, T) block.

    Returns (loss, [dW per layer]).  The backward pass follows the forward
    graph exactly: spike derivative (surrogate in hard mode, exact sigmoid
    derivative in soft mode), the multiplicative reset, and both state
    recurrences.
    """
    b, _, t_len = x.shape
    out, tape = _simulate(net, x, soft=soft, slope=slope, record=True,
                          dropout_masks=dropout_masks)
    rates = out.mean(axis=0)  # (B, C)
    targets = _targets(labels, net.n_classes, loss_spec)
    diff = rates - targets
    loss = float(np.mean(np.square(diff)))
    g_rates = 2.0 * diff / diff.size
    g_out = np.broadcast_to(g_rates / t_len, (t_len,) + g_rates.shape)

    grads = [None] * net.n_layers
    g_s = np.array(g_out)
    for li in range(net.n_layers - 1, -1, -1):
        layer = tape[li]
        w = net.weights[li]
        p = net.params[li]
        au = 1.0 - p.current_decay
        av = 1.0 - p.voltage_decay
        if dropout_masks is not None and li < net.n_layers - 1:
            g_s = g_s * dropout_masks[li]
        x_seq = layer["x"]
        v_seq = layer["v"]
        s_seq = layer["s"]
        carry_u = np.zeros((b, w.shape[0]))
        carry_vp = np.zeros((b, w.shape[0]))
        g_w = np.zeros_like(w)
        g_x = np.empty((t_len, b, w.shape[1]))
        for t in range(t_len - 1, -1, -1):
            v = v_seq[t]
            s = s_seq[t]
            if soft:
                sd = _soft_spike_grad(s, slope)
            else:
                sd = _surrogate_grad(v, p, slope)
            g_v = sd * (g_s[t] - v * carry_vp) + (1.0 - s) * carry_vp
            g_u = g_v + au * carry_u
            g_w += g_u.T @ x_seq[t]
            g_x[t] = g_u @ w
            carry_u = g_u
            carry_vp = av * g_v
        grads[li] = g_w
        g_s = g_x
    return loss, grads


class _Adam:
    def __init__(self, shapes, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, weights, grads):
        cfg = self.cfg
        self.t += 1
        b1_corr = 1.0 - cfg.beta1 ** self.t
        b2_corr = 1.0 - cfg.beta2 ** self.t
        for i, g in enumerate(grads):
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * np.square(g)
            m_hat = self.m[i] / b1_corr
            v_hat = self.v[i] / b2_corr
            weights[i] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: float


@dataclass
class TrainResult:
    net: CubaNetwork
    history: list
    best_epoch: int
    best_test_accuracy: float


def _accuracy(net: CubaNetwork, x: np.ndarray, labels: np.ndarray,
              batch_size: int) -> float:
    correct = 0
    for start in range(0, x.shape[0], batch_size):
        block = x[start:start + batch_size]
        out, _ = _simulate(net, block)
        pred = np.argmax(out.mean(axis=0), axis=1)
        correct += int((pred == labels[start:start + batch_size]).sum())
    return correct / x.shape[0]


def train(net: CubaNetwork, dataset, cfg: TrainConfig,
          test_set=None, loss_spec: LossSpec = LossSpec()) -> TrainResult:
    """Surrogate-gradient training with ADAM; deterministic given seed.

    dataset (and test_set, if given) are sequences of (SpikeTensor, label)
    pairs sharing one tensor shape.  Accuracy is tracked every epoch and the
    weights of the first best test-accuracy epoch are restored at the end.
    Without a test_set the training set doubles as the tracking set.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("training dataset is empty")
    x_train = _stack_batch([t for t, _ in dataset])
    y_train = np.asarray([l for _, l in dataset], dtype=np.int64)
    if test_set is not None and len(test_set) > 0:
        x_test = _stack_batch([t for t, _ in test_set])
        y_test = np.asarray([l for _, l in test_set], dtype=np.int64)
    else:
        x_test, y_test = x_train, y_train

    rng = Rng(cfg.seed)
    adam = _Adam([w.shape for w in net.weights], cfg)
    history = []
    best_acc = -1.0
    best_epoch = -1
    best_weights = net.copy_weights()
    n = x_train.shape[0]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            masks = None
            if net.dropout_p > 0.0:
                keep = 1.0 - net.dropout_p
                masks = [
                    (rng.uniform(size=(xb.shape[0], net.layer_sizes[i + 1])) < keep)
                    .astype(np.float64) / keep
                    for i in range(net.n_layers - 1)
                ]
            loss, grads = _loss_and_grads(net, xb, yb, loss_spec,
                                          cfg.surrogate_slope, cfg.soft_mode,
                                          dropout_masks=masks)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}")
            adam.step(net.weights, grads)
            epoch_loss += loss
            n_batches += 1
        train_acc = _accuracy(net, x_train, y_train, cfg.batch_size)
        test_acc = _accuracy(net, x_test, y_test, cfg.batch_size)
        history.append(EpochStats(epoch, epoch_loss / n_batches, train_acc, test_acc))
        if test_acc > best_acc:
            best_acc = test_acc
            best_epoch = epoch
            best_weights = net.copy_weights()
    net.set_weights(best_weights)
    return TrainResult(net=net, history=history, best_epoch=best_epoch,
                       best_test_accuracy=best_acc)


@dataclass(frozen=True)
class GradCheckResult:
    status: str
    max_rel_error: float
    n_checked: int

    @property
    def ok(self) -> bool:
        return self.status == "checked"


def gradient_check(net: CubaNetwork, sample, cfg: TrainConfig,
                   n_weights: int = 120, step: float = 1e-5,
                   loss_spec: LossSpec = LossSpec()) -> GradCheckResult:
    """Compare analytic gradients against central finite differences.

    Only meaningful in soft mode, where the forward pass is differentiable;
    in hard mode the check is skipped with a non-differentiable status.
    Dropout is disabled for the comparison.
    """
    if not cfg.soft_mode:
        return GradCheckResult(status="skipped: non-differentiable hard threshold",
                               max_rel_error=float("nan"), n_checked=0)
    tensor, label = sample
    x = _as_features(tensor)[np.newaxis]
    labels = np.asarray([label], dtype=np.int64)

    def loss_only():
        out, _ = _simulate(net, x, soft=True, slope=cfg.surrogate_slope)
        rates = out.mean(axis=0)
        return float(np.mean(np.square(rates - _targets(labels, net.n_classes,
                                                        loss_spec))))

    _, grads = _loss_and_grads(net, x, labels, loss_spec,
                               cfg.surrogate_slope, soft=True)
    rng = Rng(cfg.seed)
    sizes = np.array([w.size for w in net.weights])
    total = int(sizes.sum())
    picks = np.sort(rng.integers(0, total, size=min(n_weights, total)))
    bounds = np.cumsum(sizes)
    max_rel = 0.0
    for flat in picks:
        li = int(np.searchsorted(bounds, flat, side="right"))
        local = int(flat - (bounds[li - 1] if li else 0))
        w = net.weights[li]
        coord = np.unravel_index(local, w.shape)
        orig = w[coord]
        w[coord] = orig + step
        up = loss_only()
        w[coord] = orig - step
        down = loss_only()
        w[coord] = orig
        numeric = (up - down) / (2.0 * step)
        analytic = grads[li][coord]
        # guard the denominator at the scale below which central differences
        # bottom out in float64 cancellation noise
        denom = max(abs(numeric), abs(analytic), 1e-5)
        max_rel = max(max_rel, abs(numeric - analytic) / denom)
    return GradCheckResult(status="checked", max_rel_error=max_rel,
                           n_checked=len(picks))


def dataset_fingerprint(dataset) -> str:
    """Stable hash of a (SpikeTensor, label) sequence, for checkpoint
    sidecars."""
    h = hashlib.sha256()
    for tensor, label in dataset:
        h.update(np.int64(label).tobytes())
        h.update(np.asarray(tensor.data.shape, dtype=np.int64).tobytes())
        h.update(tensor.data.tobytes())
    return h.hexdigest()[:16]


def save_checkpoint(net: CubaNetwork, path, train_config: TrainConfig = None,
                    sidecar_extra: dict = None):
    """Write a versioned binary checkpoint plus a JSON sidecar.

    Layout: magic, version u16, layer count u8, layer sizes u32, dropout f64,
    per-layer neuron params as 3 x f64, then per-layer weights as
    little-endian f32 row-major.
    """
    path = os.fspath(path)
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<H", CHECKPOINT_VERSION)
    blob += struct.pack("<B", net.n_layers)
    for size in net.layer_sizes:
        blob += struct.pack("<I", size)
    blob += struct.pack("<d", net.dropout_p)
    for p in net.params:
        blob += struct.pack("<ddd", p.threshold, p.current_decay, p.voltage_decay)
    for w in net.weights:
        blob += np.ascontiguousarray(w, dtype="<f4").tobytes()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    os.replace(tmp, path)

    sidecar = {
        "format": "cuba-checkpoint",
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(net.layer_sizes),
    }
    if train_config is not None:
        sidecar["train_config"] = {
            "epochs": train_config.epochs,
            "learning_rate": train_config.learning_rate,
            "batch_size": train_config.batch_size,
            "beta1": train_config.beta1,
            "beta2": train_config.beta2,
            "eps": train_config.eps,
            "surrogate_slope": train_config.surrogate_slope,
            "soft_mode": train_config.soft_mode,
            "seed": train_config.seed,
        }
    if sidecar_extra:
        sidecar.update(sidecar_extra)
    tmp = path + ".json.tmp"
    with open(tmp, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path + ".json")


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint.

    Returns (net, sidecar dict); the sidecar is empty if its file is absent.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: expected {CHECKPOINT_MAGIC!r}, got {blob[:4]!r}")
    offset = 4
    (version,) = struct.unpack_from("<H", blob, offset)
    offset += 2
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"{path}: version {version} unsupported")
    (n_layers,) = struct.unpack_from("<B", blob, offset)
    offset += 1
    sizes = struct.unpack_from(f"<{n_layers + 1}I", blob, offset)
    offset += 4 * (n_layers + 1)
    (dropout_p,) = struct.unpack_from("<d", blob, offset)
    offset += 8
    params = []
    for _ in range(n_layers):
        thr, cd, vd = struct.unpack_from("<ddd", blob, offset)
        offset += 24
        params.append(CubaParams(thr, cd, vd))
    weights = []
    for i in range(n_layers):
        count = sizes[i + 1] * sizes[i]
        nbytes = count * 4
        chunk = blob[offset:offset + nbytes]
        if len(chunk) < nbytes:
            raise TruncatedPayloadError(
                f"{path}: layer {i} weights truncated ({len(chunk)} of {nbytes} bytes)"
            )
        weights.append(np.frombuffer(chunk, dtype="<f4").reshape(
            sizes[i + 1], sizes[i]).astype(np.float64))
        offset += nbytes
    net = CubaNetwork(sizes, params=params, dropout_p=dropout_p, weights=weights)
    sidecar = {}
    sidecar_path = path + ".json"
    if os.path.exists(sidecar_path):
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
    return net, sidecar

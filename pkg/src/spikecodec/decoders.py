"""Spike-to-signal decoders, one per encoding family.

Rate decoding inverts the value-to-rate mapping through its percent point
function (inverse CDF); TTFS reads spike timestamps back; binary sums the
fired binary fractions; delta modulation integrates threshold-sized steps
from a known initial value.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .core import (
    EncodingConfig,
    Scheme,
    Signal,
    SpikeTensor,
    resolve_threshold_banks,
)
from .encoders import MappingKind, RateMapping, TtfsCurve
from .errors import (
    ConfigError,
    DomainError,
    InconsistentSpikesError,
    MultipleSpikesInWindowError,
    ShapeError,
)

# Empirical rates of exactly 0 or 1 sit on the Gaussian PPF singularities;
# reconstruction stays finite by clamping the PPF argument.
_PPF_CLAMP = 1e-6


def rate_ppf(p, mapping: RateMapping):
    """Invert map_value_to_rate: firing probability back to a signal value.

    Accepts scalars or arrays; scalar input yields a float.  The Gaussian
    branch clamps its argument to [1e-6, 1 - 1e-6] and its output to [0, 1].
    """
    arr = np.asarray(p, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise DomainError("probability must be finite")
    if (arr < 0.0).any() or (arr > 1.0).any():
        bad = arr[(arr < 0.0) | (arr > 1.0)].flat[0]
        raise DomainError(f"probability must lie in [0, 1], got {bad}")
    if mapping.kind is MappingKind.UNIFORM:
        out = arr.copy()
    elif mapping.kind is MappingKind.NORMAL:
        clamped = np.clip(arr, _PPF_CLAMP, 1.0 - _PPF_CLAMP)
        out = np.clip(mapping.mu + np.sqrt(mapping.var) * ndtri(clamped), 0.0, 1.0)
    else:
        inv = 1.0 / mapping.beta_shape
        lower = 0.5 * (1.0 - np.power(np.clip(1.0 - 2.0 * arr, 0.0, 1.0), inv))
        upper = 0.5 * (1.0 + np.power(np.clip(2.0 * arr - 1.0, 0.0, 1.0), inv))
        out = np.where(arr < 0.5, lower, upper)
    if np.isscalar(p) or np.ndim(p) == 0:
        return float(out)
    return out


def _single_train(tensor: SpikeTensor, scheme: str) -> np.ndarray:
    if tensor.n_trains != 1:
        raise ShapeError(
            f"{scheme} decoding expects 1 train, got {tensor.n_trains}"
        )
    return tensor.data[0]


def _window_view(data: np.ndarray, steps_per_sample: int) -> np.ndarray:
    channels, timesteps = data.shape
    if steps_per_sample < 1 or timesteps % steps_per_sample:
        raise ShapeError(
            f"{timesteps} timesteps not divisible by window of {steps_per_sample}"
        )
    return data.reshape(channels, timesteps // steps_per_sample, steps_per_sample)


def decode_rate(tensor: SpikeTensor, mapping: RateMapping,
                steps_per_sample: int = 50) -> Signal:
    """Empirical rate per sample window, pushed through the mapping's PPF."""
    data = _single_train(tensor, "rate")
    windows = _window_view(data, steps_per_sample)
    rates = windows.sum(axis=2, dtype=np.float64) / steps_per_sample
    values = rate_ppf(np.clip(rates, 0.0, 1.0), mapping)
    rate_hz = 1000.0 / (tensor.time_step_ms * steps_per_sample)
    return Signal(values, sample_rate_hz=rate_hz)


def decode_ttfs(tensor: SpikeTensor, curve: TtfsCurve,
                steps_per_sample: int = 50) -> Signal:
    """Read the spike timestamp in each window back to a value.

    LINEAR: v = 1 - index/N, an empty window decoding to 0.  LOG:
    v = 0.5 + sign * 0.5 * 10^(-index/20), an empty window decoding to 0.5.
    """
    data = _single_train(tensor, "ttfs")
    windows = _window_view(data, steps_per_sample)
    nonzero = windows != 0
    counts = nonzero.sum(axis=2)
    if (counts > 1).any():
        ch, win = np.argwhere(counts > 1)[0]
        raise MultipleSpikesInWindowError(
            f"{counts[ch, win]} spikes in window {win} of channel {ch}"
        )
    has_spike = counts == 1
    idx = np.argmax(nonzero, axis=2)
    n = float(steps_per_sample)
    if curve is TtfsCurve.LINEAR:
        values = np.where(has_spike, 1.0 - idx / n, 0.0)
    else:
        sign = np.take_along_axis(windows, idx[:, :, np.newaxis], axis=2)[:, :, 0]
        values = np.where(has_spike,
                          0.5 + sign * 0.5 * np.power(10.0, -idx / 20.0),
                          0.5)
    rate_hz = 1000.0 / (tensor.time_step_ms * steps_per_sample)
    return Signal(values, sample_rate_hz=rate_hz)


def decode_binary(tensor: SpikeTensor) -> Signal:
    """Sum the fired spikes weighted by their binary fractions."""
    n_bits = tensor.n_trains
    weights = np.power(2.0, -(np.arange(n_bits, dtype=np.float64) + 1.0))
    values = np.tensordot(weights, tensor.data.astype(np.float64), axes=(0, 0))
    return Signal(values, sample_rate_hz=1000.0 / tensor.time_step_ms)


def decode_delta(tensor: SpikeTensor, thresholds=None, initial_value=0.0,
                 step_rule: str = "threshold") -> Signal:
    """Integrate threshold-sized steps from an initial value.

    At each timestep the estimated change is the signed threshold of the
    largest-index train that fired (0 when silent); the running value is
    clamped to [0, 1].  step_rule="midpoint" instead uses the midpoint
    between the largest fired threshold and the next level up.
    The returned signal has timesteps + 1 samples, starting at the initial
    value, at the tensor's (interpolated) sample rate.
    """
    if step_rule not in ("threshold", "midpoint"):
        raise ConfigError(f"unknown step_rule {step_rule!r}")
    banks = resolve_threshold_banks(thresholds, tensor.n_channels)
    levels = banks.shape[1]
    if tensor.n_trains != levels:
        raise ShapeError(
            f"tensor has {tensor.n_trains} trains but banks define {levels} levels"
        )
    data = tensor.data  # (levels, channels, timesteps)
    has_pos = (data > 0).any(axis=0)
    has_neg = (data < 0).any(axis=0)
    mixed = has_pos & has_neg
    if mixed.any():
        ch, t = np.argwhere(mixed)[0]
        raise InconsistentSpikesError(
            f"mixed spike signs at channel {ch}, step {t}"
        )
    fired = data != 0
    any_fired = fired.any(axis=0)
    # index of the largest fired level per (channel, timestep)
    top = levels - 1 - np.argmax(fired[::-1], axis=0)

    if step_rule == "threshold":
        magnitude = np.take_along_axis(banks, top, axis=1)
    else:
        upper = np.concatenate([banks[:, 1:], banks[:, -1:]], axis=1)
        mids = 0.5 * (banks + upper)
        magnitude = np.take_along_axis(mids, top, axis=1)
    sign = has_pos.astype(np.float64) - has_neg.astype(np.float64)
    deltas = np.where(any_fired, sign * magnitude, 0.0)

    channels, timesteps = deltas.shape
    initial = np.broadcast_to(np.asarray(initial_value, dtype=np.float64),
                              (channels,)).copy()
    values = np.empty((channels, timesteps + 1), dtype=np.float64)
    values[:, 0] = np.clip(initial, 0.0, 1.0)
    current = values[:, 0].copy()
    for t in range(timesteps):
        current = np.clip(current + deltas[:, t], 0.0, 1.0)
        values[:, t + 1] = current
    return Signal(values, sample_rate_hz=1000.0 / tensor.time_step_ms)


def decode(tensor: SpikeTensor, config: EncodingConfig, initial_value=0.0) -> Signal:
    """Decode under the scheme selected by config."""
    scheme = config.scheme
    if scheme in (Scheme.RATE_UNIFORM, Scheme.RATE_NORMAL, Scheme.RATE_BETA):
        return decode_rate(tensor, RateMapping.from_config(config),
                           config.steps_per_sample)
    if scheme is Scheme.TTFS_LINEAR:
        return decode_ttfs(tensor, TtfsCurve.LINEAR, config.steps_per_sample)
    if scheme is Scheme.TTFS_LOG:
        return decode_ttfs(tensor, TtfsCurve.LOG, config.steps_per_sample)
    if scheme is Scheme.BINARY:
        return decode_binary(tensor)
    if scheme is Scheme.DELTA_MOD:
        return decode_delta(tensor, config.thresholds, initial_value)
    raise ConfigError(f"unhandled scheme {scheme!r}")

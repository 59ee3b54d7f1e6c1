"""Core domain types: signals, ternary spike tensors, configuration and RNG.

All containers are frozen after construction (their numpy buffers are marked
read-only), so they can be shared freely across threads.  Randomness always
flows through :class:`Rng`, which wraps a counter-based PCG64 stream and
supports deterministic child derivation for parallel workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import (
    ConfigError,
    NonFiniteValueError,
    OutOfRangeError,
    RaggedChannelsError,
    ShapeError,
    ThresholdOrderError,
)

# Threshold banks for the five-level delta modulation scheme.  The inertial
# channels use coarser levels than the capacitance channel.
IMU_THRESHOLDS = (0.0004, 0.0008, 0.0016, 0.0032, 0.0064)
HBC_THRESHOLDS = (0.0001, 0.0002, 0.0004, 0.0008, 0.0016)


class Scheme(enum.Enum):
    """The seven encoding variants supported by the package."""

    RATE_UNIFORM = "rate-uniform"
    RATE_NORMAL = "rate-normal"
    RATE_BETA = "rate-beta"
    TTFS_LINEAR = "ttfs-linear"
    TTFS_LOG = "ttfs-log"
    BINARY = "binary"
    DELTA_MOD = "delta-mod"

    @classmethod
    def from_string(cls, name: str) -> "Scheme":
        for scheme in cls:
            if scheme.value == name:
                return scheme
        known = ", ".join(s.value for s in cls)
        raise ConfigError(f"unknown scheme {name!r}; expected one of: {known}")


@dataclass(frozen=True)
class Signal:
    """A normalized multi-channel time series.

    data is stored as a (channels, samples) float64 array.  Values are
    expected to lie in [0, 1] once normalized; encoders enforce this through
    :func:`validate_signal` rather than at construction time, so decoders can
    return raw reconstructions without tripping the check.
    """

    data: np.ndarray
    sample_rate_hz: float
    channel_names: tuple = ()

    def __post_init__(self):
        try:
            arr = np.asarray(self.data, dtype=np.float64)
        except (ValueError, TypeError) as exc:
            raise RaggedChannelsError(
                "channels have differing sample counts; a signal must be "
                "rectangular (channels x samples)"
            ) from exc
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ShapeError(f"signal must be 2-D (channels x samples), got ndim={arr.ndim}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        names = tuple(self.channel_names)
        if not names:
            names = tuple(f"ch{i}" for i in range(arr.shape[0]))
        if len(names) != arr.shape[0]:
            raise ShapeError(
                f"{len(names)} channel names for {arr.shape[0]} channels"
            )
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


def validate_signal(signal: Signal) -> Signal:
    """Check the signal invariants, reporting the first offending value.

    Raises NonFiniteValueError or OutOfRangeError with the (channel, index,
    value) coordinate of the first violation.  Returns the signal unchanged
    so calls can be chained.
    """
    data = signal.data
    finite = np.isfinite(data)
    if not finite.all():
        ch, idx = np.argwhere(~finite)[0]
        raise NonFiniteValueError(ch, idx, data[ch, idx])
    in_range = (data >= 0.0) & (data <= 1.0)
    if not in_range.all():
        ch, idx = np.argwhere(~in_range)[0]
        raise OutOfRangeError(ch, idx, data[ch, idx])
    return signal


@dataclass(frozen=True)
class SpikeTensor:
    """A ternary spike train tensor of shape (trains, channels, timesteps).

    time_step_ms is the interval between adjacent possible spike positions;
    window_steps records how many positions each original sample occupies
    (1 for parallel schemes such as binary encoding).
    """

    data: np.ndarray
    time_step_ms: float
    window_steps: int = 1

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError(
                f"spike tensor must be 3-D (trains x channels x timesteps), got ndim={arr.ndim}"
            )
        if arr.size and (np.abs(arr) > 1).any():
            bad = arr[np.abs(arr) > 1].flat[0]
            raise ShapeError(f"spike values must be in {{-1, 0, +1}}, found {bad}")
        arr = np.ascontiguousarray(arr, dtype=np.int8)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if self.time_step_ms <= 0:
            raise ConfigError(f"time_step_ms must be positive, got {self.time_step_ms}")
        if self.window_steps < 1:
            raise ConfigError(f"window_steps must be >= 1, got {self.window_steps}")
        object.__setattr__(self, "window_steps", int(self.window_steps))

    @property
    def n_trains(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_timesteps(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def features(self) -> np.ndarray:
        """Flatten to (trains * channels, timesteps) float64, the layout fed
        to the classifier's input layer."""
        t, c, n = self.data.shape
        return self.data.reshape(t * c, n).astype(np.float64)


@dataclass(frozen=True)
class EncodingConfig:
    """Scheme selector plus every parameter any scheme needs.

    thresholds, when given, is one bank (sequence of floats) applied to all
    channels, or one bank per channel.  None selects the built-in IMU/HBC
    default banks at encode time.
    """

    scheme: Scheme
    steps_per_sample: int = 50
    n_bits: int = 6
    thresholds: tuple = None
    interp_factor: int = 5
    normal_mu: float = 0.5
    normal_var: float = 0.2
    beta_shape: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", Scheme.from_string(self.scheme))
        if self.steps_per_sample < 1:
            raise ConfigError(f"steps_per_sample must be >= 1, got {self.steps_per_sample}")
        if not 1 <= self.n_bits <= 16:
            raise ConfigError(f"n_bits must be in 1..16, got {self.n_bits}")
        if self.interp_factor < 1:
            raise ConfigError(f"interp_factor must be >= 1, got {self.interp_factor}")
        if not 0 < self.beta_shape <= 1:
            raise ConfigError(f"beta_shape must be in (0, 1], got {self.beta_shape}")
        if self.normal_var <= 0:
            raise ConfigError(f"normal_var must be positive, got {self.normal_var}")
        if self.seed < 0:
            raise ConfigError(f"seed must be unsigned, got {self.seed}")
        if self.thresholds is not None:
            banks = _freeze_banks(self.thresholds)
            for bank in banks:
                _check_bank(bank)
            object.__setattr__(self, "thresholds", banks)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["scheme"] = self.scheme.value
        if self.thresholds is not None:
            d["thresholds"] = [list(b) for b in self.thresholds]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingConfig":
        d = dict(d)
        d["scheme"] = Scheme.from_string(d["scheme"])
        if d.get("thresholds") is not None:
            d["thresholds"] = tuple(tuple(b) for b in d["thresholds"])
        return cls(**d)

    def with_seed(self, seed: int) -> "EncodingConfig":
        return replace(self, seed=int(seed))


def _freeze_banks(thresholds) -> tuple:
    """Normalize a thresholds argument to a tuple of banks."""
    seq = list(thresholds)
    if seq and np.isscalar(seq[0]):
        return (tuple(float(t) for t in seq),)
    return tuple(tuple(float(t) for t in bank) for bank in seq)


def _check_bank(bank):
    if len(bank) == 0:
        raise ThresholdOrderError("threshold bank is empty")
    arr = np.asarray(bank, dtype=np.float64)
    if (arr <= 0).any():
        raise ThresholdOrderError(f"thresholds must be positive, got {bank}")
    if (np.diff(arr) <= 0).any():
        raise ThresholdOrderError(f"thresholds must be strictly increasing, got {bank}")


def default_threshold_banks(n_channels: int) -> tuple:
    """Per-channel default banks: inertial levels everywhere except a final
    capacitance channel (channel 6 and beyond) which uses the finer bank."""
    return tuple(
        IMU_THRESHOLDS if ch < 6 else HBC_THRESHOLDS for ch in range(n_channels)
    )


def resolve_threshold_banks(thresholds, n_channels: int) -> np.ndarray:
    """Expand a thresholds argument to a validated (channels, levels) array."""
    if thresholds is None:
        banks = default_threshold_banks(n_channels)
    else:
        banks = _freeze_banks(thresholds)
        if len(banks) == 1:
            banks = banks * n_channels
        if len(banks) != n_channels:
            raise ShapeError(
                f"{len(banks)} threshold banks for {n_channels} channels"
            )
    sizes = {len(b) for b in banks}
    if len(sizes) != 1:
        raise ShapeError(f"threshold banks differ in level count: {sorted(sizes)}")
    for bank in banks:
        _check_bank(bank)
    return np.asarray(banks, dtype=np.float64)


class Rng:
    """Seeded uniform stream; equal seeds give bitwise-equal streams.

    Wraps numpy's PCG64, whose stream for a fixed seed is stable across runs
    and platforms.  An Rng instance is single-owner: parallel workers derive
    independent children with :meth:`child` instead of sharing one stream.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ConfigError(f"seed must be unsigned, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def uniform(self, size=None):
        """Uniform variates on [0, 1)."""
        return self._gen.random(size)

    def normal(self, size=None, loc=0.0, scale=1.0):
        return self._gen.normal(loc, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def child(self, index: int) -> "Rng":
        """Derive an independent child stream; seed = hash(parent seed, index)."""
        return Rng(derive_seed(self.seed, index))

    def __repr__(self):
        return f"Rng(seed={self.seed})"


def derive_seed(seed: int, *indices: int) -> int:
    """Deterministically hash a parent seed and worker indices to a child seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, np.uint64)[0])

"""Analog crossbar tile: bounded finite-state weights, noisy reads, converters.

A tile holds a weight matrix in physical units, clipped to [-w_bound, +w_bound].
Analog matrix-vector products add fresh Gaussian noise to every output line.
DAC/ADC converters are modeled as symmetric mid-tread uniform quantizers with
an odd number of levels, so zero is exactly representable and ties round away
from zero.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np


@dataclass(frozen=True)
class DeviceConfig:
    """Physical update behavior of one crossbar device.

    dw_min is the mean weight change of a single pulse coincidence, with
    relative cycle-to-cycle spread dw_min_std_ratio. Weights saturate at
    +-w_bound, giving 2*w_bound/dw_min addressable states.
    """

    dw_min: float = 0.001
    dw_min_std_ratio: float = 0.3
    w_bound: float = 0.6
    out_noise_std: float = 0.06

    def __post_init__(self):
        if self.dw_min <= 0:
            raise ValueError(f"dw_min must be > 0, got {self.dw_min}")
        if self.dw_min_std_ratio < 0:
            raise ValueError("dw_min_std_ratio must be >= 0")
        if self.w_bound <= 0:
            raise ValueError(f"w_bound must be > 0, got {self.w_bound}")
        if self.out_noise_std < 0:
            raise ValueError("out_noise_std must be >= 0")
        if count_states(self) < 2:
            raise ValueError(
                f"device resolves {count_states(self)} states, need at least 2"
            )

    @property
    def num_states(self):
        return count_states(self)


@dataclass(frozen=True)
class ConverterConfig:
    """Input DAC and output ADC resolutions and clipping bounds."""

    dac_bits: int = 7
    dac_bound: float = 1.0
    adc_bits: int = 9
    adc_bound: float = 12.0

    def __post_init__(self):
        if self.dac_bits < 1 or self.adc_bits < 1:
            raise ValueError("converter bit widths must be >= 1")
        if self.dac_bound <= 0 or self.adc_bound <= 0:
            raise ValueError("converter bounds must be > 0")

    @property
    def dac_step(self):
        return quant_step(self.dac_bits, self.dac_bound)

    @property
    def adc_step(self):
        return quant_step(self.adc_bits, self.adc_bound)


def quant_step(bits, bound):
    """Level spacing of the mid-tread quantizer: 2*bound/(2^bits - 2)."""
    if bits == 1:
        return float("inf")  # single level at zero
    return 2.0 * bound / (2 ** bits - 2)


def quantize(x, bits, bound):
    """Clip to [-bound, bound] and round to the nearest of 2^bits - 1 levels.

    Levels are k*step for integer k, step = 2*bound/(2^bits - 2), so zero and
    +-bound are exact. Ties round away from zero. bits == 1 collapses
    everything to the single zero level.
    """
    x = np.asarray(x, dtype=np.float64)
    if bits == 1:
        return np.zeros_like(x)
    levels = float(2 ** bits - 2)
    z = np.clip(x, -bound, bound) * (levels / (2.0 * bound))
    k = np.trunc(z + np.copysign(0.5, z))
    return (k / levels) * (2.0 * bound)


def detect_saturation(y, bound):
    """Boolean mask of output lines at or beyond the ADC bound."""
    return np.abs(np.asarray(y)) >= bound


def count_states(device):
    """Number of addressable weight states, 2*w_bound/dw_min.

    The ratio is rounded to 9 decimals so binary representation noise in
    quotients like 1.2/0.001 cannot turn an integer count into 1199.99...
    """
    return round(2.0 * device.w_bound / device.dw_min, 9)


class AnalogTile:
    """One crossbar array with its own seeded random stream.

    Noise and pulse randomness share the stream in call order, which makes
    any sequence of operations on a tile reproducible from (seed, call
    sequence) alone.
    """

    def __init__(self, d_out, d_in, device=None, converters=None, seed=0):
        if d_out < 1 or d_in < 1:
            raise ValueError(f"tile shape must be positive, got ({d_out}, {d_in})")
        self.d_out = int(d_out)
        self.d_in = int(d_in)
        self.device = device if device is not None else DeviceConfig()
        self.converters = converters if converters is not None else ConverterConfig()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.weights = np.zeros((self.d_out, self.d_in), dtype=np.float64)
        self.clipped_updates = 0  # updates where pulse probabilities hit 1

    @property
    def shape(self):
        return (self.d_out, self.d_in)

    def read_weights(self):
        return self.weights.copy()

    def set_weights(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != self.weights.shape:
            raise ValueError(f"expected weights {self.weights.shape}, got {w.shape}")
        np.clip(w, -self.device.w_bound, self.device.w_bound, out=self.weights)

    def mvm(self, x, transposed=False):
        """Raw analog product W @ x (or W.T @ x) plus fresh output noise.

        The input is expected to be already DAC-quantized; this is the bare
        analog operation without any management.
        """
        x = np.asarray(x, dtype=np.float64)
        expected = self.d_out if transposed else self.d_in
        if x.shape != (expected,):
            raise ValueError(
                f"input shape {x.shape} does not match tile "
                f"{'column' if transposed else 'row'} length {expected}"
            )
        y = self.weights.T @ x if transposed else self.weights @ x
        std = self.device.out_noise_std
        if std > 0.0:
            y = y + self.rng.normal(0.0, std, y.shape[0])
        return y

    def state_dict(self):
        """Snapshot of weights, configs, and the exact RNG position."""
        return {
            "weights": self.weights.copy(),
            "device": asdict(self.device),
            "converters": asdict(self.converters),
            "seed": self.seed,
            "rng_state": json.dumps(self.rng.bit_generator.state),
            "clipped_updates": self.clipped_updates,
        }

    @classmethod
    def from_state_dict(cls, state):
        device = DeviceConfig(**state["device"])
        converters = ConverterConfig(**state["converters"])
        weights = np.asarray(state["weights"], dtype=np.float64)
        tile = cls(weights.shape[0], weights.shape[1], device, converters,
                   seed=state["seed"])
        tile.weights[:] = weights
        tile.rng.bit_generator.state = json.loads(state["rng_state"])
        tile.clipped_updates = int(state.get("clipped_updates", 0))
        return tile

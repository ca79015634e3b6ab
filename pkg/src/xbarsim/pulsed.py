"""Stochastic pulse-train updates with update management.

An outer-product update -lr * d x^T is realized by firing Bernoulli pulse
trains of length bl_max on both tile edges and stepping a weight whenever
its row and column pulses coincide in a slot. Update management balances
the two firing probabilities so neither edge saturates first:

    s_x = sqrt(lr / (bl_max * dw_min) * max|d| / max|x|)
    s_d = sqrt(lr / (bl_max * dw_min) * max|x| / max|d|)

with p_i = s_x * |x_i| and q_j = s_d * |d_j| clipped to [0, 1]. Each
coincidence moves the weight by a fresh Gaussian step of mean dw_min and
std dw_min_std_ratio * dw_min against polarity sign(x_i) * sign(d_j), so
in expectation the weight change is exactly -lr * d x^T (absent clipping
and bound saturation).

RNG consumption order per update, drawn from the tile stream: one uniform
block (bl_max, d_in) for the column trains, one uniform block
(bl_max, d_out) for the row trains, then one Gaussian block with exactly
one draw per coincidence. A zero input or error vector is a no-op that
consumes no randomness.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import apply_coincidences


@dataclass(frozen=True)
class PulseConfig:
    """Pulse-train length and the signed train scheme.

    Only the two-combination scheme is implemented: one signed train per
    edge, polarity resolved per element at coincidence time.
    """

    bl_max: int = 31
    combo_count: int = 2

    def __post_init__(self):
        if self.bl_max < 1:
            raise ValueError(f"bl_max must be >= 1, got {self.bl_max}")
        if self.combo_count != 2:
            raise ValueError("only the signed 2-combination pulse scheme is supported")


@dataclass(frozen=True)
class UpdateScales:
    """Balanced edge scales for one update; s_x*s_d*bl_max*dw_min == lr."""

    s_x: float
    s_d: float
    lr: float
    clipped: bool  # True when some pulse probability had to be clipped to 1


def compute_update_scales(x, d, lr, device, pulse):
    """Update-management scales for input x and error d at learning rate lr.

    A zero max on either side returns zero scales, which callers treat as
    a no-op update.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    amax_x = float(np.max(np.abs(x))) if np.size(x) else 0.0
    amax_d = float(np.max(np.abs(d))) if np.size(d) else 0.0
    if amax_x == 0.0 or amax_d == 0.0:
        return UpdateScales(0.0, 0.0, lr, False)
    base = lr / (pulse.bl_max * device.dw_min)
    s_x = np.sqrt(base * amax_d / amax_x)
    s_d = np.sqrt(base * amax_x / amax_d)
    clipped = bool(s_x * amax_x > 1.0 or s_d * amax_d > 1.0)
    return UpdateScales(float(s_x), float(s_d), lr, clipped)


def generate_pulse_trains(prob, bl, rng):
    """Bernoulli fire matrix of shape (bl, len(prob)) from one uniform block."""
    prob = np.asarray(prob, dtype=np.float64)
    return rng.random((bl, prob.shape[0])) < prob


def pulsed_update(tile, x, d, lr, pulse=None):
    """Apply one stochastic pulsed update of -lr * d x^T to the tile.

    x has tile column length, d has tile row length. Weight steps saturate
    at the device bounds; saturated weights stay put until the polarity
    reverses.
    """
    if pulse is None:
        pulse = PulseConfig()
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x.shape != (tile.d_in,):
        raise ValueError(f"input shape {x.shape} does not match tile columns {tile.d_in}")
    if d.shape != (tile.d_out,):
        raise ValueError(f"error shape {d.shape} does not match tile rows {tile.d_out}")

    scales = compute_update_scales(x, d, lr, tile.device, pulse)
    if scales.s_x == 0.0:
        return
    if scales.clipped:
        tile.clipped_updates += 1

    p = np.minimum(scales.s_x * np.abs(x), 1.0)
    q = np.minimum(scales.s_d * np.abs(d), 1.0)
    x_fires = generate_pulse_trains(p, pulse.bl_max, tile.rng)
    d_fires = generate_pulse_trains(q, pulse.bl_max, tile.rng)

    n_coinc = int(x_fires.sum(axis=1) @ d_fires.sum(axis=1))
    if n_coinc == 0:
        return
    dw = tile.device.dw_min
    steps = tile.rng.normal(dw, tile.device.dw_min_std_ratio * dw, n_coinc)

    consumed = apply_coincidences(
        tile.weights, x_fires, d_fires,
        np.sign(x), np.sign(d), steps, tile.device.w_bound,
    )
    assert consumed == n_coinc


def pulsed_update_batch(tile, x_batch, d_batch, lr, pulse=None):
    """Sequential per-sample pulsed updates in batch order.

    Equivalent to looping pulsed_update over rows; updates are order
    dependent near the weight bounds, so the order is part of the contract.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    d_batch = np.asarray(d_batch, dtype=np.float64)
    if x_batch.ndim != 2 or d_batch.ndim != 2:
        raise ValueError("batch updates expect 2-D (n, dim) arrays")
    if x_batch.shape[0] != d_batch.shape[0]:
        raise ValueError(
            f"batch sizes differ: {x_batch.shape[0]} inputs, {d_batch.shape[0]} errors"
        )
    for x, d in zip(x_batch, d_batch):
        pulsed_update(tile, x, d, lr, pulse)

"""Virtual weight-range remapping between digital and physical weights.

Analog tiles store weights in physical units bounded by +-w_bound. To use
the full device range regardless of layer fan-in, physical weights are
initialized to a fixed fraction gamma of the bound and the digital side
multiplies every tile output by

    out_scale = beta / (sqrt(n_in) * w_bound),  beta = sqrt(3) / gamma

so the effective network starts in the usual fan-in scaled regime. The
digital learning rate is divided by out_scale before being handed to the
pulse engine, keeping the effective update equal to the digital one.
"""

import math
from dataclasses import dataclass

import numpy as np

from .management import managed_mvm


@dataclass(frozen=True)
class RemapConfig:
    gamma: float
    n_in: int
    w_bound: float
    enabled: bool
    beta: float
    out_scale: float


def make_remap(gamma, n_in, w_bound, enabled=True):
    """Build the remap constants for one tile.

    Disabled remapping keeps out_scale at 1 so the digital and physical
    weights coincide.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if n_in < 1:
        raise ValueError(f"n_in must be >= 1, got {n_in}")
    if w_bound <= 0:
        raise ValueError(f"w_bound must be > 0, got {w_bound}")
    beta = math.sqrt(3.0) / gamma
    out_scale = beta / (math.sqrt(n_in) * w_bound) if enabled else 1.0
    return RemapConfig(gamma, n_in, w_bound, enabled, beta, out_scale)


def remapped_mvm(tile, remap, x, direction="forward", bound_mgmt=None):
    """Managed analog product scaled back to digital units.

    Bound management defaults to on for the forward direction and off for
    the backward one.
    """
    if bound_mgmt is None:
        bound_mgmt = direction == "forward"
    result = managed_mvm(tile, x, direction=direction, bound_mgmt=bound_mgmt)
    return remap.out_scale * result.y, result


def remapped_lr(lr, remap):
    """Physical-tile learning rate realizing digital rate lr."""
    return lr / remap.out_scale


def init_weights(tile, remap, rng=None):
    """Draw initial physical weights for a tile.

    With remapping the device range is filled uniformly to +-gamma*w_bound;
    without it, weights follow the fan-in scaled uniform +-sqrt(3)/sqrt(n_in)
    clipped to the device bounds.
    """
    if rng is None:
        rng = tile.rng
    if remap.enabled:
        half = remap.gamma * tile.device.w_bound
    else:
        half = math.sqrt(3.0) / math.sqrt(remap.n_in)
    w = rng.uniform(-half, half, size=tile.shape)
    tile.set_weights(w)


def snr_estimate(tile, remap, x_batch):
    """Per-output-line signal-to-noise ratio on a sample input batch.

    Signal power follows ||w_row||^2 * mean||x||^2 against the squared
    output noise. Infinite when the device is noiseless.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[1] != tile.d_in:
        raise ValueError(f"expected batch shape (n, {tile.d_in}), got {x_batch.shape}")
    mean_x_sq = float(np.mean(np.sum(x_batch * x_batch, axis=1)))
    row_power = np.sum(tile.weights * tile.weights, axis=1)
    noise_var = tile.device.out_noise_std ** 2
    if noise_var == 0.0:
        return np.full(tile.d_out, np.inf)
    return row_power * mean_x_sq / noise_var

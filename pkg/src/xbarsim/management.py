"""Digital management wrapped around the raw analog matrix-vector product.

Noise management rescales the input by alpha = max|x| so the DAC range is
fully used regardless of input magnitude, and multiplies alpha back after
the ADC. Bound management (forward direction only) doubles alpha and reruns
the full analog product, fresh noise included, while any output line sits at
or beyond the ADC bound, up to adc_bits attempts. Each doubling costs one
bit of effective ADC resolution.
"""

from dataclasses import dataclass

import numpy as np

from .tile import quantize, detect_saturation


@dataclass(frozen=True)
class MvmResult:
    """Digital output of one managed analog matrix-vector product."""

    y: np.ndarray
    alpha_used: float
    bm_iterations: int
    saturated: bool  # True when output still saturates at the attempt cap


def managed_mvm(tile, x, direction="forward", bound_mgmt=True, noise_mgmt=True):
    """DAC -> analog product -> ADC with noise and bound management.

    direction "forward" computes W @ x, "backward" computes W.T @ x. Bound
    management only ever applies in the forward direction. With both
    managements disabled this degrades to adc(analog(dac(x))) exactly.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("managed_mvm input contains non-finite values")
    transposed = direction == "backward"
    conv = tile.converters

    alpha = float(np.max(np.abs(x))) if x.size else 0.0
    if alpha == 0.0:
        out_len = tile.d_in if transposed else tile.d_out
        return MvmResult(np.zeros(out_len), 0.0, 1, False)
    if not noise_mgmt:
        alpha = 1.0

    iterate = bound_mgmt and not transposed
    max_attempts = conv.adc_bits
    attempts = 0
    while True:
        attempts += 1
        x_q = quantize(x / alpha, conv.dac_bits, conv.dac_bound)
        y_raw = tile.mvm(x_q, transposed=transposed)
        saturated = bool(np.any(detect_saturation(y_raw, conv.adc_bound)))
        if not (iterate and saturated and attempts < max_attempts):
            break
        alpha *= 2.0

    y = alpha * quantize(y_raw, conv.adc_bits, conv.adc_bound)
    return MvmResult(y, alpha, attempts, saturated)


def effective_adc_resolution(adc_bits, bm_iterations):
    """Bits of output resolution left after bound-management rescaling."""
    return max(adc_bits - (bm_iterations - 1), 1)

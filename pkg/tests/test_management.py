"""Noise and bound management around the analog product."""

import numpy as np
import pytest

from xbarsim import (
    AnalogTile, ConverterConfig, DeviceConfig,
    effective_adc_resolution, managed_mvm, quantize,
)

QUIET = DeviceConfig(out_noise_std=0.0)


def quiet_tile(d_out, d_in, weights, converters=None, w_bound=0.6):
    device = DeviceConfig(out_noise_std=0.0, w_bound=w_bound)
    tile = AnalogTile(d_out, d_in, device=device, converters=converters, seed=0)
    tile.set_weights(weights)
    return tile


def test_zero_input_short_circuits():
    tile = AnalogTile(3, 4, seed=0)  # noisy device on purpose
    before = tile.rng.bit_generator.state
    result = managed_mvm(tile, np.zeros(4))
    assert np.array_equal(result.y, np.zeros(3))
    assert result.alpha_used == 0.0
    assert result.bm_iterations == 1
    assert result.saturated is False
    assert tile.rng.bit_generator.state == before  # nothing touched the stream


def test_zero_input_backward_output_length():
    tile = AnalogTile(3, 4, seed=0)
    result = managed_mvm(tile, np.zeros(3), direction="backward")
    assert result.y.shape == (4,)


def test_direction_validation():
    tile = AnalogTile(2, 2)
    with pytest.raises(ValueError):
        managed_mvm(tile, np.ones(2), direction="sideways")


def test_nonfinite_input_raises():
    tile = AnalogTile(2, 2)
    with pytest.raises(ValueError):
        managed_mvm(tile, np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        managed_mvm(tile, np.array([np.inf, 0.0]))


def test_frozen_adc_quantization():
    # 1x1 tile, weight 0.6, input 1.0: alpha=1, DAC passes 1.0 exactly,
    # raw output 0.6, ADC level 13 * 24/510
    tile = quiet_tile(1, 1, [[0.6]])
    result = managed_mvm(tile, np.ones(1))
    assert result.y[0] == 13.0 * 24.0 / 510.0
    assert result.bm_iterations == 1


def test_alpha_is_input_max():
    tile = quiet_tile(2, 3, np.full((2, 3), 0.1))
    x = np.array([0.03, -0.2, 0.05])
    result = managed_mvm(tile, x)
    assert result.alpha_used == 0.2
    # hand-computed: y = alpha * adc(W @ dac(x / alpha))
    x_q = quantize(x / 0.2, 7, 1.0)
    expected = 0.2 * quantize(tile.weights @ x_q, 9, 12.0)
    assert np.array_equal(result.y, expected)


def test_noise_mgmt_off_uses_unit_alpha():
    tile = quiet_tile(2, 3, np.full((2, 3), 0.1))
    x = np.array([0.03, -0.2, 0.05])
    result = managed_mvm(tile, x, noise_mgmt=False)
    assert result.alpha_used == 1.0
    expected = quantize(tile.weights @ quantize(x, 7, 1.0), 9, 12.0)
    assert np.array_equal(result.y, expected)


def test_small_signals_survive_noise_management():
    # Without rescaling a 1e-3 input would quantize to a couple of DAC
    # levels; with it the digital result stays proportional.
    tile = quiet_tile(1, 4, np.full((1, 4), 0.25))
    base = managed_mvm(tile, np.full(4, 1.0)).y[0]
    small = managed_mvm(tile, np.full(4, 1e-3)).y[0]
    assert small == pytest.approx(base * 1e-3, rel=1e-12)


class TestBoundManagement:
    # Single-row tiles with known row sum O and x = ones: with the 12.0 ADC
    # bound the doubling loop needs ceil(log2(O / 12)) + 1 attempts. The O
    # values avoid ranges where DAC rounding of 2^-k could flip the count.
    @pytest.mark.parametrize("target,expected_iters", [
        (20.0, 2), (30.0, 3), (50.0, 4), (100.0, 5),
    ])
    def test_iteration_count(self, target, expected_iters):
        tile = quiet_tile(1, 10, np.full((1, 10), target / 10), w_bound=50.0)
        result = managed_mvm(tile, np.ones(10))
        assert result.bm_iterations == expected_iters
        assert result.saturated is False
        assert result.alpha_used == 2.0 ** (expected_iters - 1)

    def test_no_iteration_below_bound(self):
        tile = quiet_tile(1, 10, np.full((1, 10), 1.0), w_bound=50.0)
        result = managed_mvm(tile, np.ones(10))
        assert result.bm_iterations == 1
        assert result.saturated is False

    def test_saturation_is_inclusive(self):
        # raw output exactly 12.0 counts as saturated and triggers a rerun
        tile = quiet_tile(1, 1, [[12.0]], w_bound=50.0)
        result = managed_mvm(tile, np.ones(1))
        assert result.bm_iterations == 2

    def test_backward_never_iterates(self):
        # Transposed read with column sums of 16 > 12: saturation must be
        # reported but not iterated on.
        tile = quiet_tile(2, 10, np.full((2, 10), 8.0), w_bound=50.0)
        result = managed_mvm(tile, np.ones(2), direction="backward")
        assert result.bm_iterations == 1
        assert result.saturated is True
        assert np.all(result.y == 12.0)  # clipped at the ADC bound

    def test_bound_mgmt_off_reports_saturation(self):
        tile = quiet_tile(1, 10, np.full((1, 10), 2.0), w_bound=50.0)
        result = managed_mvm(tile, np.ones(10), bound_mgmt=False)
        assert result.bm_iterations == 1
        assert result.saturated is True

    def test_attempt_cap_reports_residual_saturation(self):
        conv = ConverterConfig(adc_bits=3, adc_bound=0.001)
        tile = quiet_tile(1, 10, np.full((1, 10), 1.0), converters=conv,
                          w_bound=50.0)
        result = managed_mvm(tile, np.ones(10))
        assert result.bm_iterations == 3  # == adc_bits
        assert result.saturated is True

    def test_fresh_noise_per_attempt(self):
        # Each doubling reruns the analog read, so the RNG advances once
        # per attempt.
        device = DeviceConfig(out_noise_std=1e-12, w_bound=50.0)
        tile = AnalogTile(1, 10, device=device, seed=3)
        tile.set_weights(np.full((1, 10), 2.0))  # row sum 20 -> 2 attempts
        managed_mvm(tile, np.ones(10))
        state_two_attempts = tile.rng.bit_generator.state

        tile2 = AnalogTile(1, 10, device=device, seed=3)
        tile2.set_weights(np.full((1, 10), 2.0))
        tile2.mvm(np.ones(10))
        tile2.mvm(np.ones(10))
        assert tile2.rng.bit_generator.state == state_two_attempts


def test_scale_invariance_within_one_ulp():
    # Noise off: arbitrary inputs hit at most 1-2 ulp of difference from the
    # final alpha multiply; power-of-two magnitudes are exercised bit-exactly
    # by the acceptance suite.
    rng = np.random.default_rng(5)
    tile = quiet_tile(6, 8, rng.uniform(-0.5, 0.5, (6, 8)))
    x = rng.uniform(-1, 1, 8)
    base = managed_mvm(tile, x).y
    for c in (1e-6, 1e3):
        scaled = managed_mvm(tile, c * x).y
        np.testing.assert_allclose(scaled, c * base, rtol=1e-14, atol=0)


def test_scale_invariance_power_of_two_bit_exact():
    rng = np.random.default_rng(6)
    tile = quiet_tile(5, 7, rng.uniform(-0.5, 0.5, (5, 7)))
    x = np.sign(rng.uniform(-1, 1, 7)) * 2.0 ** rng.integers(-3, 4, 7)
    base = managed_mvm(tile, x).y
    for c in (0.25, 8.0):
        scaled = managed_mvm(tile, c * x).y
        assert np.array_equal(scaled, c * base)


def test_effective_adc_resolution():
    assert effective_adc_resolution(9, 1) == 9
    assert effective_adc_resolution(9, 3) == 7
    assert effective_adc_resolution(9, 9) == 1
    assert effective_adc_resolution(3, 9) == 1  # floored

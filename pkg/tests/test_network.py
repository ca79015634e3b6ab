"""Network builder, backward scheduling, and checkpoint round trips."""

import json

import numpy as np
import pytest

from xbarsim import (
    AnalogFC, ConverterConfig, DeviceConfig, FloatFC, ZScoreNorm,
    build_network, load_checkpoint, save_checkpoint,
)

QUIET = DeviceConfig(out_noise_std=0.0)
WIDE = ConverterConfig(dac_bits=24, dac_bound=4.0, adc_bits=24, adc_bound=64.0)

MLP = [{"type": "flatten"}, {"type": "fc", "out": 8},
       {"type": "relu"}, {"type": "fc", "out": 4}]


def layer_types(net):
    return [type(l).__name__ for l in net.layers]


class TestBuilder:
    def test_basic_mlp(self):
        net = build_network(MLP, (2, 3, 3), mode="float", seed=0)
        assert layer_types(net) == ["Flatten", "FloatFC", "ReLU", "FloatFC"]
        assert net.layers[1].weights.shape == (8, 18)
        assert net.layers[3].weights.shape == (4, 8)
        assert [l.name for l in net.layers if getattr(l, "name", "")] == ["fc1", "fc2"]

    def test_zscore_skips_first_trainable(self):
        net = build_network(MLP, (9,), mode="float", seed=0, insert_zscore=True)
        assert layer_types(net) == [
            "Flatten", "FloatFC", "ReLU", "ZScoreNorm", "FloatFC"]
        kinds = [s["type"] for s in net.build_info["layer_specs"]]
        assert kinds == ["flatten", "fc", "relu", "zscore", "fc"]

    def test_zscore_input_covers_first(self):
        net = build_network(MLP, (9,), mode="float", seed=0,
                            insert_zscore=True, zscore_input=True)
        kinds = [s["type"] for s in net.build_info["layer_specs"]]
        assert kinds == ["flatten", "zscore", "fc", "relu", "zscore", "fc"]

    def test_explicit_zscore_not_duplicated(self):
        specs = MLP[:3] + [{"type": "zscore"}, MLP[3]]
        net = build_network(specs, (9,), mode="float", seed=0, insert_zscore=True)
        kinds = [s["type"] for s in net.build_info["layer_specs"]]
        assert kinds.count("zscore") == 1

    def test_conv_stack_shapes(self):
        specs = [
            {"type": "conv", "out_channels": 4, "kernel": 3, "pad": 1},
            {"type": "maxpool", "size": 2},
            {"type": "flatten"},
            {"type": "fc", "out": 5},
        ]
        net = build_network(specs, (1, 8, 8), mode="float", seed=1)
        x = np.random.default_rng(0).normal(size=(2, 1, 8, 8))
        y = net.forward(x, training=False)
        assert y.shape == (2, 5)
        assert net.layers[0].weights.shape == (4, 9)

    def test_fc_without_flatten_rejected(self):
        with pytest.raises(ValueError, match="flat"):
            build_network([{"type": "fc", "out": 4}], (1, 4, 4), mode="float")

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError, match="unknown layer type"):
            build_network([{"type": "dropout"}], (4,), mode="float")

    def test_oversized_pool_rejected(self):
        with pytest.raises(ValueError, match="does not fit"):
            build_network([{"type": "maxpool", "size": 5}], (1, 3, 3), mode="float")

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            build_network(MLP, (9,), mode="fp16")

    def test_empty_network_rejected(self):
        with pytest.raises(ValueError):
            build_network([], (4,), mode="float")

    def test_float_and_analog_share_initial_weights(self):
        # with remapping off both modes draw the same fan-in scaled init,
        # so the analog tile starts exactly at the float reference weights
        kwargs = dict(seed=123, device=QUIET, converters=WIDE,
                      remap_enabled=False)
        f = build_network(MLP, (9,), mode="float", **kwargs)
        a = build_network(MLP, (9,), mode="analog", **kwargs)
        for fl, al in zip(f.layers, a.layers):
            if isinstance(fl, FloatFC):
                assert np.array_equal(fl.weights, al.effective_weights())

    def test_layer_seeds_differ_per_layer(self):
        net = build_network(MLP, (9,), mode="float", seed=7)
        assert not np.array_equal(net.layers[1].weights[:4, :8],
                                  net.layers[3].weights)


class TestBackwardScheduling:
    def build(self):
        return build_network(MLP, (9,), mode="analog", seed=3,
                             device=QUIET, converters=WIDE)

    def test_lowest_trainable_skips_input_grad(self):
        net = self.build()
        x = np.random.default_rng(1).uniform(-1, 1, (3, 9))
        logits = net.forward(x, training=True)
        _, dlogits, _ = net.loss.forward(logits, np.array([0, 1, 2]))
        net.backward(dlogits)
        fc1, fc2 = net.analog_layers()
        assert fc1.stats.calls == 3        # forward only
        assert fc2.stats.calls == 6        # forward + transposed read

    def test_update_moves_all_tiles(self):
        net = self.build()
        x = np.random.default_rng(2).uniform(-1, 1, (3, 9))
        before = [l.tile.read_weights().copy() for l in net.analog_layers()]
        logits = net.forward(x, training=True)
        _, dlogits, _ = net.loss.forward(logits, np.array([1, 2, 3]))
        net.backward(dlogits)
        net.update(0.1)
        after = [l.tile.read_weights() for l in net.analog_layers()]
        assert all(not np.array_equal(b, a) for b, a in zip(before, after))

    def test_collect_stats_reset(self):
        net = self.build()
        net.forward(np.ones((2, 9)), training=False)
        stats = net.collect_stats(reset=True)
        assert set(stats) == {"fc1", "fc2"}
        assert all(iters >= 1.0 for iters, _ in stats.values())
        assert net.analog_layers()[0].stats.calls == 0


class TestCheckpoint:
    def build(self, seed=11):
        return build_network(MLP, (9,), mode="analog", seed=seed,
                             converters=WIDE)

    def test_round_trip_preserves_state(self, tmp_path):
        net = self.build()
        rng = np.random.default_rng(4)
        x = rng.uniform(-1, 1, (4, 9))
        logits = net.forward(x, training=True)
        _, d, _ = net.loss.forward(logits, np.array([0, 1, 2, 3]))
        net.backward(d)
        net.update(0.1)
        net.analog_layers()[0].tile.clipped_updates = 5

        path = tmp_path / "ck.npz"
        save_checkpoint(net, path, extra={"epoch": 3})
        probe = rng.uniform(-1, 1, (2, 9))
        y_orig = net.forward(probe, training=False)

        loaded, extra = load_checkpoint(path)
        assert extra == {"epoch": 3}
        assert loaded.analog_layers()[0].tile.clipped_updates == 5
        for orig, new in zip(net.analog_layers(), loaded.analog_layers()):
            assert np.array_equal(orig.tile.read_weights(), new.tile.read_weights())
        # same stored RNG position: the next noisy read must match bit for bit
        y_new = loaded.forward(probe, training=False)
        assert np.array_equal(y_orig, y_new)

    def test_zscore_running_stats_restored(self, tmp_path):
        net = build_network(MLP, (9,), mode="float", seed=2, insert_zscore=True)
        x = np.random.default_rng(5).normal(2.0, 3.0, (8, 9))
        net.forward(x, training=True)
        zs = [l for l in net.layers if isinstance(l, ZScoreNorm)][0]
        path = tmp_path / "ck.npz"
        save_checkpoint(net, path)
        loaded, _ = load_checkpoint(path)
        lz = [l for l in loaded.layers if isinstance(l, ZScoreNorm)][0]
        assert np.array_equal(zs.running_mean, lz.running_mean)
        assert np.array_equal(zs.running_var, lz.running_var)

    def test_float_round_trip(self, tmp_path):
        net = build_network(
            [{"type": "fc", "out": 3, "bias": True}], (5,), mode="float", seed=6)
        net.layers[0].bias[:] = [0.5, -0.25, 0.0]
        path = tmp_path / "ck.npz"
        save_checkpoint(net, path)
        loaded, extra = load_checkpoint(path)
        assert extra == {}
        assert np.array_equal(loaded.layers[0].weights, net.layers[0].weights)
        assert np.array_equal(loaded.layers[0].bias, [0.5, -0.25, 0.0])

    def test_version_mismatch_rejected(self, tmp_path):
        net = self.build()
        path = tmp_path / "ck.npz"
        save_checkpoint(net, path)
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        meta = json.loads(bytes(arrays["meta"]).decode())
        meta["version"] = 99
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        np.savez(path, **arrays)
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(path)

    def test_build_info_round_trips_configs(self, tmp_path):
        dev = DeviceConfig(dw_min=0.00025)
        net = build_network(MLP, (9,), mode="analog", seed=9, device=dev,
                            gamma=0.25)
        path = tmp_path / "ck.npz"
        save_checkpoint(net, path)
        loaded, _ = load_checkpoint(path)
        assert loaded.build_info["device"]["dw_min"] == 0.00025
        assert loaded.build_info["gamma"] == 0.25
        assert isinstance(loaded.analog_layers()[0], AnalogFC)

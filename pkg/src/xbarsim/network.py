"""Sequential network container, declarative builder, and checkpoints.

A network is built from a list of layer descriptions plus the input
shape; the same description builds either the analog network or its
float reference depending on mode. Checkpoints capture every tile's
weights, configs, and exact RNG position, the z-score running statistics,
and the resolved build description, so a run can be re-opened for
inspection or resumed.
"""

import json
from dataclasses import asdict

import numpy as np

from .tile import AnalogTile, DeviceConfig, ConverterConfig
from .pulsed import PulseConfig
from .layers import (
    AnalogFC, AnalogConv2D, FloatFC, FloatConv2D,
    Flatten, ReLU, MaxPool2D, ZScoreNorm, SoftmaxCrossEntropy,
)

CHECKPOINT_VERSION = 1


class Network:
    """Ordered layer stack with a softmax cross-entropy head."""

    def __init__(self, layers, mode, build_info=None):
        self.layers = layers
        self.mode = mode
        self.loss = SoftmaxCrossEntropy()
        self.build_info = build_info or {}
        self._first_param = next(
            (i for i, l in enumerate(layers) if l.has_params), None)

    def forward(self, x, training=True):
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, d):
        """Backpropagate logit gradients down to the lowest trainable layer.

        Layers below the first trainable one never need input gradients,
        so their backward pass (an analog transposed read, on hardware) is
        skipped entirely.
        """
        first = self._first_param
        if first is None:
            return
        for i in range(len(self.layers) - 1, first - 1, -1):
            layer = self.layers[i]
            if layer.has_params:
                d = layer.backward(d, need_input_grad=i > first)
            else:
                d = layer.backward(d)

    def update(self, lr):
        for layer in self.layers:
            if layer.has_params:
                layer.update(lr)

    def analog_layers(self):
        return [l for l in self.layers if isinstance(l, (AnalogFC, AnalogConv2D))]

    def collect_stats(self, reset=True):
        """Per-layer (mean bound-management iterations, saturation rate)."""
        out = {}
        for layer in self.analog_layers():
            out[layer.name] = (layer.stats.mean_iterations,
                               layer.stats.saturation_rate)
            if reset:
                layer.stats.reset()
        return out


def _layer_seed(seed, index):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0, index))
    return int(ss.generate_state(1, np.uint64)[0])


def build_network(layer_specs, input_shape, mode="analog", seed=0,
                  device=None, converters=None, pulse=None,
                  gamma=0.4, remap_enabled=True,
                  insert_zscore=False, zscore_input=False):
    """Build a Network from a declarative layer list.

    layer_specs entries (dicts) by "type":
      fc:      {"type": "fc", "out": int, "bias": bool?}
      conv:    {"type": "conv", "out_channels": int, "kernel": int|[kh, kw],
                "stride": int?, "pad": int?, "bias": bool?}
      relu, flatten, zscore: {"type": ...}
      maxpool: {"type": "maxpool", "size": int?, "stride": int?}

    input_shape is (channels, height, width) or (features,). With
    insert_zscore a z-score norm is placed before every trainable layer
    except the first; zscore_input adds one before the first as well.
    Shapes are validated here, before any compute.
    """
    if mode not in ("analog", "float"):
        raise ValueError(f"mode must be 'analog' or 'float', got {mode!r}")
    if not layer_specs:
        raise ValueError("network needs at least one layer")
    device = device if device is not None else DeviceConfig()
    converters = converters if converters is not None else ConverterConfig()
    pulse = pulse if pulse is not None else PulseConfig()

    resolved = []
    param_seen = 0
    for spec in layer_specs:
        kind = spec.get("type")
        if kind in ("fc", "conv"):
            if insert_zscore and (param_seen > 0 or zscore_input):
                if not (resolved and resolved[-1]["type"] == "zscore"):
                    resolved.append({"type": "zscore"})
            param_seen += 1
        resolved.append(dict(spec))

    layers = []
    shape = tuple(input_shape)
    counters = {"fc": 0, "conv": 0}
    param_index = 0
    for pos, spec in enumerate(resolved):
        kind = spec.get("type")
        if kind == "flatten":
            layers.append(Flatten())
            shape = (int(np.prod(shape)),)
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "zscore":
            layers.append(ZScoreNorm())
        elif kind == "maxpool":
            size = spec.get("size", 2)
            stride = spec.get("stride", size)
            if len(shape) != 3:
                raise ValueError(f"layer {pos}: maxpool needs (c, h, w) input, have {shape}")
            c, h, w = shape
            oh = (h - size) // stride + 1
            ow = (w - size) // stride + 1
            if oh < 1 or ow < 1:
                raise ValueError(f"layer {pos}: pool {size} does not fit input {h}x{w}")
            layers.append(MaxPool2D(size, stride))
            shape = (c, oh, ow)
        elif kind == "fc":
            if len(shape) != 1:
                raise ValueError(
                    f"layer {pos}: fc needs flat input, have {shape} (missing flatten?)")
            d_in, d_out = shape[0], int(spec["out"])
            bias = bool(spec.get("bias", False))
            counters["fc"] += 1
            name = f"fc{counters['fc']}"
            lseed = _layer_seed(seed, param_index)
            if mode == "analog":
                layers.append(AnalogFC(
                    d_in, d_out, device, converters, pulse,
                    gamma=gamma, remap_enabled=remap_enabled,
                    seed=lseed, bias=bias, name=name))
            else:
                layers.append(FloatFC(
                    d_in, d_out, np.random.default_rng(lseed), bias=bias, name=name))
            shape = (d_out,)
            param_index += 1
        elif kind == "conv":
            if len(shape) != 3:
                raise ValueError(f"layer {pos}: conv needs (c, h, w) input, have {shape}")
            c, h, w = shape
            out_c = int(spec["out_channels"])
            kernel = spec["kernel"]
            kh, kw = (kernel, kernel) if np.isscalar(kernel) else kernel
            stride = int(spec.get("stride", 1))
            pad = int(spec.get("pad", 0))
            oh = (h + 2 * pad - kh) // stride + 1
            ow = (w + 2 * pad - kw) // stride + 1
            if oh < 1 or ow < 1:
                raise ValueError(
                    f"layer {pos}: kernel {kh}x{kw} stride {stride} pad {pad} "
                    f"does not fit input {h}x{w}")
            bias = bool(spec.get("bias", False))
            counters["conv"] += 1
            name = f"conv{counters['conv']}"
            lseed = _layer_seed(seed, param_index)
            if mode == "analog":
                layers.append(AnalogConv2D(
                    c, out_c, (kh, kw), stride, pad, device, converters, pulse,
                    gamma=gamma, remap_enabled=remap_enabled,
                    seed=lseed, bias=bias, name=name))
            else:
                layers.append(FloatConv2D(
                    c, out_c, (kh, kw), stride, pad,
                    rng=np.random.default_rng(lseed), bias=bias, name=name))
            shape = (out_c, oh, ow)
            param_index += 1
        else:
            raise ValueError(f"layer {pos}: unknown layer type {kind!r}")

    build_info = {
        "layer_specs": resolved,
        "input_shape": list(input_shape),
        "mode": mode,
        "seed": seed,
        "device": asdict(device),
        "converters": asdict(converters),
        "pulse": asdict(pulse),
        "gamma": gamma,
        "remap_enabled": remap_enabled,
    }
    return Network(layers, mode, build_info)


def save_checkpoint(network, path, extra=None):
    """Write the full network state to one .npz file.

    Arrays are stored per layer index; everything non-array (configs, RNG
    positions, the build description, caller extras) lands in one JSON
    string under "meta". The format is documented in the README.
    """
    arrays = {}
    meta = {
        "version": CHECKPOINT_VERSION,
        "build": network.build_info,
        "tiles": {},
        "extra": extra or {},
    }
    for i, layer in enumerate(network.layers):
        if isinstance(layer, (AnalogFC, AnalogConv2D)):
            state = layer.tile.state_dict()
            arrays[f"layer{i}_weights"] = state["weights"]
            meta["tiles"][str(i)] = {
                "seed": state["seed"],
                "rng_state": state["rng_state"],
                "clipped_updates": state["clipped_updates"],
            }
            if layer.bias is not None:
                arrays[f"layer{i}_bias"] = layer.bias
        elif isinstance(layer, (FloatFC, FloatConv2D)):
            arrays[f"layer{i}_weights"] = layer.weights
            if layer.bias is not None:
                arrays[f"layer{i}_bias"] = layer.bias
        elif isinstance(layer, ZScoreNorm) and layer.running_mean is not None:
            arrays[f"layer{i}_running_mean"] = layer.running_mean
            arrays[f"layer{i}_running_var"] = layer.running_var
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Rebuild a network from a checkpoint. Returns (network, extra)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        build = meta["build"]
        network = build_network(
            build["layer_specs"], tuple(build["input_shape"]),
            mode=build["mode"], seed=build["seed"],
            device=DeviceConfig(**build["device"]),
            converters=ConverterConfig(**build["converters"]),
            pulse=PulseConfig(**build["pulse"]),
            gamma=build["gamma"], remap_enabled=build["remap_enabled"],
        )
        for i, layer in enumerate(network.layers):
            if isinstance(layer, (AnalogFC, AnalogConv2D)):
                tile_meta = meta["tiles"][str(i)]
                layer.tile.weights[:] = data[f"layer{i}_weights"]
                layer.tile.rng.bit_generator.state = json.loads(tile_meta["rng_state"])
                layer.tile.clipped_updates = int(tile_meta["clipped_updates"])
                if layer.bias is not None:
                    layer.bias[:] = data[f"layer{i}_bias"]
            elif isinstance(layer, (FloatFC, FloatConv2D)):
                layer.weights[:] = data[f"layer{i}_weights"]
                if layer.bias is not None:
                    layer.bias[:] = data[f"layer{i}_bias"]
            elif isinstance(layer, ZScoreNorm):
                key = f"layer{i}_running_mean"
                if key in data:
                    layer.running_mean = data[key].copy()
                    layer.running_var = data[f"layer{i}_running_var"].copy()
        return network, meta["extra"]

"""Experiment configuration: defaults, merging, validation, object building.

A run is described by one JSON document. Presets and user files are
deep-merged over the defaults; validation happens before any compute and
reports the offending field by its dotted path.
"""

import copy
import json
import os

import numpy as np

from .tile import DeviceConfig, ConverterConfig
from .pulsed import PulseConfig
from .trainer import TrainConfig
from .data import (
    AugmentConfig, load_idx, load_cifar_binary, make_synthetic,
    make_synthetic_images,
)
from .network import build_network
from .presets import PRESETS

DATA_ROOT_ENV = "XBARSIM_DATA_ROOT"


class ConfigError(Exception):
    """Invalid or incomplete run configuration; message names the field."""


DEFAULT_CONFIG = {
    "seed": 0,
    "mode": "analog",
    "dataset": {"kind": "blobs"},
    "augment": {
        "mirror": False,
        "color_jitter": 0.0,
        "scale_jitter": 1.0,
        "random_crop": False,
        "shuffle_per_epoch": True,
    },
    "device": {
        "dw_min": 0.001,
        "dw_min_std_ratio": 0.3,
        "w_bound": 0.6,
        "out_noise_std": 0.06,
    },
    "converters": {
        "dac_bits": 7,
        "dac_bound": 1.0,
        "adc_bits": 9,
        "adc_bound": 12.0,
    },
    "pulse": {"bl_max": 31, "combo_count": 2},
    "remap": {"enabled": True, "gamma": 0.4},
    "zscore": {"insert": True, "input": False},
    "network": [
        {"type": "fc", "out": 32},
        {"type": "relu"},
        {"type": "fc", "out": 4},
    ],
    "train": {
        "lr0": 0.1,
        "decay_factor": 1.0,
        "decay_every": 1,
        "epochs": 5,
        "batch_size": 10,
    },
    "eval_batch": 256,
    "checkpoint_every": 0,
}

_DATASET_DEFAULTS = {
    "blobs": {"classes": 4, "dims": 16, "n_train": 2000, "n_test": 500,
              "separation": 3.0, "gen_seed": None},
    "synthetic-images": {"classes": 10, "n_train": 10000, "n_test": 2000,
                         "noise": 0.15, "shift": 2, "overlap": 0.75,
                         "gen_seed": None},
    "idx": {"root": None, "limit_train": None, "limit_test": None},
    "cifar10": {"root": None, "limit_train": None, "limit_test": None},
}


def deep_merge(base, override):
    """Recursively merge override into a copy of base. Lists replace."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(preset=None, config_path=None, overrides=None):
    """Layer defaults <- preset <- config file <- CLI overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"preset: unknown preset {preset!r} "
                f"(available: {', '.join(sorted(PRESETS))})")
        cfg = deep_merge(cfg, PRESETS[preset])
    if config_path is not None:
        try:
            with open(config_path) as f:
                user = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {config_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: {config_path} is not valid JSON ({e})")
        if not isinstance(user, dict):
            raise ConfigError("config: top level must be a JSON object")
        cfg = deep_merge(cfg, user)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def _require(cfg, key, types, path):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}: missing")
    if not isinstance(cfg[key], types):
        raise ConfigError(
            f"{path}.{key}: expected {types}, got {type(cfg[key]).__name__}")
    return cfg[key]


def validate_config(cfg):
    known = set(DEFAULT_CONFIG)
    for key in cfg:
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration key")
    if cfg["mode"] not in ("analog", "float"):
        raise ConfigError(f"mode: must be 'analog' or 'float', got {cfg['mode']!r}")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed: must be an integer")
    ds = cfg["dataset"]
    if not isinstance(ds, dict) or "kind" not in ds:
        raise ConfigError("dataset.kind: missing")
    if ds["kind"] not in _DATASET_DEFAULTS:
        raise ConfigError(
            f"dataset.kind: unknown kind {ds['kind']!r} "
            f"(available: {', '.join(sorted(_DATASET_DEFAULTS))})")
    for key in ds:
        if key != "kind" and key not in _DATASET_DEFAULTS[ds["kind"]]:
            raise ConfigError(f"dataset.{key}: not a setting of kind {ds['kind']!r}")
    if not isinstance(cfg["network"], list) or not cfg["network"]:
        raise ConfigError("network: must be a non-empty list of layer objects")
    for i, layer in enumerate(cfg["network"]):
        if not isinstance(layer, dict) or "type" not in layer:
            raise ConfigError(f"network[{i}].type: missing")
    # Dataclass constructors enforce the numeric constraints; surface their
    # complaints under the right field name.
    for section, builder in (
        ("device", DeviceConfig), ("converters", ConverterConfig),
        ("pulse", PulseConfig), ("augment", AugmentConfig),
    ):
        try:
            builder(**cfg[section])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{section}: {e}")
    try:
        TrainConfig(seed=cfg["seed"], mode=cfg["mode"], **cfg["train"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"train: {e}")
    remap = cfg["remap"]
    if not isinstance(remap.get("enabled"), bool):
        raise ConfigError("remap.enabled: must be true or false")
    gamma = remap.get("gamma")
    if not isinstance(gamma, (int, float)) or not 0 < gamma <= 1:
        raise ConfigError(f"remap.gamma: must be in (0, 1], got {gamma!r}")


def _dataset_params(cfg):
    ds = dict(_DATASET_DEFAULTS[cfg["dataset"]["kind"]])
    ds.update(cfg["dataset"])
    return ds


def load_datasets(cfg):
    """Build (train, test) Dataset objects for the configured source."""
    ds = _dataset_params(cfg)
    kind = ds["kind"]
    if kind in ("idx", "cifar10"):
        root = ds.get("root") or os.environ.get(DATA_ROOT_ENV)
        if not root:
            raise ConfigError(
                f"dataset.root: set a directory or the {DATA_ROOT_ENV} "
                "environment variable")
        if not os.path.isdir(root):
            raise ConfigError(f"dataset.root: {root} is not a directory")
        loader = load_idx if kind == "idx" else load_cifar_binary
        try:
            train = loader(root, "train", limit=ds["limit_train"])
            test = loader(root, "test", limit=ds["limit_test"])
        except (FileNotFoundError, ValueError) as e:
            raise ConfigError(f"dataset.root: {e}")
        return train, test
    gen_seed = ds["gen_seed"] if ds["gen_seed"] is not None else cfg["seed"]
    if kind == "blobs":
        train = make_synthetic(ds["classes"], ds["dims"], ds["n_train"],
                               gen_seed, ds["separation"], "train")
        test = make_synthetic(ds["classes"], ds["dims"], ds["n_test"],
                              gen_seed, ds["separation"], "test")
        return train, test
    train = make_synthetic_images(ds["n_train"], gen_seed, "train",
                                  classes=ds["classes"], noise=ds["noise"],
                                  shift=ds["shift"], overlap=ds["overlap"])
    test = make_synthetic_images(ds["n_test"], gen_seed, "test",
                                 classes=ds["classes"], noise=ds["noise"],
                                 shift=ds["shift"], overlap=ds["overlap"])
    return train, test


def network_from_config(cfg, input_shape):
    try:
        return build_network(
            cfg["network"], input_shape,
            mode=cfg["mode"], seed=cfg["seed"],
            device=DeviceConfig(**cfg["device"]),
            converters=ConverterConfig(**cfg["converters"]),
            pulse=PulseConfig(**cfg["pulse"]),
            gamma=cfg["remap"]["gamma"],
            remap_enabled=cfg["remap"]["enabled"],
            insert_zscore=cfg["zscore"]["insert"],
            zscore_input=cfg["zscore"]["input"],
        )
    except ValueError as e:
        raise ConfigError(f"network: {e}")


def train_config_from(cfg):
    return TrainConfig(seed=cfg["seed"], mode=cfg["mode"], **cfg["train"])


def augment_from(cfg):
    return AugmentConfig(**cfg["augment"])


def input_shape_of(dataset):
    return tuple(dataset.images.shape[1:])

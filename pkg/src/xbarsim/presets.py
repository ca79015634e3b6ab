"""Named experiment presets, merged over the default config by the CLI.

Device presets pin the published crossbar constants; training presets
bundle a dataset, network, and schedule so an experiment is a one-line
invocation.
"""

PRESETS = {
    # Baseline crossbar device: 1200 weight states, 7/9-bit converters.
    "baseline": {},
    # Same device with 4x more weight states.
    "states-4x": {
        "device": {"dw_min": 0.00025},
    },
    # Large-fan-in device variant with 12000 weight states.
    "states-12k": {
        "device": {"dw_min": 0.0001},
    },
    # Desk-scale MLP run on the synthetic image set: trains in minutes on a
    # laptop and shows the remapping/management effects end to end.
    "mlp-desk": {
        "mode": "analog",
        "dataset": {
            "kind": "synthetic-images",
            "n_train": 10000,
            "n_test": 2000,
            "gen_seed": 7,
        },
        "network": [
            {"type": "flatten"},
            {"type": "fc", "out": 300},
            {"type": "relu"},
            {"type": "fc", "out": 10},
        ],
        "zscore": {"insert": True},
        "remap": {"enabled": True, "gamma": 0.4},
        "train": {
            "lr0": 0.1,
            "decay_factor": 0.8,
            "decay_every": 5,
            "epochs": 10,
            "batch_size": 10,
        },
    },
    # Small CIFAR-10 CNN with weak augmentation (mirroring plus color
    # jitter) and the published schedule: lr 0.1, x0.8 every 20 epochs,
    # batch 100. Needs the CIFAR-10 binary batches on disk.
    "cnn-weak-aug": {
        "mode": "analog",
        "dataset": {"kind": "cifar10"},
        "augment": {"mirror": True, "color_jitter": 0.1},
        "network": [
            {"type": "conv", "out_channels": 32, "kernel": 5, "pad": 2},
            {"type": "relu"},
            {"type": "maxpool", "size": 3, "stride": 2},
            {"type": "conv", "out_channels": 32, "kernel": 5, "pad": 2},
            {"type": "relu"},
            {"type": "maxpool", "size": 3, "stride": 2},
            {"type": "conv", "out_channels": 64, "kernel": 5, "pad": 2},
            {"type": "relu"},
            {"type": "maxpool", "size": 3, "stride": 2},
            {"type": "flatten"},
            {"type": "fc", "out": 10},
        ],
        "zscore": {"insert": True},
        "remap": {"enabled": True, "gamma": 0.4},
        "train": {
            "lr0": 0.1,
            "decay_factor": 0.8,
            "decay_every": 20,
            "epochs": 140,
            "batch_size": 100,
        },
    },
}

"""Command-line interface.

    xbarsim run --preset mlp-desk --out runs/desk
    xbarsim run --config exp.json --seed 3 --mode float --out runs/ref
    xbarsim inspect runs/desk/final.npz
    xbarsim compare runs/desk/metrics.csv runs/ref/metrics.csv

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import (
    ConfigError, resolve_config, load_datasets, network_from_config,
    train_config_from, augment_from, input_shape_of,
)
from .layers import AnalogFC, AnalogConv2D
from .network import load_checkpoint, save_checkpoint
from .remap import snr_estimate
from .tile import count_states
from .trainer import train, TrainingDiverged


def _cmd_run(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    cfg = resolve_config(preset=args.preset, config_path=args.config,
                         overrides=overrides)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)

    train_ds, test_ds = load_datasets(cfg)
    network = network_from_config(cfg, input_shape_of(train_ds))
    tcfg = train_config_from(cfg)
    states = (f"{count_states(network.analog_layers()[0].tile.device):g}"
              if network.analog_layers() else "n/a")
    print(f"mode={cfg['mode']}  train={train_ds.images.shape[0]}  "
          f"test={test_ds.images.shape[0]}  input={input_shape_of(train_ds)}  "
          f"device states={states}")
    metrics = train(
        network, train_ds, test_ds, tcfg,
        augment_cfg=augment_from(cfg),
        metrics_path=os.path.join(out_dir, "metrics.csv"),
        checkpoint_every=cfg["checkpoint_every"],
        checkpoint_dir=out_dir,
        log=print,
    )
    save_checkpoint(network, os.path.join(out_dir, "final.npz"),
                    extra={"epoch": tcfg.epochs, "seed": tcfg.seed})
    if metrics:
        print(f"final test error: {metrics[-1].test_err:.2f}%")
    print(f"wrote {out_dir}/metrics.csv, {out_dir}/config.json, {out_dir}/final.npz")
    return 0


def _ascii_hist(values, bins=20, width=40):
    counts, edges = np.histogram(values, bins=bins)
    peak = counts.max() if counts.max() > 0 else 1
    lines = []
    for i, count in enumerate(counts):
        bar = "#" * int(round(width * count / peak))
        lines.append(f"  [{edges[i]:+8.4f}, {edges[i + 1]:+8.4f})  {count:7d}  {bar}")
    return "\n".join(lines)


def _cmd_inspect(args):
    network, extra = load_checkpoint(args.checkpoint)
    print(f"checkpoint: {args.checkpoint}")
    print(f"mode: {network.mode}   extra: {extra}")
    analog = network.analog_layers()
    if not analog:
        print("no analog layers (float reference checkpoint)")
    probe_rng = np.random.default_rng(0)
    for layer in analog:
        tile = layer.tile
        w = tile.read_weights()
        device = tile.device
        near_bound = np.mean(np.abs(w) >= device.w_bound - device.dw_min)
        span = (w.max() - w.min()) / device.dw_min
        print(f"\nlayer {layer.name}: tile {tile.d_out}x{tile.d_in}, "
              f"{count_states(device):g} states, out_scale {layer.remap.out_scale:.5f}")
        print(f"  weight range [{w.min():+.4f}, {w.max():+.4f}], mean {w.mean():+.5f}")
        print(f"  bound saturation fraction: {near_bound:.4f}")
        print(f"  states spanned: {span:.0f} of {count_states(device):g}")
        print(f"  updates with clipped pulse probabilities: {tile.clipped_updates}")
        probe = probe_rng.normal(0.0, 1.0, (256, tile.d_in))
        snr = snr_estimate(tile, layer.remap, probe)
        if np.all(np.isfinite(snr)):
            print(f"  output SNR on unit-Gaussian probe: median {np.median(snr):.1f}, "
                  f"min {snr.min():.1f}, max {snr.max():.1f}")
        else:
            print("  output SNR: infinite (noiseless device)")
        print(_ascii_hist(w.ravel()))
    return 0


def _read_metrics(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{path}: empty metrics file")
    return rows


def _cmd_compare(args):
    rows_a = _read_metrics(args.a)
    rows_b = _read_metrics(args.b)
    by_epoch_b = {r["epoch"]: r for r in rows_b}
    print(f"{'epoch':>5}  {'test_err A':>10}  {'test_err B':>10}  {'delta':>8}")
    shared = 0
    for row in rows_a:
        other = by_epoch_b.get(row["epoch"])
        if other is None:
            continue
        shared += 1
        a = float(row["test_err"])
        b = float(other["test_err"])
        print(f"{row['epoch']:>5}  {a:10.3f}  {b:10.3f}  {b - a:+8.3f}")
    if shared == 0:
        raise ValueError("metrics files share no epochs")
    last_a = float(rows_a[-1]["test_err"])
    last_b = float(rows_b[-1]["test_err"])
    print(f"final: A {last_a:.3f}%  B {last_b:.3f}%  delta {last_b - last_a:+.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="xbarsim",
        description="Train neural networks on simulated analog crossbar arrays.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a training experiment")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--preset", help="named preset to start from")
    p_run.add_argument("--out", default="runs/out", help="output directory")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--mode", choices=["analog", "float"],
                       help="override the execution mode")
    p_run.set_defaults(func=_cmd_run)

    p_inspect = sub.add_parser("inspect", help="summarize a checkpoint")
    p_inspect.add_argument("checkpoint")
    p_inspect.set_defaults(func=_cmd_inspect)

    p_compare = sub.add_parser("compare", help="diff two metrics.csv files")
    p_compare.add_argument("a")
    p_compare.add_argument("b")
    p_compare.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (TrainingDiverged, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

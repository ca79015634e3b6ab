"""SGD training harness shared by analog and float-reference networks.

Plain SGD without momentum or weight decay: per batch the network runs a
full forward pass, the loss produces per-sample logit gradients, a full
backward pass distributes them, and every trainable layer applies its
update. Analog layers stream per-sample pulsed updates (the learning rate
is divided by the batch size); float layers take one mean-gradient step.
The learning rate follows a step decay schedule, and a divergence guard
aborts on non-finite or runaway loss.

Shuffle and augmentation randomness are derived per (seed, epoch), so a
resumed run replays the exact remaining schedule. Training batches are
formed after a seeded shuffle; a trailing batch of size 1 is dropped
because batch statistics are undefined for it.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .data import channel_stats, apply_stats, augment, AugmentConfig


class TrainingDiverged(RuntimeError):
    """Loss became non-finite or exceeded the divergence threshold."""


DIVERGENCE_THRESHOLD = 1e4


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.1
    decay_factor: float = 1.0
    decay_every: int = 1
    epochs: int = 10
    batch_size: int = 10
    seed: int = 0
    mode: str = "analog"

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if not 0 < self.decay_factor <= 1:
            raise ValueError(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        if self.decay_every < 1:
            raise ValueError(f"decay_every must be >= 1, got {self.decay_every}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.mode not in ("analog", "float"):
            raise ValueError(f"mode must be 'analog' or 'float', got {self.mode!r}")


@dataclass
class EpochMetrics:
    epoch: int  # 1-based
    train_loss: float
    train_err: float  # percent
    test_err: float  # percent
    lr: float
    layer_stats: dict  # name -> (mean bm iterations, saturation rate)


def lr_for_epoch(epoch_idx, cfg):
    """Learning rate during 0-based epoch epoch_idx under step decay."""
    return cfg.lr0 * cfg.decay_factor ** (epoch_idx // cfg.decay_every)


def _stream_rng(seed, stream_id, epoch):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id, epoch))
    return np.random.default_rng(ss)


def evaluate(network, images, labels, batch_size=256):
    """Test error in percent; z-score norms run in test mode, analog noise
    stays active because inference runs on the same hardware."""
    n = images.shape[0]
    if n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    wrong = 0
    for start in range(0, n, batch_size):
        xb = images[start:start + batch_size]
        yb = labels[start:start + batch_size]
        logits = network.forward(xb, training=False)
        wrong += int(np.sum(logits.argmax(axis=1) != yb))
    return 100.0 * wrong / n


def _metrics_header(network):
    cols = ["epoch", "train_loss", "train_err", "test_err", "lr"]
    for layer in network.analog_layers():
        cols.append(f"{layer.name}_bm_iters")
        cols.append(f"{layer.name}_sat_rate")
    return cols


def _metrics_row(m, network):
    row = [m.epoch, repr(m.train_loss), repr(m.train_err), repr(m.test_err), repr(m.lr)]
    for layer in network.analog_layers():
        iters, sat = m.layer_stats.get(layer.name, (0.0, 0.0))
        row.append(repr(iters))
        row.append(repr(sat))
    return row


def train(network, train_data, test_data, cfg, augment_cfg=None,
          metrics_path=None, checkpoint_every=0, checkpoint_dir=None,
          start_epoch=0, log=None):
    """Train a built network. Returns the list of per-epoch metrics.

    train_data/test_data are Dataset objects holding raw inputs; per-channel
    statistics of the training split standardize both splits (training
    batches are standardized after augmentation). Metrics are appended to
    metrics_path per epoch when given; checkpoints go to checkpoint_dir
    every checkpoint_every epochs when both are set.
    """
    from .network import save_checkpoint

    if augment_cfg is None:
        augment_cfg = AugmentConfig()
    n = train_data.images.shape[0]
    if n == 0:
        raise ValueError("training split is empty")
    stats = channel_stats(train_data.images)
    test_images = apply_stats(test_data.images, stats)
    augment_active = (augment_cfg.mirror or augment_cfg.color_jitter > 0
                      or augment_cfg.scale_jitter > 1)

    writer = None
    csv_file = None
    if metrics_path is not None:
        fresh = start_epoch == 0
        csv_file = open(metrics_path, "a" if not fresh else "w", newline="")
        writer = csv.writer(csv_file)
        if fresh:
            writer.writerow(_metrics_header(network))
            csv_file.flush()

    metrics = []
    try:
        for epoch_idx in range(start_epoch, cfg.epochs):
            lr = lr_for_epoch(epoch_idx, cfg)
            perm_epoch = epoch_idx if augment_cfg.shuffle_per_epoch else 0
            perm = _stream_rng(cfg.seed, 1, perm_epoch).permutation(n)
            aug_rng = _stream_rng(cfg.seed, 2, epoch_idx)

            loss_sum = 0.0
            err_sum = 0.0
            seen = 0
            for start in range(0, n, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                if idx.shape[0] < 2 and cfg.batch_size > 1:
                    continue  # batch statistics undefined for one sample
                xb = train_data.images[idx]
                if augment_active:
                    xb = augment(xb, augment_cfg, aug_rng)
                xb = apply_stats(xb, stats)
                yb = train_data.labels[idx]

                logits = network.forward(xb, training=True)
                loss, dlogits, err = network.loss.forward(logits, yb)
                if not np.isfinite(loss) or loss > DIVERGENCE_THRESHOLD:
                    raise TrainingDiverged(
                        f"loss {loss} at epoch {epoch_idx + 1}, "
                        f"batch {start // cfg.batch_size + 1}")
                network.backward(dlogits)
                network.update(lr)
                loss_sum += loss * idx.shape[0]
                err_sum += err * idx.shape[0]
                seen += idx.shape[0]

            test_err = evaluate(network, test_images, test_data.labels)
            m = EpochMetrics(
                epoch=epoch_idx + 1,
                train_loss=loss_sum / max(seen, 1),
                train_err=err_sum / max(seen, 1),
                test_err=test_err,
                lr=lr,
                layer_stats=network.collect_stats(reset=True),
            )
            metrics.append(m)
            if writer is not None:
                writer.writerow(_metrics_row(m, network))
                csv_file.flush()
            if log is not None:
                log(f"epoch {m.epoch}/{cfg.epochs}  lr {m.lr:.5f}  "
                    f"loss {m.train_loss:.4f}  train_err {m.train_err:.2f}%  "
                    f"test_err {m.test_err:.2f}%")
            if (checkpoint_every and checkpoint_dir is not None
                    and (epoch_idx + 1) % checkpoint_every == 0):
                save_checkpoint(
                    network, f"{checkpoint_dir}/epoch{epoch_idx + 1:04d}.npz",
                    extra={"epoch": epoch_idx + 1, "seed": cfg.seed})
    finally:
        if csv_file is not None:
            csv_file.close()
    return metrics

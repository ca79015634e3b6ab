"""Simulator for training neural networks on analog resistive crossbar arrays."""

from .backend import active_backend, HAS_NUMBA
from .tile import (
    AnalogTile, DeviceConfig, ConverterConfig,
    quantize, quant_step, detect_saturation, count_states,
)
from .pulsed import (
    PulseConfig, UpdateScales, compute_update_scales,
    generate_pulse_trains, pulsed_update, pulsed_update_batch,
)
from .management import MvmResult, managed_mvm, effective_adc_resolution
from .remap import (
    RemapConfig, make_remap, remapped_mvm, remapped_lr,
    init_weights, snr_estimate,
)
from .layers import (
    AnalogFC, AnalogConv2D, FloatFC, FloatConv2D,
    Flatten, ReLU, MaxPool2D, ZScoreNorm, SoftmaxCrossEntropy,
    im2col, col2im,
)
from .network import Network, build_network, save_checkpoint, load_checkpoint
from .trainer import (
    TrainConfig, EpochMetrics, TrainingDiverged,
    lr_for_epoch, train, evaluate,
)
from .data import (
    Dataset, AugmentConfig, read_idx, write_idx, load_idx,
    load_cifar_binary, make_synthetic, make_synthetic_images,
    save_idx_dataset, channel_stats, apply_stats, augment,
)
from .config import ConfigError, resolve_config, DEFAULT_CONFIG
from .presets import PRESETS

__version__ = "0.1.0"

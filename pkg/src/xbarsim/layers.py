"""Network layers: analog crossbar operators, their float twins, and the
digital ops between them.

Analog layers route every sample through managed analog matrix-vector
products and train with stochastic pulsed updates streamed per sample.
Float layers implement the same interface with plain dense arithmetic and
mean-gradient SGD; they never touch the pulse, quantization, or noise
paths and serve as the digital reference.

Gradient convention: the loss hands back per-sample logit gradients
without the 1/batch factor. Float layers divide by the batch size inside
update(); analog layers divide the learning rate instead, so both realize
the same mean-gradient step in expectation.
"""

import math

import numpy as np

from .tile import AnalogTile
from .pulsed import PulseConfig, pulsed_update_batch
from .management import managed_mvm
from .remap import make_remap, remapped_mvm, remapped_lr, init_weights


class MgmtStats:
    """Accumulated bound-management behavior of one analog layer."""

    def __init__(self):
        self.calls = 0
        self.iter_sum = 0
        self.saturated = 0

    def record(self, result):
        self.calls += 1
        self.iter_sum += result.bm_iterations
        self.saturated += int(result.saturated)

    def reset(self):
        self.calls = 0
        self.iter_sum = 0
        self.saturated = 0

    @property
    def mean_iterations(self):
        return self.iter_sum / self.calls if self.calls else 0.0

    @property
    def saturation_rate(self):
        return self.saturated / self.calls if self.calls else 0.0


class Layer:
    has_params = False
    name = ""

    def forward(self, x, training=True):
        raise NotImplementedError

    def backward(self, d):
        raise NotImplementedError

    def update(self, lr):
        pass


class Flatten(Layer):
    def forward(self, x, training=True):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, d):
        return d.reshape(self._shape)


class ReLU(Layer):
    def forward(self, x, training=True):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, d):
        return np.where(self._mask, d, 0.0)


class MaxPool2D(Layer):
    """Max pooling over square windows; gradient routes to the first argmax."""

    def __init__(self, size=2, stride=None):
        if size < 1:
            raise ValueError(f"pool size must be >= 1, got {size}")
        self.size = size
        self.stride = stride if stride is not None else size

    def forward(self, x, training=True):
        k, s = self.size, self.stride
        if x.ndim != 4:
            raise ValueError(f"max pooling expects (n, c, h, w) input, got {x.shape}")
        win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
        win = win[:, :, ::s, ::s]
        n, c, oh, ow = win.shape[:4]
        flat = win.reshape(n, c, oh, ow, k * k)
        self._argmax = flat.argmax(axis=-1)
        self._in_shape = x.shape
        return flat.max(axis=-1)

    def backward(self, d):
        k, s = self.size, self.stride
        n, c, oh, ow = d.shape
        dx = np.zeros(self._in_shape)
        for p in range(k * k):
            dy, dw = divmod(p, k)
            contrib = np.where(self._argmax == p, d, 0.0)
            dx[:, :, dy:dy + s * oh:s, dw:dw + s * ow:s] += contrib
        return dx


class ZScoreNorm(Layer):
    """Channel-wise standardization with running statistics, no learned affine.

    Training mode standardizes with the population statistics of the current
    batch (over batch and spatial axes for 4-D inputs, over the batch for
    2-D) and folds them into running estimates; test mode standardizes with
    the running estimates.
    """

    def __init__(self, momentum=0.1, eps=1e-5):
        self.momentum = momentum
        self.eps = eps
        self.running_mean = None
        self.running_var = None
        self._cache = None

    def _axes(self, x):
        if x.ndim == 2:
            return (0,)
        if x.ndim == 4:
            return (0, 2, 3)
        raise ValueError(f"z-score norm expects 2-D or 4-D input, got {x.shape}")

    def _init_stats(self, n_channels):
        self.running_mean = np.zeros(n_channels)
        self.running_var = np.ones(n_channels)

    def forward(self, x, training=True):
        axes = self._axes(x)
        n_channels = x.shape[1]
        if self.running_mean is None:
            self._init_stats(n_channels)
        elif self.running_mean.shape[0] != n_channels:
            raise ValueError(
                f"input has {n_channels} channels, stats track {self.running_mean.shape[0]}"
            )
        stat_shape = (1, n_channels) if x.ndim == 2 else (1, n_channels, 1, 1)
        if training:
            if x.shape[0] < 2:
                raise ValueError("z-score norm needs batch size >= 2 in training mode")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)  # population variance
            m = self.momentum
            self.running_mean = (1.0 - m) * self.running_mean + m * mean
            self.running_var = (1.0 - m) * self.running_var + m * var
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean.reshape(stat_shape)) * inv_std.reshape(stat_shape)
            self._cache = (x_hat, inv_std.reshape(stat_shape), axes)
            return x_hat
        mean = self.running_mean.reshape(stat_shape)
        var = self.running_var.reshape(stat_shape)
        return (x - mean) / np.sqrt(var + self.eps)

    def backward(self, d):
        if self._cache is None:
            raise RuntimeError("z-score backward called before a training forward")
        x_hat, inv_std, axes = self._cache
        count = d.size // d.shape[1]
        mean_d = d.sum(axis=axes, keepdims=True) / count
        mean_d_xhat = (d * x_hat).sum(axis=axes, keepdims=True) / count
        return inv_std * (d - mean_d - x_hat * mean_d_xhat)


class SoftmaxCrossEntropy:
    """Softmax + cross-entropy head returning per-sample logit gradients."""

    def forward(self, logits, labels):
        logits = np.asarray(logits, dtype=np.float64)
        labels = np.asarray(labels)
        n = logits.shape[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_p = shifted - log_z
        loss = -float(np.mean(log_p[np.arange(n), labels]))
        dlogits = np.exp(log_p)
        dlogits[np.arange(n), labels] -= 1.0
        err = 100.0 * float(np.mean(logits.argmax(axis=1) != labels))
        return loss, dlogits, err


def im2col(x, kh, kw, stride=1, pad=0):
    """Unfold (n, c, h, w) into patch columns (n, patches, c*kh*kw).

    Patch index runs row-major over output positions; within a column the
    layout is (channel, kernel row, kernel col), matching the weight rows.
    """
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    n, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols), (oh, ow)


def col2im(cols, x_shape, kh, kw, stride=1, pad=0):
    """Scatter-add patch columns back to image space; inverse of im2col."""
    n, c, h, w = x_shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    cols6 = cols.reshape(n, oh, ow, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    s = stride
    for dy in range(kh):
        for dx in range(kw):
            padded[:, :, dy:dy + s * oh:s, dx:dx + s * ow:s] += cols6[..., dy, dx]
    if pad:
        return padded[:, :, pad:-pad, pad:-pad]
    return padded


def conv_out_shape(h, w, kh, kw, stride, pad):
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(
            f"kernel ({kh}x{kw}, stride {stride}, pad {pad}) does not fit "
            f"input {h}x{w}"
        )
    return oh, ow


class AnalogFC(Layer):
    """Fully-connected layer on one analog tile."""

    has_params = True

    def __init__(self, d_in, d_out, device=None, converters=None, pulse=None,
                 gamma=0.4, remap_enabled=True, seed=0, bias=False, name="fc"):
        self.tile = AnalogTile(d_out, d_in, device, converters, seed)
        self.pulse = pulse if pulse is not None else PulseConfig()
        self.remap = make_remap(gamma, d_in, self.tile.device.w_bound, remap_enabled)
        init_weights(self.tile, self.remap)
        self.bias = np.zeros(d_out) if bias else None
        self.stats = MgmtStats()
        self.name = name
        self._x = None
        self._d = None

    def effective_weights(self):
        return self.remap.out_scale * self.tile.read_weights()

    def forward(self, x, training=True):
        if x.ndim != 2 or x.shape[1] != self.tile.d_in:
            raise ValueError(f"expected input (n, {self.tile.d_in}), got {x.shape}")
        self._x = x
        y = np.empty((x.shape[0], self.tile.d_out))
        for s in range(x.shape[0]):
            y[s], result = remapped_mvm(self.tile, self.remap, x[s], "forward")
            self.stats.record(result)
        if self.bias is not None:
            y += self.bias
        return y

    def backward(self, d, need_input_grad=True):
        self._d = d
        if not need_input_grad:
            return None
        dx = np.empty((d.shape[0], self.tile.d_in))
        for s in range(d.shape[0]):
            dx[s], result = remapped_mvm(self.tile, self.remap, d[s], "backward")
            self.stats.record(result)
        return dx

    def update(self, lr):
        n = self._x.shape[0]
        lr_tile = remapped_lr(lr / n, self.remap)
        pulsed_update_batch(self.tile, self._x, self._d, lr_tile, self.pulse)
        if self.bias is not None:
            self.bias -= (lr / n) * self._d.sum(axis=0)


class AnalogConv2D(Layer):
    """2-D convolution as per-patch analog matrix-vector products.

    Every output position is one managed analog product of the tile with
    the unfolded input patch; updates stream per (sample, patch) in order.
    """

    has_params = True

    def __init__(self, in_channels, out_channels, kernel, stride=1, pad=0,
                 device=None, converters=None, pulse=None, gamma=0.4,
                 remap_enabled=True, seed=0, bias=False, name="conv"):
        kh, kw = (kernel, kernel) if np.isscalar(kernel) else kernel
        self.kh, self.kw = int(kh), int(kw)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.pad = pad
        fan_in = in_channels * self.kh * self.kw
        self.tile = AnalogTile(out_channels, fan_in, device, converters, seed)
        self.pulse = pulse if pulse is not None else PulseConfig()
        self.remap = make_remap(gamma, fan_in, self.tile.device.w_bound, remap_enabled)
        init_weights(self.tile, self.remap)
        self.bias = np.zeros(out_channels) if bias else None
        self.stats = MgmtStats()
        self.name = name
        self._cols = None
        self._d_cols = None
        self._x_shape = None

    def effective_weights(self):
        return self.remap.out_scale * self.tile.read_weights()

    def forward(self, x, training=True):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"expected input (n, {self.in_channels}, h, w), got {x.shape}"
            )
        cols, (oh, ow) = im2col(x, self.kh, self.kw, self.stride, self.pad)
        self._cols = cols
        self._x_shape = x.shape
        self._out_hw = (oh, ow)
        n, n_patches, _ = cols.shape
        y_cols = np.empty((n, n_patches, self.out_channels))
        for s in range(n):
            for p in range(n_patches):
                y_cols[s, p], result = remapped_mvm(
                    self.tile, self.remap, cols[s, p], "forward")
                self.stats.record(result)
        y = y_cols.transpose(0, 2, 1).reshape(n, self.out_channels, oh, ow)
        if self.bias is not None:
            y += self.bias.reshape(1, -1, 1, 1)
        return y

    def backward(self, d, need_input_grad=True):
        n = d.shape[0]
        oh, ow = self._out_hw
        d_cols = d.reshape(n, self.out_channels, oh * ow).transpose(0, 2, 1)
        self._d_cols = np.ascontiguousarray(d_cols)
        if not need_input_grad:
            return None
        dx_cols = np.empty((n, oh * ow, self.tile.d_in))
        for s in range(n):
            for p in range(oh * ow):
                dx_cols[s, p], result = remapped_mvm(
                    self.tile, self.remap, self._d_cols[s, p], "backward")
                self.stats.record(result)
        return col2im(dx_cols, self._x_shape, self.kh, self.kw, self.stride, self.pad)

    def update(self, lr):
        n, n_patches, fan_in = self._cols.shape
        lr_tile = remapped_lr(lr / n, self.remap)
        pulsed_update_batch(
            self.tile,
            self._cols.reshape(n * n_patches, fan_in),
            self._d_cols.reshape(n * n_patches, self.out_channels),
            lr_tile, self.pulse,
        )
        if self.bias is not None:
            self.bias -= (lr / n) * self._d_cols.sum(axis=(0, 1))


class FloatFC(Layer):
    """Dense float reference for AnalogFC; mean-gradient SGD."""

    has_params = True

    def __init__(self, d_in, d_out, rng, bias=False, name="fc"):
        a = math.sqrt(3.0) / math.sqrt(d_in)
        self.weights = rng.uniform(-a, a, size=(d_out, d_in))
        self.bias = np.zeros(d_out) if bias else None
        self.name = name
        self._x = None
        self._d = None

    def forward(self, x, training=True):
        self._x = x
        y = x @ self.weights.T
        if self.bias is not None:
            y += self.bias
        return y

    def backward(self, d, need_input_grad=True):
        self._d = d
        if not need_input_grad:
            return None
        return d @ self.weights

    def update(self, lr):
        n = self._x.shape[0]
        self.weights -= (lr / n) * (self._d.T @ self._x)
        if self.bias is not None:
            self.bias -= (lr / n) * self._d.sum(axis=0)


class FloatConv2D(Layer):
    """Dense float reference for AnalogConv2D via im2col."""

    has_params = True

    def __init__(self, in_channels, out_channels, kernel, stride=1, pad=0,
                 rng=None, bias=False, name="conv"):
        kh, kw = (kernel, kernel) if np.isscalar(kernel) else kernel
        self.kh, self.kw = int(kh), int(kw)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.pad = pad
        fan_in = in_channels * self.kh * self.kw
        a = math.sqrt(3.0) / math.sqrt(fan_in)
        self.weights = rng.uniform(-a, a, size=(out_channels, fan_in))
        self.bias = np.zeros(out_channels) if bias else None
        self.name = name

    def forward(self, x, training=True):
        cols, (oh, ow) = im2col(x, self.kh, self.kw, self.stride, self.pad)
        self._cols = cols
        self._x_shape = x.shape
        self._out_hw = (oh, ow)
        y_cols = cols @ self.weights.T
        y = y_cols.transpose(0, 2, 1).reshape(x.shape[0], self.out_channels, oh, ow)
        if self.bias is not None:
            y += self.bias.reshape(1, -1, 1, 1)
        return y

    def backward(self, d, need_input_grad=True):
        n = d.shape[0]
        oh, ow = self._out_hw
        d_cols = d.reshape(n, self.out_channels, oh * ow).transpose(0, 2, 1)
        self._d_cols = d_cols
        if not need_input_grad:
            return None
        dx_cols = d_cols @ self.weights
        return col2im(dx_cols, self._x_shape, self.kh, self.kw, self.stride, self.pad)

    def update(self, lr):
        n, n_patches, fan_in = self._cols.shape
        x_flat = self._cols.reshape(n * n_patches, fan_in)
        d_flat = self._d_cols.reshape(n * n_patches, self.out_channels)
        self.weights -= (lr / n) * (d_flat.T @ x_flat)
        if self.bias is not None:
            self.bias -= (lr / n) * d_flat.sum(axis=0)

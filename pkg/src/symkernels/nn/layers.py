"""Layer forward/backward passes on float64 ndarrays.

Feature maps are ``(C, H, W)`` for one example or ``(N, C, H, W)`` for a
batch; every function here accepts either.
"""

from __future__ import annotations

import numpy as np

from symkernels.symmetry import TIE_CLASSES, SymmetryLevel, _check_level, expand_kernels


class ConvLayer:
    """3x3 convolution, stride 1, one-pixel zero border, tied kernels.

    ``kernels`` holds the free parameters with shape
    ``(out_channels, in_channels, free_param_count)``.
    """

    def __init__(self, in_channels, out_channels, level, kernels=None, bias=None):
        self.level = _check_level(level)
        k = len(TIE_CLASSES[self.level])
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")
        if kernels is None:
            kernels = np.zeros((self.out_channels, self.in_channels, k))
        if bias is None:
            bias = np.zeros(self.out_channels)
        if np.shape(kernels) != (self.out_channels, self.in_channels, k):
            raise ValueError(
                f"kernels must have shape {(self.out_channels, self.in_channels, k)}, "
                f"got {np.shape(kernels)}"
            )
        if np.shape(bias) != (self.out_channels,):
            raise ValueError(f"bias must have length {self.out_channels}, got {np.shape(bias)}")
        # kept as given (not copied) so a network can back them with one flat buffer
        self.kernels = kernels if isinstance(kernels, np.ndarray) else np.asarray(kernels, float)
        self.bias = bias if isinstance(bias, np.ndarray) else np.asarray(bias, float)

    @property
    def symmetry(self) -> SymmetryLevel:
        return SymmetryLevel(self.level)

    @property
    def n_free(self) -> int:
        return self.kernels.shape[2]

    def expanded(self) -> np.ndarray:
        """Full (out, in, 3, 3) kernels."""
        return expand_kernels(self.kernels, self.level)

    def parameter_count(self) -> int:
        return self.kernels.size + self.bias.size


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected (C,H,W) or (N,C,H,W), got shape {x.shape}")


def class_sums(x, level) -> np.ndarray:
    """Sum the zero-padded input over each tie class's 3x3 offsets.

    Returns ``(N, K, C, H, W)``: entry k is the input each output pixel
    sees through class k, added up before any multiply.
    """
    x, _ = _as_batch(x)
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2, w + 2))
    xp[:, :, 1:-1, 1:-1] = x
    classes = TIE_CLASSES[_check_level(level)]
    sums = np.empty((n, len(classes), c, h, w))
    for k, cls in enumerate(classes):
        (r, q), rest = cls[0], cls[1:]
        np.copyto(sums[:, k], xp[:, :, r : r + h, q : q + w])
        for r, q in rest:
            sums[:, k] += xp[:, :, r : r + h, q : q + w]
    return sums


def _weight_matrix(layer: ConvLayer) -> np.ndarray:
    # (O, K*C), class-major to line up with class_sums
    return layer.kernels.transpose(0, 2, 1).reshape(layer.out_channels, -1)


def conv2d_forward_cached(x, layer: ConvLayer):
    """Batched forward returning ``(out, class_sums)`` for reuse in backward."""
    x, _ = _as_batch(x)
    if x.shape[1] != layer.in_channels:
        raise ValueError(f"layer expects {layer.in_channels} input channels, got {x.shape[1]}")
    n, c, h, w = x.shape
    sums = class_sums(x, layer.level)
    out = np.matmul(_weight_matrix(layer), sums.reshape(n, -1, h * w))
    out += layer.bias[:, None]
    return out.reshape(n, layer.out_channels, h, w), sums


def conv2d_forward(x, layer: ConvLayer) -> np.ndarray:
    _, single = _as_batch(x)
    out, _ = conv2d_forward_cached(x, layer)
    return out[0] if single else out


def conv2d_backward_cached(sums, layer: ConvLayer, grad_out, need_input_grad=True):
    g, single = _as_batch(grad_out)
    n, o, h, w = g.shape
    if o != layer.out_channels or sums.shape[0] != n or sums.shape[-2:] != (h, w):
        raise ValueError(f"grad_out shape {g.shape} does not match the forward pass")
    k, c = sums.shape[1], sums.shape[2]
    g2 = g.reshape(n, o, h * w)

    grad_bias = g2.sum(axis=(0, 2))
    grad_w = np.tensordot(g2, sums.reshape(n, k * c, h * w), axes=([0, 2], [0, 2]))
    grad_kernels = np.ascontiguousarray(grad_w.reshape(o, k, c).transpose(0, 2, 1))

    grad_input = None
    if need_input_grad:
        gsums = np.matmul(_weight_matrix(layer).T, g2).reshape(n, k, c, h, w)
        gxp = np.zeros((n, c, h + 2, w + 2))
        for ki, cls in enumerate(TIE_CLASSES[layer.level]):
            for r, q in cls:
                gxp[:, :, r : r + h, q : q + w] += gsums[:, ki]
        grad_input = np.ascontiguousarray(gxp[:, :, 1:-1, 1:-1])
        if single:
            grad_input = grad_input[0]
    return grad_input, grad_kernels, grad_bias


def conv2d_backward(x, layer: ConvLayer, grad_out, need_input_grad=True):
    """Gradients ``(grad_input, grad_kernels, grad_bias)``.

    ``grad_kernels`` is already folded onto the free parameters: class k
    of slice (o, c) collects grad_out times the class-k input sum, which
    is the transposed expansion applied to the full 3x3 kernel gradient.
    """
    xb, _ = _as_batch(x)
    if xb.shape[1] != layer.in_channels:
        raise ValueError(f"layer expects {layer.in_channels} input channels, got {xb.shape[1]}")
    expected = np.shape(x)[:-3] + (layer.out_channels,) + np.shape(x)[-2:]
    if np.shape(grad_out) != expected:
        raise ValueError(f"grad_out shape {np.shape(grad_out)} != forward output shape {expected}")
    sums = class_sums(xb, layer.level)
    return conv2d_backward_cached(sums, layer, grad_out, need_input_grad)


class MultiplyCounter:
    def __init__(self):
        self.multiplies = 0
        self.additions = 0


def conv2d_forward_loops(x, layer: ConvLayer, counter: MultiplyCounter | None = None):
    """Scalar reference of the distributive forward, one output at a time.

    Each tie class's inputs are summed first and multiplied once, so a
    slice costs ``free_param_count`` multiplies per output pixel.  Slow;
    meant for counting and small cross-checks.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != layer.in_channels:
        raise ValueError(f"expected ({layer.in_channels}, H, W) input, got {x.shape}")
    c_in, h, w = x.shape
    classes = TIE_CLASSES[layer.level]
    xs = x.tolist()
    kern = layer.kernels.tolist()
    out = np.empty((layer.out_channels, h, w))
    muls = adds = 0
    for o in range(layer.out_channels):
        for i in range(h):
            for j in range(w):
                acc = float(layer.bias[o])
                for k, cls in enumerate(classes):
                    for c in range(c_in):
                        s = 0.0
                        for r, q in cls:
                            ii, jj = i + r - 1, j + q - 1
                            if 0 <= ii < h and 0 <= jj < w:
                                s += xs[c][ii][jj]
                        adds += len(cls) - 1
                        acc += kern[o][c][k] * s
                        muls += 1
                        adds += 1
                out[o, i, j] = acc
    if counter is not None:
        counter.multiplies += muls
        counter.additions += adds
    return out


def relu_forward(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, grad_y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    grad_y = np.asarray(grad_y, dtype=np.float64)
    if x.shape != grad_y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {grad_y.shape}")
    return np.where(x > 0, grad_y, 0.0)


def avg_pool2x2_forward(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError(f"2x2 pooling needs even spatial extents, got {h}x{w}")
    blocks = x.reshape(x.shape[:-2] + (h // 2, 2, w // 2, 2))
    # pair the window symmetrically so flips only reorder commutative adds
    return ((blocks[..., 0, :, 0] + blocks[..., 1, :, 1]) + (blocks[..., 0, :, 1] + blocks[..., 1, :, 0])) * 0.25


def avg_pool2x2_backward(grad_y) -> np.ndarray:
    g = np.asarray(grad_y, dtype=np.float64) * 0.25
    return np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1)


def global_avg_pool_forward(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 3:
        raise ValueError(f"expected (C,H,W) or (N,C,H,W), got shape {x.shape}")
    return x.mean(axis=(-2, -1))


def global_avg_pool_backward(grad_y, spatial_shape) -> np.ndarray:
    g = np.asarray(grad_y, dtype=np.float64)
    h, w = spatial_shape
    return np.broadcast_to((g / (h * w))[..., None, None], g.shape + (h, w)).copy()


def dense_block_forward(x, layer: ConvLayer) -> np.ndarray:
    """``concat(x, relu(conv(x)))`` along channels, input channels first."""
    xb, single = _as_batch(x)
    z, _ = conv2d_forward_cached(xb, layer)
    out = np.concatenate([xb, relu_forward(z)], axis=1)
    return out[0] if single else out


def fully_connected_forward(v, weight, bias) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weight.ndim != 2 or v.shape[-1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        raise ValueError(
            f"dimension mismatch: input {v.shape}, weight {weight.shape}, bias {bias.shape}"
        )
    return v @ weight + bias


def fully_connected_backward(v, weight, grad_out):
    """Returns ``(grad_v, grad_weight, grad_bias)``; batches are summed."""
    v = np.asarray(v, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    grad_v = g @ np.asarray(weight).T
    if v.ndim == 1:
        return grad_v, np.outer(v, g), g.copy()
    return grad_v, v.T @ g, g.sum(axis=0)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, label):
    """Loss ``-log softmax(logits)[label]`` and its gradient ``p - onehot``.

    With a batch of logits ``(N, classes)`` and ``N`` labels, returns the
    per-example losses and per-example gradients.
    """
    z = np.asarray(logits, dtype=np.float64)
    n_classes = z.shape[-1]
    labels = np.asarray(label)
    if labels.shape != z.shape[:-1]:
        raise ValueError(f"labels shape {labels.shape} does not match logits {z.shape}")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"label out of range 0..{n_classes - 1}: {label}")
    shifted = z - z.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_p = shifted - log_norm
    onehot = np.arange(n_classes) == labels[..., None]
    loss = -log_p[onehot].reshape(labels.shape)
    grad = np.exp(log_p) - onehot
    if z.ndim == 1:
        return float(loss), grad
    return loss, grad

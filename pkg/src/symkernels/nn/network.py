"""Densely connected classifier with global average pooling.

Default configuration (``Network(level)``)::

    3x32x32 -> dense(30) -> 33x32x32 -> avg2x2 -> 33x16x16
            -> dense(30) -> 63x16x16 -> avg2x2 -> 63x8x8
            -> dense(30) -> 93x8x8   -> avg2x2 -> 93x4x4
            -> dense(30) -> 123x4x4  -> global avg -> 123
            -> fully connected -> 10 -> softmax

Each dense block is one tied convolution followed by ReLU, concatenated
after its input.  Global pooling removes all spatial layout, so with
level >= 1 kernels the class probabilities are invariant under every
transform in ``symmetry_group(level)``.
"""

from __future__ import annotations

import math

import numpy as np

from symkernels.nn.layers import (
    ConvLayer,
    avg_pool2x2_backward,
    avg_pool2x2_forward,
    conv2d_backward_cached,
    conv2d_forward_cached,
    fully_connected_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    relu_forward,
    softmax,
    softmax_cross_entropy,
)
from symkernels.symmetry import _check_level, free_param_count


class Network:
    """Stack of dense blocks and a linear softmax head.

    All trainable scalars live in ``self.flat``; conv kernels, conv
    biases, the head weight ``(features, classes)`` and head bias are
    reshaped views into it, in that order block by block.
    """

    def __init__(
        self,
        level,
        *,
        in_channels=3,
        growth=30,
        n_blocks=4,
        image_size=32,
        n_classes=10,
        seed=0,
        zero_head=False,
    ):
        self.level = _check_level(level)
        if n_blocks < 1:
            raise ValueError("need at least one dense block")
        if image_size % (2 ** (n_blocks - 1)):
            raise ValueError(f"image size {image_size} cannot be halved {n_blocks - 1} times")
        self.in_channels = in_channels
        self.growth = growth
        self.n_blocks = n_blocks
        self.image_size = image_size
        self.n_classes = n_classes

        k = free_param_count(self.level)
        shapes = []
        for b in range(n_blocks):
            c = in_channels + b * growth
            shapes += [(growth, c, k), (growth,)]
        self.n_features = in_channels + n_blocks * growth
        shapes += [(self.n_features, n_classes), (n_classes,)]
        self.param_shapes = shapes

        sizes = [math.prod(s) for s in shapes]
        self.flat = np.zeros(sum(sizes))
        self.params = []
        offset = 0
        for shape, size in zip(shapes, sizes):
            self.params.append(self.flat[offset : offset + size].reshape(shape))
            offset += size

        self.convs = [
            ConvLayer(in_channels + b * growth, growth, self.level, self.params[2 * b], self.params[2 * b + 1])
            for b in range(n_blocks)
        ]
        self.fc_weight, self.fc_bias = self.params[-2], self.params[-1]
        self.initialize(seed, zero_head=zero_head)

    @property
    def input_shape(self):
        return (self.in_channels, self.image_size, self.image_size)

    def initialize(self, seed, zero_head=False):
        """Glorot-uniform weights with fans over the expanded 3x3 kernels; zero biases."""
        rng = np.random.default_rng(seed)
        self.flat[:] = 0.0
        for conv in self.convs:
            limit = math.sqrt(6.0 / (9 * conv.in_channels + 9 * conv.out_channels))
            conv.kernels[...] = rng.uniform(-limit, limit, size=conv.kernels.shape)
        if not zero_head:
            limit = math.sqrt(6.0 / (self.n_features + self.n_classes))
            self.fc_weight[...] = rng.uniform(-limit, limit, size=self.fc_weight.shape)

    def layer_groups(self):
        """Parameter arrays grouped per layer: each conv block, then the head."""
        groups = [[conv.kernels, conv.bias] for conv in self.convs]
        groups.append([self.fc_weight, self.fc_bias])
        return groups

    def count_parameters(self) -> int:
        return self.flat.size

    def conv_free_parameter_count(self) -> int:
        return sum(conv.kernels.size for conv in self.convs)

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ValueError(f"expected input of shape {self.input_shape}, got {np.shape(x)}")
        return x, single

    def _forward(self, x, keep):
        cache = []
        h = x
        for b, conv in enumerate(self.convs):
            z, sums = conv2d_forward_cached(h, conv)
            out = np.concatenate([h, relu_forward(z)], axis=1)
            if keep:
                cache.append((h.shape, z, sums))
            h = avg_pool2x2_forward(out) if b < self.n_blocks - 1 else out
        pooled = global_avg_pool_forward(h)
        logits = fully_connected_forward(pooled, self.fc_weight, self.fc_bias)
        return logits, (cache, pooled, h.shape[-2:])

    def logits(self, x) -> np.ndarray:
        x, single = self._check_input(x)
        out, _ = self._forward(x, keep=False)
        return out[0] if single else out

    def forward(self, x) -> np.ndarray:
        """Class probabilities for one image ``(C,H,W)`` or a batch."""
        return softmax(self.logits(x))

    def preactivations(self, x) -> list[np.ndarray]:
        """Conv outputs feeding each ReLU, per block (batched)."""
        x, _ = self._check_input(x)
        _, (cache, _, _) = self._forward(x, keep=True)
        return [z for _, z, _ in cache]

    def loss(self, images, labels, with_preactivations=False):
        """Mean cross-entropy, optionally with the per-block ReLU inputs."""
        x, _ = self._check_input(images)
        labels = np.atleast_1d(np.asarray(labels))
        logits, (cache, _, _) = self._forward(x, keep=with_preactivations)
        losses, _ = softmax_cross_entropy(logits, labels)
        if with_preactivations:
            return float(losses.mean()), [z for _, z, _ in cache]
        return float(losses.mean())

    def loss_and_grad(self, images, labels):
        """Mean cross-entropy over the batch and its gradient, aligned with ``flat``."""
        x, single = self._check_input(images)
        labels = np.atleast_1d(np.asarray(labels))
        if labels.shape != (x.shape[0],):
            raise ValueError(f"need one label per image, got {labels.shape} for {x.shape[0]}")
        n = x.shape[0]
        logits, (cache, pooled, last_hw) = self._forward(x, keep=True)
        losses, g_logits = softmax_cross_entropy(logits, labels)
        g_logits = g_logits / n

        grad = np.zeros_like(self.flat)
        gparams = []
        offset = 0
        for shape in self.param_shapes:
            size = math.prod(shape)
            gparams.append(grad[offset : offset + size].reshape(shape))
            offset += size

        gparams[-2][...] = pooled.T @ g_logits
        gparams[-1][...] = g_logits.sum(axis=0)
        g = global_avg_pool_backward(g_logits @ self.fc_weight.T, last_hw)

        for b in reversed(range(self.n_blocks)):
            conv = self.convs[b]
            if b < self.n_blocks - 1:
                g = avg_pool2x2_backward(g)
            in_shape, z, sums = cache[b]
            c = in_shape[1]
            gz = np.where(z > 0, g[:, c:], 0.0)
            g_in, g_kern, g_bias = conv2d_backward_cached(sums, conv, gz, need_input_grad=b > 0)
            gparams[2 * b][...] = g_kern
            gparams[2 * b + 1][...] = g_bias
            if b > 0:
                g = g[:, :c] + g_in
        return float(losses.mean()), grad

    def copy(self) -> "Network":
        twin = Network(
            self.level,
            in_channels=self.in_channels,
            growth=self.growth,
            n_blocks=self.n_blocks,
            image_size=self.image_size,
            n_classes=self.n_classes,
        )
        twin.flat[:] = self.flat
        return twin


def table3_network(level, seed=0, zero_head=False) -> Network:
    return Network(level, seed=seed, zero_head=zero_head)


def network_forward(net: Network, image) -> np.ndarray:
    return net.forward(image)


def network_backward(net: Network, image, label):
    """Loss and flat gradient for one example (or a batch, averaged)."""
    return net.loss_and_grad(image, label)


def count_parameters(net: Network) -> int:
    return net.count_parameters()


def architecture_parameter_count(level, in_channels=3, growth=30, n_blocks=4, n_classes=10) -> int:
    """Closed-form trainable-scalar count, without building the network."""
    k = free_param_count(level)
    slices = sum((in_channels + b * growth) * growth for b in range(n_blocks))
    features = in_channels + n_blocks * growth
    return slices * k + n_blocks * growth + features * n_classes + n_classes

"""Forward-pass timing per symmetry level on a fixed convolution workload."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from symkernels.nn import MultiplyCounter, conv2d_forward, conv2d_forward_loops
from symkernels.verify import random_layer

WORKLOAD = (93, 8, 8)
OUT_CHANNELS = 30


@dataclass
class BenchRow:
    level: int
    median_ns_per_output: float
    multiplies_per_output: float  # per (out, in) slice

    def line(self) -> str:
        return f"{self.level},{self.median_ns_per_output:.3f},{self.multiplies_per_output:g}"


def count_multiplies(level, shape=WORKLOAD, out_channels=OUT_CHANNELS, seed=0) -> float:
    """Multiplies per output pixel per channel slice, from the instrumented scalar path."""
    rng = np.random.default_rng(seed)
    layer = random_layer(rng, level, shape[0], out_channels)
    counter = MultiplyCounter()
    conv2d_forward_loops(rng.standard_normal(shape), layer, counter)
    c, h, w = shape
    return counter.multiplies / (out_channels * c * h * w)


def time_forward(levels, repetitions, shape=WORKLOAD, out_channels=OUT_CHANNELS, seed=0):
    """Median ns per output value for each level, repetitions interleaved across levels."""
    if repetitions < 10:
        raise ValueError(f"need at least 10 repetitions, got {repetitions}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    layers = {lv: random_layer(rng, lv, shape[0], out_channels) for lv in levels}
    for layer in layers.values():
        conv2d_forward(x, layer)
    samples = {lv: [] for lv in levels}
    n_out = out_channels * shape[1] * shape[2]
    for _ in range(repetitions):
        for lv, layer in layers.items():
            t0 = time.perf_counter_ns()
            conv2d_forward(x, layer)
            samples[lv].append((time.perf_counter_ns() - t0) / n_out)
    return {lv: statistics.median(s) for lv, s in samples.items()}


def run_bench(levels=(0, 1, 2, 3, 4), repetitions=200, count=True) -> list[BenchRow]:
    medians = time_forward(levels, repetitions)
    return [
        BenchRow(lv, medians[lv], count_multiplies(lv) if count else float("nan"))
        for lv in levels
    ]

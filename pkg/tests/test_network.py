import math

import numpy as np
import pytest

from symkernels.nn import (
    CheckpointError,
    Network,
    architecture_parameter_count,
    count_parameters,
    load_checkpoint,
    network_backward,
    network_forward,
    save_checkpoint,
)
from symkernels.nn.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint
from symkernels.symmetry import LEVELS, hflip, symmetry_group
from symkernels.verify import check_gradients, finite_difference_check, reference_loss, shrunken_network

# Table 4 "Model coefficients" as published; not reproducible from the architecture.
PUBLISHED_COUNTS = {0: 95520, 1: 62280, 2: 42120, 3: 32040, 4: 21960}


@pytest.fixture(scope="module")
def images():
    return np.random.default_rng(5).random((6, 3, 32, 32))


def test_shape_progression(images):
    net = Network(1, seed=0)
    x = images[:2]
    channels, sizes = [], []
    for b, z in enumerate(net.preactivations(x)):
        channels.append(net.convs[b].in_channels + z.shape[1])
        sizes.append(z.shape[-1])
    assert channels == [33, 63, 93, 123]
    assert sizes == [32, 16, 8, 4]
    assert net.n_features == 123
    assert net.fc_weight.shape == (123, 10)


def test_zero_head_gives_uniform_probabilities(images):
    net = Network(2, seed=1, zero_head=True)
    np.testing.assert_allclose(network_forward(net, images[0]), np.full(10, 0.1), atol=1e-15)
    loss, _ = network_backward(net, images[0], 3)
    assert loss == pytest.approx(math.log(10), abs=1e-12)


def test_probabilities_sum_to_one(images):
    p = Network(0, seed=2).forward(images)
    assert p.shape == (6, 10)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-14)


def test_input_shape_checked():
    with pytest.raises(ValueError, match="shape"):
        Network(1).forward(np.zeros((3, 16, 16)))


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_network_invariance(level, images):
    net = Network(level, seed=level)
    base = net.forward(images)
    for t in symmetry_group(level):
        assert np.abs(net.forward(t(images)) - base).max() <= 1e-10


def test_level0_not_flip_invariant(images):
    diffs = [np.abs(Network(0, seed=s).forward(images) - Network(0, seed=s).forward(hflip(images))).max() for s in range(10)]
    assert max(diffs) > 1e-6


@pytest.mark.parametrize("level", [1, 2])
def test_gradients_invariant_under_flip(level, images):
    net = Network(level, seed=11)
    _, g = net.loss_and_grad(images[0], 4)
    _, g_flip = net.loss_and_grad(hflip(images[0]), 4)
    assert np.abs(g - g_flip).max() <= 1e-10


def test_batch_gradient_is_mean_of_example_gradients(images):
    net = Network(1, seed=3)
    labels = np.array([0, 1, 2])
    loss, g = net.loss_and_grad(images[:3], labels)
    parts = [net.loss_and_grad(images[i], labels[i]) for i in range(3)]
    assert loss == pytest.approx(sum(p[0] for p in parts) / 3, abs=1e-14)
    np.testing.assert_allclose(g, sum(p[1] for p in parts) / 3, atol=1e-15)


@pytest.mark.parametrize("level", LEVELS)
def test_shrunken_gradient_check(level):
    result = check_gradients(level, seed=100 + level)
    assert result.status == "pass", result.line()


def test_reference_loss_agrees_with_network():
    net = shrunken_network(2, 4)
    x = np.random.default_rng(1).random((3, 3, 8, 8))
    y = np.array([1, 2, 3])
    ref, zs = reference_loss(net, x, y)
    assert abs(float(ref) - net.loss(x, y)) <= 1e-14
    for a, b in zip(zs, net.preactivations(x)):
        np.testing.assert_allclose(np.asarray(a, dtype=float), b, atol=1e-14)


def test_gradient_check_detects_wrong_gradient(monkeypatch):
    net = shrunken_network(1, 0)
    x = np.random.default_rng(2).random((2, 3, 8, 8))
    y = np.array([0, 5])
    original = Network.loss_and_grad

    def broken(self, images, labels):
        loss, g = original(self, images, labels)
        g[3] *= 1.001
        return loss, g

    monkeypatch.setattr(Network, "loss_and_grad", broken)
    worst, _, _ = finite_difference_check(net, x, y)
    assert worst > 1e-5


def test_parameter_counts():
    slices = (3 + 33 + 63 + 93) * 30
    assert slices == 5760
    expected = {lv: slices * k + 4 * 30 + 123 * 10 + 10 for lv, k in zip(LEVELS, (9, 6, 4, 3, 2))}
    assert expected[0] == 53200 and expected[1] == 35920
    for lv in LEVELS:
        net = Network(lv)
        assert count_parameters(net) == expected[lv] == architecture_parameter_count(lv)
    counts = [expected[lv] for lv in LEVELS]
    assert counts == sorted(counts, reverse=True) and len(set(counts)) == 5
    assert Network(1).conv_free_parameter_count() * 3 == Network(0).conv_free_parameter_count() * 2


def test_published_counts_differ_from_architecture():
    # recorded for comparison only
    for lv, published in PUBLISHED_COUNTS.items():
        assert architecture_parameter_count(lv) < published


def test_flat_view_alignment():
    net = Network(3, seed=4)
    total = 0
    for arr in net.params:
        assert np.shares_memory(arr, net.flat)
        total += arr.size
    assert total == net.flat.size
    net.flat[:] = 0.0
    assert not net.convs[0].kernels.any() and not net.fc_bias.any()


def test_init_is_seeded_and_biases_zero():
    a, b, c = Network(1, seed=9), Network(1, seed=9), Network(1, seed=10)
    np.testing.assert_array_equal(a.flat, b.flat)
    assert not np.array_equal(a.flat, c.flat)
    for conv in a.convs:
        assert not conv.bias.any()
        limit = math.sqrt(6 / (9 * conv.in_channels + 9 * conv.out_channels))
        assert np.abs(conv.kernels).max() <= limit
    assert not a.fc_bias.any()


# -- checkpoints ----------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path, images):
    net = Network(2, seed=6)
    net.flat += np.random.default_rng(0).standard_normal(net.flat.size) * 1e-3
    path = tmp_path / "net.symk"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert back.level == 2
    np.testing.assert_array_equal(back.flat, net.flat)
    np.testing.assert_array_equal(back.forward(images), net.forward(images))


def test_checkpoint_layout():
    net = Network(4, seed=1)
    raw = encode_checkpoint(net)
    assert raw[:5] == MAGIC and raw[5] == 4
    count = int.from_bytes(raw[6:14], "little")
    assert count == 30 * 3 * 2 + 30
    first = np.frombuffer(raw[14 : 14 + 8 * count], dtype="<f8")
    np.testing.assert_array_equal(first[: 30 * 3 * 2], net.convs[0].kernels.ravel())
    assert len(raw) == 6 + 5 * 8 + 8 * net.flat.size


def test_checkpoint_corruption():
    raw = encode_checkpoint(Network(1, seed=0))
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(b"XXXXX" + raw[5:])
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(raw[:-9])
    with pytest.raises(CheckpointError, match="trailing"):
        decode_checkpoint(raw + b"\0")
    with pytest.raises(CheckpointError, match="level"):
        decode_checkpoint(raw[:5] + bytes([7]) + raw[6:])
    with pytest.raises(CheckpointError, match="expects"):
        decode_checkpoint(raw[:5] + bytes([0]) + raw[6:])


def test_checkpoint_shrunken_architecture():
    net = shrunken_network(3, 2)
    arch = dict(growth=4, n_blocks=2, image_size=8)
    back = decode_checkpoint(encode_checkpoint(net), **arch)
    np.testing.assert_array_equal(back.flat, net.flat)

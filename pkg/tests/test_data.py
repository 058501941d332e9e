import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symkernels.data import (
    RECORD_BYTES,
    BatchPlan,
    CifarFormatError,
    Dataset,
    decode_records,
    encode_records,
    hflip,
    load_cifar10,
    minibatches,
    read_batch_file,
    rot90,
    shuffled_subset,
    synthetic_cifar,
    vflip,
    write_cifar10,
)


def make_records(n, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    pixels = rng.integers(0, 256, (n, 3, 32, 32))
    return encode_records(pixels, labels), pixels, labels


def test_record_layout():
    pixels = np.zeros((1, 3, 32, 32), dtype=np.uint8)
    pixels[0, 0, 0, 1] = 11  # red plane, row 0, column 1
    pixels[0, 1, 1, 0] = 22  # green plane, row 1, column 0
    pixels[0, 2, 31, 31] = 33
    raw = encode_records(pixels, [7])
    assert len(raw) == RECORD_BYTES
    assert raw[0] == 7
    assert raw[1 + 1] == 11
    assert raw[1 + 1024 + 32] == 22
    assert raw[-1] == 33


def test_decode_round_trip():
    raw, pixels, labels = make_records(5)
    px, lb = decode_records(raw)
    np.testing.assert_array_equal(px, pixels)
    np.testing.assert_array_equal(lb, labels)
    for i in range(5):
        assert encode_records(px[i : i + 1], lb[i : i + 1]) == raw[i * RECORD_BYTES : (i + 1) * RECORD_BYTES]


def test_normalization_endpoints():
    pixels = np.zeros((1, 3, 32, 32), dtype=np.uint8)
    pixels[0, 0, 0, 0] = 255
    ds = Dataset(pixels, np.array([0]))
    img = ds.image(0)
    assert img[0, 0, 0] == 1.0 and img[0, 0, 1] == 0.0
    assert img.dtype == np.float64


def test_truncated_file_error(tmp_path):
    raw, _, _ = make_records(3)
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(raw[:-100])
    with pytest.raises(CifarFormatError) as info:
        read_batch_file(path)
    assert info.value.offset == 2 * RECORD_BYTES
    assert "data_batch_1.bin" in str(info.value)


def test_bad_label_error():
    raw, _, _ = make_records(3)
    raw = bytearray(raw)
    raw[RECORD_BYTES] = 12
    with pytest.raises(CifarFormatError, match="label byte 12") as info:
        decode_records(bytes(raw), "x.bin")
    assert info.value.offset == RECORD_BYTES


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="data_batch_1.bin"):
        load_cifar10(tmp_path)


def test_load_directory_layout(tmp_path):
    train, test = synthetic_cifar(50, 20, seed=1)
    write_cifar10(tmp_path / "cifar-10-batches-bin", train, test)
    tr, te = load_cifar10(tmp_path)  # parent directory is accepted too
    assert (len(tr), len(te)) == (50, 20)
    np.testing.assert_array_equal(tr.pixels, train.pixels)
    np.testing.assert_array_equal(te.labels, test.labels)
    assert tr.split == "train" and te.split == "test"
    assert tr.images().min() >= 0.0 and tr.images().max() <= 1.0


def test_flip_examples():
    row = np.array([[[1.0, 2.0, 3.0]]])
    np.testing.assert_array_equal(hflip(row), [[[3.0, 2.0, 1.0]]])
    x = np.random.default_rng(0).random((3, 4, 4))
    np.testing.assert_array_equal(hflip(hflip(x)), x)
    np.testing.assert_array_equal(vflip(vflip(x)), x)
    np.testing.assert_array_equal(rot90(rot90(rot90(rot90(x)))), x)


def test_rot90_is_counterclockwise():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    np.testing.assert_array_equal(rot90(x), [[[2.0, 4.0], [1.0, 3.0]]])


def test_transform_errors():
    with pytest.raises(ValueError, match="square"):
        rot90(np.zeros((1, 2, 3)))
    with pytest.raises(ValueError):
        hflip(np.zeros((3, 3)))


@given(st.integers(1, 3), st.integers(1, 5), st.integers(0, 1000))
def test_transform_relations(c, n, seed):
    x = np.random.default_rng(seed).random((c, n, n))
    np.testing.assert_array_equal(hflip(vflip(x)), vflip(hflip(x)))
    np.testing.assert_array_equal(rot90(rot90(x)), hflip(vflip(x)))


def test_minibatch_cut():
    batches = minibatches(50000, BatchPlan(seed=1, batch_size=1280), 0)
    assert len(batches) == 40
    assert [len(b) for b in batches] == [1280] * 39 + [80]


def test_minibatches_deterministic_and_seed_dependent():
    a = minibatches(1000, BatchPlan(7, 100), 3)
    b = minibatches(1000, BatchPlan(7, 100), 3)
    c = minibatches(1000, BatchPlan(8, 100), 3)
    d = minibatches(1000, BatchPlan(7, 100), 4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(np.concatenate(a), np.concatenate(c))
    assert not np.array_equal(np.concatenate(a), np.concatenate(d))


@settings(max_examples=30)
@given(st.integers(1, 500), st.integers(1, 64), st.integers(0, 2**64 - 1), st.integers(0, 100))
def test_epoch_permutation_is_bijection(n, batch, seed, epoch):
    batch = min(batch, n)
    idx = np.concatenate(minibatches(n, BatchPlan(seed, batch), epoch))
    np.testing.assert_array_equal(np.sort(idx), np.arange(n))


def test_minibatch_errors():
    with pytest.raises(ValueError, match="empty"):
        minibatches(0, BatchPlan(0, 1), 0)
    with pytest.raises(ValueError, match="exceeds"):
        minibatches(10, BatchPlan(0, 11), 0)
    with pytest.raises(ValueError):
        BatchPlan(0, 0)


def test_shuffled_subset():
    train, _ = synthetic_cifar(100, 1, seed=2)
    a = shuffled_subset(train, 30, seed=5)
    b = shuffled_subset(train, 30, seed=5)
    assert len(a) == 30
    np.testing.assert_array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.labels, train.labels[:30]) or not np.array_equal(a.pixels, train.pixels[:30])
    with pytest.raises(ValueError):
        shuffled_subset(train, 101, 0)


def test_dataset_length_check():
    with pytest.raises(ValueError, match="labels"):
        Dataset(np.zeros((2, 3, 32, 32), np.uint8), np.zeros(3, np.int64))

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symkernels.tensor import Tensor, concat_channels, from_values, slice_channels, zeros


@pytest.mark.parametrize("shape", [(2, 2), (3,), (1, 1, 1, 1)])
def test_zeros(shape):
    t = zeros(shape)
    assert t.shape == shape
    assert t.values() == [0.0] * int(np.prod(shape))


@pytest.mark.parametrize("shape", [(0,), (2, -1), (), (1, 1, 1, 1, 1)])
def test_zeros_rejects_bad_shapes(shape):
    with pytest.raises(ValueError):
        zeros(shape)


def test_from_values():
    assert from_values((3,), [1, 2, 3]).values() == [1.0, 2.0, 3.0]
    t = from_values((1, 2, 2), [1, 2, 3, 4])
    assert t.shape == (1, 2, 2)
    assert np.asarray(t)[0, 1, 0] == 3.0
    with pytest.raises(ValueError, match="cannot fill"):
        from_values((2,), [1])


def test_nonfinite_rejected():
    with pytest.raises(ValueError, match="finite"):
        from_values((2,), [1.0, float("nan")])


def test_tensor_is_read_only_and_owns_its_data():
    src = np.arange(4.0)
    t = Tensor(src)
    src[0] = 99.0
    assert t.values()[0] == 0.0
    with pytest.raises(ValueError):
        np.asarray(t)[0] = 1.0


def test_row_major_offsets():
    c, h, w = 2, 3, 4
    t = from_values((c, h, w), range(c * h * w))
    arr = np.asarray(t)
    for ci in range(c):
        for hi in range(h):
            for wi in range(w):
                assert arr[ci, hi, wi] == ci * h * w + hi * w + wi


def test_concat_channels_shapes():
    out = concat_channels(zeros((3, 32, 32)), zeros((30, 32, 32)))
    assert out.shape == (33, 32, 32)


def test_concat_channels_order():
    out = np.asarray(concat_channels(np.ones((1, 2, 2)), np.zeros((1, 2, 2))))
    assert np.all(out[0] == 1) and np.all(out[1] == 0)


def test_concat_channels_mismatch():
    with pytest.raises(ValueError, match="spatial"):
        concat_channels(zeros((1, 2, 2)), zeros((1, 3, 3)))


shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4)


@given(shapes, st.randoms(use_true_random=False))
def test_round_trip(shape, rnd):
    values = [rnd.uniform(-1e6, 1e6) for _ in range(int(np.prod(shape)))]
    t = from_values(shape, values)
    assert from_values(shape, t.values()) == t


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3))
def test_concat_then_slice_recovers_inputs(ca, cb, h, w):
    a = Tensor(np.arange(ca * h * w, dtype=float).reshape(ca, h, w))
    b = Tensor(-np.arange(cb * h * w, dtype=float).reshape(cb, h, w) - 1)
    both = concat_channels(a, b)
    assert slice_channels(both, 0, ca) == a
    assert slice_channels(both, ca, ca + cb) == b

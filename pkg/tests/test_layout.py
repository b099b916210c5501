import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbtensor import layout as L
from sbtensor.layout import (DenseTensor, IllegalFlattenError, Layout,
                             ModePermutation, can_flatten, flatten,
                             linear_offset, permute_copy, unfold)


def test_packed_strides():
    lay = Layout.packed([4, 5, 6])
    assert lay.strides == (1, 4, 20)
    assert lay.size == 120
    assert lay.is_packed()


def test_layout_validation():
    with pytest.raises(ValueError):
        Layout((0, 3), (1, 1))
    with pytest.raises(ValueError):
        Layout((2, 3), (2, 2))       # first stride must be 1
    with pytest.raises(ValueError):
        Layout((2,), (1, 1))         # rank mismatch


def test_layout_rejects_aliasing():
    # two modes of stride 1 would overlap
    with pytest.raises(ValueError):
        Layout((3, 3), (1, 1))


def test_linear_offset_column_major():
    lay = Layout.packed([3, 4])
    assert linear_offset(lay, (0, 0)) == 0
    assert linear_offset(lay, (2, 0)) == 2
    assert linear_offset(lay, (0, 1)) == 3
    assert linear_offset(lay, (2, 3)) == 11
    with pytest.raises(IndexError):
        linear_offset(lay, (3, 0))


def test_can_flatten_packed():
    lay = Layout.packed([4, 5, 6])
    assert can_flatten(lay, 0, 1)
    assert can_flatten(lay, 1, 2)
    assert not can_flatten(lay, 0, 2)
    with pytest.raises(ValueError):
        can_flatten(lay, 1, 1)


def test_can_flatten_strided_gap():
    # mode 1 stride 8 > 4*1: padding between columns forbids flattening
    lay = Layout((4, 5), (1, 8))
    assert not can_flatten(lay, 0, 1)
    with pytest.raises(IllegalFlattenError):
        flatten(lay, 0, 1)


def test_flatten_merges_extents():
    lay = Layout.packed([4, 5, 6])
    merged = flatten(lay, 0, 1)
    assert merged.dims == (20, 6)
    assert merged.strides == (1, 20)


def test_mode_permutation_inverse():
    p = ModePermutation((2, 0, 1))
    q = p.inverse()
    assert tuple(q.perm[p.perm[i]] for i in range(3)) == (0, 1, 2)
    with pytest.raises(ValueError):
        ModePermutation((0, 0, 1))


def test_dense_tensor_round_trip():
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((3, 4, 2))
    t = DenseTensor.from_array(arr)
    assert t.layout == Layout.packed([3, 4, 2])
    np.testing.assert_array_equal(t.to_array(), arr)
    # column-major flat order
    assert t.data[0] == arr[0, 0, 0]
    assert t.data[1] == arr[1, 0, 0]
    assert t[2, 3, 1] == arr[2, 3, 1]
    t[0, 0, 0] = 9.5
    assert t.data[0] == 9.5


def test_to_array_is_view_not_copy():
    t = DenseTensor.zeros(Layout.packed([3, 3]))
    view = t.to_array()
    t.data[0] = 7.0
    assert view[0, 0] == 7.0
    with pytest.raises((ValueError, RuntimeError)):
        view[0, 0] = 1.0  # read-only


def test_permute_copy_counts():
    rng = np.random.default_rng(1)
    t = DenseTensor.from_array(rng.standard_normal((3, 4, 5)))
    t0, a0 = L.transposition_count(), L.allocation_count()
    u = permute_copy(t, (2, 0, 1))
    assert L.transposition_count() == t0 + 1
    assert L.allocation_count() == a0 + 1
    assert u.layout.dims == (5, 3, 4)
    np.testing.assert_array_equal(u.to_array(),
                                  np.transpose(t.to_array(), (2, 0, 1)))


def test_unfold_matches_moveaxis():
    rng = np.random.default_rng(2)
    arr = rng.standard_normal((3, 4, 5))
    t = DenseTensor.from_array(arr)
    for r in range(3):
        mat = unfold(t, r).to_array()
        want = np.moveaxis(arr, r, 0).reshape((arr.shape[r], -1), order="F")
        np.testing.assert_array_equal(mat, want)


@settings(max_examples=50, deadline=None)
@given(dims=st.lists(st.integers(1, 5), min_size=1, max_size=4))
def test_packed_offset_enumerates_buffer(dims):
    lay = Layout.packed(dims)
    seen = set()
    idx = [0] * len(dims)
    import itertools
    for tup in itertools.product(*(range(d) for d in dims)):
        seen.add(linear_offset(lay, tup))
    assert seen == set(range(lay.size))


@settings(max_examples=50, deadline=None)
@given(dims=st.lists(st.integers(2, 4), min_size=2, max_size=3),
       data=st.data())
def test_flatten_preserves_offsets(dims, data):
    lay = Layout.packed(dims)
    i = data.draw(st.integers(0, len(dims) - 2))
    merged = flatten(lay, i, i + 1)
    # offset of (x, y) through the merged mode equals the original offset
    x = data.draw(st.integers(0, dims[i] - 1))
    y = data.draw(st.integers(0, dims[i + 1] - 1))
    rest = [0] * len(dims)
    rest[i], rest[i + 1] = x, y
    merged_idx = list(rest)
    del merged_idx[i + 1]
    merged_idx[i] = x + y * dims[i]
    assert linear_offset(lay, tuple(rest)) == linear_offset(merged, tuple(merged_idx))

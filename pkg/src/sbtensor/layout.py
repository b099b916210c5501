"""Column-major dense tensor storage, stride arithmetic and mode surgery.

A tensor of order ``d`` is a flat float64 buffer plus a ``Layout``: per-mode
extents and per-mode element strides, with the first mode always unit stride.
Packed layouts have ``strides[i] == prod(dims[:i])``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np


class IllegalFlattenError(ValueError):
    """Requested mode pair does not satisfy the stride-merge condition."""


# Module-level instrumentation.  permute_copy / unfold / buffer construction
# bump these so tests can assert that the planned evaluation path neither
# copies nor allocates.
_STATS = {"allocations": 0, "transpositions": 0}


def allocation_count() -> int:
    return _STATS["allocations"]


def transposition_count() -> int:
    return _STATS["transpositions"]


def _record_allocation() -> None:
    _STATS["allocations"] += 1


def _record_transposition() -> None:
    _STATS["transpositions"] += 1


@dataclass(frozen=True)
class Layout:
    """Extents plus element strides of a column-major tensor view."""

    dims: tuple[int, ...]
    strides: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        strides = tuple(int(s) for s in self.strides)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "strides", strides)
        if len(dims) == 0:
            raise ValueError("layout must have order >= 1")
        if len(dims) != len(strides):
            raise ValueError("dims and strides must have equal length")
        if any(d < 1 for d in dims):
            raise ValueError("all extents must be positive")
        if any(s < 1 for s in strides):
            raise ValueError("all strides must be positive")
        if strides[0] != 1:
            raise ValueError("first mode must have unit stride")
        # No-aliasing check: sorted by stride, each stride must clear the
        # span of the previous mode.  Sufficient for every padded layout.
        order = sorted(range(len(dims)), key=lambda i: strides[i])
        for a, b in zip(order, order[1:]):
            if strides[b] < strides[a] * dims[a]:
                raise ValueError("strides alias: two indices map to one offset")

    @classmethod
    def packed(cls, dims) -> "Layout":
        dims = tuple(int(d) for d in dims)
        strides = tuple(prod(dims[:i]) for i in range(len(dims)))
        return cls(dims, strides)

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return prod(self.dims)

    def min_buffer_len(self) -> int:
        return 1 + sum((d - 1) * s for d, s in zip(self.dims, self.strides))

    def is_packed(self) -> bool:
        return self.strides == Layout.packed(self.dims).strides


def linear_offset(layout: Layout, idx) -> int:
    """Offset of a multi-index: sum of idx[i] * strides[i]."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != layout.order:
        raise IndexError(f"index of length {len(idx)} for order-{layout.order} layout")
    for i, d in zip(idx, layout.dims):
        if not 0 <= i < d:
            raise IndexError(f"index {idx} out of range for dims {layout.dims}")
    return sum(i * s for i, s in zip(idx, layout.strides))


def can_flatten(layout: Layout, i: int, j: int) -> bool:
    """True iff modes i (inner) and j (outer) merge: ld<j> == ld<i>*dim<i>."""
    if i == j:
        raise ValueError("flattening requires two distinct modes")
    if not (0 <= i < layout.order and 0 <= j < layout.order):
        raise IndexError(f"mode out of range for order {layout.order}")
    return layout.strides[j] == layout.strides[i] * layout.dims[i]


def flatten(layout: Layout, i: int, j: int) -> Layout:
    """Merge modes i and j into one mode of extent dim<i>*dim<j> at position i."""
    if not can_flatten(layout, i, j):
        raise IllegalFlattenError(
            f"cannot flatten modes ({i},{j}) of dims={layout.dims} strides={layout.strides}"
        )
    dims = list(layout.dims)
    strides = list(layout.strides)
    dims[i] = dims[i] * dims[j]
    del dims[j], strides[j]
    return Layout(tuple(dims), tuple(strides))


@dataclass(frozen=True)
class ModePermutation:
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        object.__setattr__(self, "perm", perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")

    def inverse(self) -> "ModePermutation":
        inv = [0] * len(self.perm)
        for i, p in enumerate(self.perm):
            inv[p] = i
        return ModePermutation(tuple(inv))


@dataclass(frozen=True)
class DenseTensor:
    """A Layout bound to a flat, column-major float64 buffer."""

    layout: Layout
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 1 or self.data.dtype != np.float64:
            raise ValueError("buffer must be a 1-D float64 array")
        if len(self.data) < self.layout.min_buffer_len():
            raise ValueError(
                f"buffer of length {len(self.data)} too small for layout {self.layout}"
            )

    @classmethod
    def zeros(cls, layout) -> "DenseTensor":
        if not isinstance(layout, Layout):
            layout = Layout.packed(layout)
        _record_allocation()
        return cls(layout, np.zeros(layout.min_buffer_len()))

    @classmethod
    def from_array(cls, arr) -> "DenseTensor":
        """Pack a numpy array (any memory order) into a fresh column-major tensor."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        _record_allocation()
        return cls(Layout.packed(arr.shape), arr.ravel(order="F").copy())

    def to_array(self) -> np.ndarray:
        """Zero-copy read-only numpy view of the tensor."""
        itemsize = self.data.itemsize
        view = np.lib.stride_tricks.as_strided(
            self.data,
            shape=self.layout.dims,
            strides=tuple(s * itemsize for s in self.layout.strides),
        )
        view.flags.writeable = False
        return view

    def writable_view(self) -> np.ndarray:
        itemsize = self.data.itemsize
        return np.lib.stride_tricks.as_strided(
            self.data,
            shape=self.layout.dims,
            strides=tuple(s * itemsize for s in self.layout.strides),
        )

    def __getitem__(self, idx) -> float:
        if isinstance(idx, int):
            idx = (idx,)
        return float(self.data[linear_offset(self.layout, idx)])

    def __setitem__(self, idx, value) -> None:
        if isinstance(idx, int):
            idx = (idx,)
        self.data[linear_offset(self.layout, idx)] = value


def permute_copy(t: DenseTensor, perm) -> DenseTensor:
    """Materialize a packed copy with mode i drawn from t's mode perm[i].

    Counts as one explicit transposition in the instrumentation stats.
    """
    if not isinstance(perm, ModePermutation):
        perm = ModePermutation(tuple(perm))
    if len(perm.perm) != t.layout.order:
        raise ValueError(
            f"permutation of length {len(perm.perm)} for order-{t.layout.order} tensor"
        )
    src = np.transpose(t.to_array(), axes=perm.perm)
    _record_transposition()
    return DenseTensor.from_array(src)


def unfold(t: DenseTensor, r: int) -> DenseTensor:
    """Mode-r unfolding: packed (dim<r>, prod of the rest) matrix copy.

    Columns enumerate the non-r modes in ascending mode order.
    """
    if not 0 <= r < t.layout.order:
        raise IndexError(f"mode {r} out of range for order {t.layout.order}")
    src = t.to_array()
    rows = t.layout.dims[r]
    mat = np.moveaxis(src, r, 0).reshape((rows, -1), order="F")
    if mat.shape[1] == 0:
        mat = mat.reshape((rows, 1), order="F")
    return DenseTensor.from_array(mat)

import numpy as np
import pytest

from sbtensor.layout import DenseTensor, Layout
from sbtensor.notation import ContractionSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20260824)


def make_operands(spec: ContractionSpec, ext: dict, rng, c_random=False):
    """Packed operands with the given per-label extents."""
    la = Layout.packed([ext[l] for l in spec.labels_a])
    lb = Layout.packed([ext[l] for l in spec.labels_b])
    lc = Layout.packed([ext[l] for l in spec.labels_c] or [1])
    a = DenseTensor.from_array(rng.uniform(-1, 1, la.dims))
    b = DenseTensor.from_array(rng.uniform(-1, 1, lb.dims))
    if c_random:
        c = DenseTensor.from_array(rng.uniform(-1, 1, lc.dims))
    else:
        c = DenseTensor.zeros(lc)
    return a, b, c


def clone(t: DenseTensor) -> DenseTensor:
    return DenseTensor.from_array(t.to_array().copy())


def max_rel_err(got: DenseTensor, want: DenseTensor) -> float:
    denom = float(np.max(np.abs(want.data)))
    if denom == 0.0:
        return float(np.max(np.abs(got.data)))
    return float(np.max(np.abs(got.data - want.data)) / denom)

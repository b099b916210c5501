"""Vectorized numpy fallback for the hot kernels.

Matrices are addressed as (base offset, row stride, column stride) over flat
float64 buffers, so transpose and extended operand flags reduce to stride
swaps upstream.
"""
from __future__ import annotations

import numpy as np

_IT = 8  # float64 itemsize


def _mview(buf, off, rows, cols, rs, cs):
    return np.lib.stride_tricks.as_strided(
        buf[off:], shape=(rows, cols), strides=(rs * _IT, cs * _IT)
    )


def gemm_core(m, n, k, alpha, a, oa, ars, acs, b, ob, brs, bcs, beta, c, oc, crs, ccs):
    av = _mview(a, oa, m, k, ars, acs)
    bv = _mview(b, ob, k, n, brs, bcs)
    cv = _mview(c, oc, m, n, crs, ccs)
    prod = av @ bv
    if beta == 0.0:
        cv[...] = alpha * prod
    else:
        cv *= beta
        cv += alpha * prod


def batched_core(m, n, k, alpha, a, oa, ars, acs, apt,
                 b, ob, brs, bcs, bpt, beta, c, oc, crs, ccs, cpt, batch):
    for p in range(batch):
        gemm_core(m, n, k, alpha,
                  a, oa + p * apt, ars, acs,
                  b, ob + p * bpt, brs, bcs,
                  beta, c, oc + p * cpt, crs, ccs)


# In the numpy fallback the "3D tiled" extended path degenerates to the
# per-batch loop; tiling only matters for the jitted loops.
ext_batched_core = batched_core


def blocked_core(m, n, k, alpha, a, oa, ars, acs, b, ob, brs, bcs,
                 beta, c, oc, crs, ccs, tm, tn, tk):
    cv = _mview(c, oc, m, n, crs, ccs)
    if beta == 0.0:
        cv[...] = 0.0
    else:
        cv *= beta
    av = _mview(a, oa, m, k, ars, acs)
    bv = _mview(b, ob, k, n, brs, bcs)
    for j0 in range(0, n, tn):
        j1 = min(j0 + tn, n)
        for i0 in range(0, m, tm):
            i1 = min(i0 + tm, m)
            for l0 in range(0, k, tk):
                l1 = min(l0 + tk, k)
                cv[i0:i1, j0:j1] += alpha * (av[i0:i1, l0:l1] @ bv[l0:l1, j0:j1])

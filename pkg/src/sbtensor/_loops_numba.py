"""Jitted hot loops: GEMM over arbitrary-strided flat buffers.

Accumulation inside one GEMM is k-innermost ascending, so results are
bitwise reproducible run to run.
"""
from __future__ import annotations

import numba
import numpy as np  # noqa: F401  (numba lowers np scalars in the kernels)


@numba.njit(cache=True, nogil=True)
def gemm_core(m, n, k, alpha, a, oa, ars, acs, b, ob, brs, bcs, beta, c, oc, crs, ccs):
    for j in range(n):
        for i in range(m):
            acc = 0.0
            pa = oa + i * ars
            pb = ob + j * bcs
            for l in range(k):
                acc += a[pa + l * acs] * b[pb + l * brs]
            pc = oc + i * crs + j * ccs
            if beta == 0.0:
                c[pc] = alpha * acc
            else:
                c[pc] = alpha * acc + beta * c[pc]


@numba.njit(cache=True, nogil=True)
def batched_core(m, n, k, alpha, a, oa, ars, acs, apt,
                 b, ob, brs, bcs, bpt, beta, c, oc, crs, ccs, cpt, batch):
    for p in range(batch):
        gemm_core(m, n, k, alpha,
                  a, oa + p * apt, ars, acs,
                  b, ob + p * bpt, brs, bcs,
                  beta, c, oc + p * cpt, crs, ccs)


@numba.njit(cache=True, nogil=True)
def ext_batched_core(m, n, k, alpha, a, oa, ars, acs, apt,
                     b, ob, brs, bcs, bpt, beta, c, oc, crs, ccs, cpt, batch):
    """Batched GEMM with a "3D" (row, col, batch) tiling of the operands.

    Used when one operand is batched in its unit-stride first mode; tiling
    the batch dimension keeps its contiguous runs in cache.  k stays
    innermost ascending within each (i, j, p) cell.
    """
    tm = 32
    tn = 32
    tp = 16
    for p0 in range(0, batch, tp):
        p1 = min(p0 + tp, batch)
        for j0 in range(0, n, tn):
            j1 = min(j0 + tn, n)
            for i0 in range(0, m, tm):
                i1 = min(i0 + tm, m)
                for p in range(p0, p1):
                    for j in range(j0, j1):
                        for i in range(i0, i1):
                            acc = 0.0
                            pa = oa + p * apt + i * ars
                            pb = ob + p * bpt + j * bcs
                            for l in range(k):
                                acc += a[pa + l * acs] * b[pb + l * brs]
                            pc = oc + p * cpt + i * crs + j * ccs
                            if beta == 0.0:
                                c[pc] = alpha * acc
                            else:
                                c[pc] = alpha * acc + beta * c[pc]


@numba.njit(cache=True, nogil=True)
def blocked_core(m, n, k, alpha, a, oa, ars, acs, b, ob, brs, bcs,
                 beta, c, oc, crs, ccs, tm, tn, tk):
    for j in range(n):
        for i in range(m):
            pc = oc + i * crs + j * ccs
            if beta == 0.0:
                c[pc] = 0.0
            else:
                c[pc] = beta * c[pc]
    for j0 in range(0, n, tn):
        j1 = min(j0 + tn, n)
        for i0 in range(0, m, tm):
            i1 = min(i0 + tm, m)
            for l0 in range(0, k, tk):
                l1 = min(l0 + tk, k)
                for j in range(j0, j1):
                    for i in range(i0, i1):
                        acc = 0.0
                        pa = oa + i * ars
                        pb = ob + j * bcs
                        for l in range(l0, l1):
                            acc += a[pa + l * acs] * b[pb + l * brs]
                        c[oc + i * crs + j * ccs] += alpha * acc

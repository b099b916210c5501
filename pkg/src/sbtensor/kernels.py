"""BLAS-like kernels over flat column-major buffers.

All entry points take flat float64 numpy arrays plus explicit leading
dimensions, mirroring the classic interfaces: ``gemm``, level-2 kernels,
``strided_batched_gemm`` (leading-order strides between batch matrices) and
its extended-operation variant that batches an operand's unit-stride first
mode in place.
"""
from __future__ import annotations

import csv
import enum
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend


class Op(str, enum.Enum):
    Normal = "N"
    Transpose = "T"
    ExtendedNormal = "EN"
    ExtendedTranspose = "ET"


_PLAIN = (Op.Normal, Op.Transpose)
_EXTENDED = (Op.ExtendedNormal, Op.ExtendedTranspose)


@dataclass(frozen=True)
class KernelArgs:
    """Resolved argument block for one (possibly batched) kernel call."""

    opa: Op
    opb: Op
    m: int
    n: int
    k: int
    alpha: float
    beta: float
    lda: int
    loa: int
    ldb: int
    lob: int
    ldc: int
    loc: int
    batch_count: int = 0


def _as_op(op) -> Op:
    if isinstance(op, Op):
        return op
    try:
        return Op(op)
    except ValueError:
        raise ValueError(f"unsupported op flag {op!r} (conjugate/Hermitian are rejected)")


def _plain_strides(op: Op, rows: int, cols: int, ld: int, what: str):
    """(row stride, col stride) of op(X) given X's storage and leading dim."""
    if op is Op.Normal:
        if ld < rows:
            raise ValueError(f"{what}: leading dimension {ld} < stored rows {rows}")
        return 1, ld
    if ld < cols:
        raise ValueError(f"{what}: leading dimension {ld} < stored rows {cols}")
    return ld, 1


def _check_shapes(m, n, k, batch_count=0):
    if m < 1 or n < 1 or k < 1:
        raise ValueError(f"extents must be positive, got m={m} n={n} k={k}")
    if batch_count < 0:
        raise ValueError("batch_count must be non-negative")


def _check_c_disjoint(m, n, ldc, loc, batch_count):
    """Conservative disjointness check on the batch regions of C."""
    if batch_count <= 1:
        return
    interleaved = loc >= m and ldc >= loc * batch_count
    stacked = ldc >= m and loc >= n * ldc
    if not (interleaved or stacked):
        raise ValueError(
            f"overlapping C batch regions: m={m} n={n} ldc={ldc} loc={loc} batch={batch_count}"
        )


def gemm(opa, opb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc,
         offa=0, offb=0, offc=0):
    """C = alpha * op(A) * op(B) + beta * C on column-major buffers.

    With beta == 0 the prior contents of C are never read.
    """
    opa, opb = _as_op(opa), _as_op(opb)
    if opa not in _PLAIN or opb not in _PLAIN:
        raise ValueError("extended op flags are only accepted by strided_batched_gemm_ex")
    _check_shapes(m, n, k)
    ars, acs = _plain_strides(opa, m, k, lda, "A")
    brs, bcs = _plain_strides(opb, k, n, ldb, "B")
    if ldc < m:
        raise ValueError(f"C: leading dimension {ldc} < rows {m}")
    backend.gemm_core(m, n, k, float(alpha), a, offa, ars, acs,
                      b, offb, brs, bcs, float(beta), c, offc, 1, ldc)


def gemv(op, m, n, alpha, a, lda, x, incx, beta, y, incy,
         offa=0, offx=0, offy=0):
    """y = alpha * op(A) x + beta * y with A stored m x n."""
    op = _as_op(op)
    if op not in _PLAIN:
        raise ValueError("gemv accepts Normal or Transpose only")
    _check_shapes(m, n, 1)
    if lda < m:
        raise ValueError(f"A: leading dimension {lda} < rows {m}")
    it = a.itemsize
    av = np.lib.stride_tricks.as_strided(a[offa:], (m, n), (it, lda * it))
    xlen, ylen = (n, m) if op is Op.Normal else (m, n)
    xv = np.lib.stride_tricks.as_strided(x[offx:], (xlen,), (incx * it,))
    yv = np.lib.stride_tricks.as_strided(y[offy:], (ylen,), (incy * it,))
    prod = av @ xv if op is Op.Normal else av.T @ xv
    if beta == 0.0:
        yv[...] = alpha * prod
    else:
        yv *= beta
        yv += alpha * prod


def ger(m, n, alpha, x, incx, y, incy, a, lda, offx=0, offy=0, offa=0):
    """A += alpha * x * y^T with A stored m x n."""
    _check_shapes(m, n, 1)
    if lda < m:
        raise ValueError(f"A: leading dimension {lda} < rows {m}")
    it = a.itemsize
    av = np.lib.stride_tricks.as_strided(a[offa:], (m, n), (it, lda * it))
    xv = np.lib.stride_tricks.as_strided(x[offx:], (m,), (incx * it,))
    yv = np.lib.stride_tricks.as_strided(y[offy:], (n,), (incy * it,))
    av += alpha * np.outer(xv, yv)


def dot(n, x, incx, y, incy, offx=0, offy=0) -> float:
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0.0
    it = x.itemsize
    xv = np.lib.stride_tricks.as_strided(x[offx:], (n,), (incx * it,))
    yv = np.lib.stride_tricks.as_strided(y[offy:], (n,), (incy * it,))
    return float(xv @ yv)


def strided_batched_gemm(opa, opb, m, n, k, alpha, a, lda, loa, b, ldb, lob,
                         beta, c, ldc, loc, batch_count,
                         offa=0, offb=0, offc=0, threads=1):
    """batch_count GEMMs at constant strides loa/lob/loc between matrices.

    Bit-identical to the sequential loop of independent gemm calls.
    """
    opa, opb = _as_op(opa), _as_op(opb)
    if opa not in _PLAIN or opb not in _PLAIN:
        raise ValueError("extended op flags are only accepted by strided_batched_gemm_ex")
    _check_shapes(m, n, k, batch_count)
    if batch_count == 0:
        return
    ars, acs = _plain_strides(opa, m, k, lda, "A")
    brs, bcs = _plain_strides(opb, k, n, ldb, "B")
    if ldc < m:
        raise ValueError(f"C: leading dimension {ldc} < rows {m}")
    _check_c_disjoint(m, n, ldc, loc, batch_count)
    _run_batched(backend.batched_core, m, n, k, alpha,
                 a, offa, ars, acs, loa, b, offb, brs, bcs, lob,
                 beta, c, offc, 1, ldc, loc, batch_count, threads)


def _ex_resolve(opa, opb, m, n, k, lda, loa, ldb, lob):
    """Stride tuples for the extended call.

    For the extended operand the batch index is its unit-stride first mode
    and the (ld, lo) slots are repurposed as the leading dimensions of its
    remaining two modes in row-column storage order.
    """
    a_ext = opa in _EXTENDED
    b_ext = opb in _EXTENDED
    if a_ext == b_ext:
        raise ValueError("exactly one operand must carry an extended op flag")
    if a_ext:
        if opb not in _PLAIN:
            raise ValueError("non-extended operand must be Normal or Transpose")
        ars, acs = (lda, loa) if opa is Op.ExtendedNormal else (loa, lda)
        apt = 1
        brs, bcs = _plain_strides(opb, k, n, ldb, "B")
        bpt = lob
    else:
        if opa not in _PLAIN:
            raise ValueError("non-extended operand must be Normal or Transpose")
        ars, acs = _plain_strides(opa, m, k, lda, "A")
        apt = loa
        brs, bcs = (ldb, lob) if opb is Op.ExtendedNormal else (lob, ldb)
        bpt = 1
    return ars, acs, apt, brs, bcs, bpt


def strided_batched_gemm_ex(opa, opb, m, n, k, alpha, a, lda, loa, b, ldb, lob,
                            beta, c, ldc, loc, batch_count,
                            offa=0, offb=0, offc=0, threads=1):
    """Strided batched GEMM with one operand batched in its first stored mode.

    Equivalent to permuting that operand's first mode to the end and calling
    strided_batched_gemm, but touches no intermediate buffer.
    """
    opa, opb = _as_op(opa), _as_op(opb)
    _check_shapes(m, n, k, batch_count)
    if batch_count == 0:
        return
    ars, acs, apt, brs, bcs, bpt = _ex_resolve(opa, opb, m, n, k, lda, loa, ldb, lob)
    if ldc < m:
        raise ValueError(f"C: leading dimension {ldc} < rows {m}")
    _check_c_disjoint(m, n, ldc, loc, batch_count)
    _run_batched(backend.ext_batched_core, m, n, k, alpha,
                 a, offa, ars, acs, apt, b, offb, brs, bcs, bpt,
                 beta, c, offc, 1, ldc, loc, batch_count, threads)


def strided_batched_gemm_ex_reference(opa, opb, m, n, k, alpha, a, lda, loa,
                                      b, ldb, lob, beta, c, ldc, loc, batch_count,
                                      offa=0, offb=0, offc=0):
    """Naive per-batch loop variant of the extended kernel, for differential tests."""
    opa, opb = _as_op(opa), _as_op(opb)
    _check_shapes(m, n, k, batch_count)
    if batch_count == 0:
        return
    ars, acs, apt, brs, bcs, bpt = _ex_resolve(opa, opb, m, n, k, lda, loa, ldb, lob)
    _check_c_disjoint(m, n, ldc, loc, batch_count)
    for p in range(batch_count):
        backend.gemm_core(m, n, k, float(alpha),
                          a, offa + p * apt, ars, acs,
                          b, offb + p * bpt, brs, bcs,
                          float(beta), c, offc + p * loc, 1, ldc)


def _run_batched(core, m, n, k, alpha, a, offa, ars, acs, apt,
                 b, offb, brs, bcs, bpt, beta, c, offc, crs, ccs, cpt,
                 batch_count, threads):
    alpha = float(alpha)
    beta = float(beta)
    if threads <= 1 or batch_count < 2:
        core(m, n, k, alpha, a, offa, ars, acs, apt, b, offb, brs, bcs, bpt,
             beta, c, offc, crs, ccs, cpt, batch_count)
        return
    # Batch regions of C are disjoint, so chunks may run concurrently.
    nchunks = min(threads, batch_count)
    bounds = [batch_count * i // nchunks for i in range(nchunks + 1)]
    with ThreadPoolExecutor(max_workers=nchunks) as pool:
        futures = []
        for lo, hi in zip(bounds, bounds[1:]):
            futures.append(pool.submit(
                core, m, n, k, alpha,
                a, offa + lo * apt, ars, acs, apt,
                b, offb + lo * bpt, brs, bcs, bpt,
                beta, c, offc + lo * cpt, crs, ccs, cpt, hi - lo))
        for f in futures:
            f.result()


def blocked_gemm(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc,
                 tiles=(32, 32, 32), opa=Op.Normal, opb=Op.Normal,
                 offa=0, offb=0, offc=0):
    """Cache-blocked GEMM with (tm, tn, tk) tile extents."""
    opa, opb = _as_op(opa), _as_op(opb)
    if opa not in _PLAIN or opb not in _PLAIN:
        raise ValueError("blocked_gemm accepts Normal or Transpose only")
    _check_shapes(m, n, k)
    tm, tn, tk = (int(t) for t in tiles)
    if tm < 1 or tn < 1 or tk < 1:
        raise ValueError("tile extents must be positive")
    ars, acs = _plain_strides(opa, m, k, lda, "A")
    brs, bcs = _plain_strides(opb, k, n, ldb, "B")
    if ldc < m:
        raise ValueError(f"C: leading dimension {ldc} < rows {m}")
    backend.blocked_core(m, n, k, float(alpha), a, offa, ars, acs,
                         b, offb, brs, bcs, float(beta), c, offc, 1, ldc, tm, tn, tk)


def _is_pow2_tile(t: int) -> bool:
    return 1 <= t <= 128 and (t & (t - 1)) == 0


def blocked_gemm_tile_search(sizes, candidates=(8, 16, 32), reps=3, seed=0):
    """Sweep (tm, tn, tp, tk) tile tuples over the blocked batched GEMM.

    sizes is (m, n, p, k) with p the batch extent.  Every candidate's result
    is checked against the plain reference gemm before it is timed.  Returns
    (best_tiles, rows) with one row dict per candidate tuple; tiles larger
    than their extent are recorded with status "skipped".
    """
    m, n, p, k = (int(s) for s in sizes)
    _check_shapes(m, n, k, p)
    cand = sorted(set(int(t) for t in candidates))
    for t in cand:
        if not _is_pow2_tile(t):
            raise ValueError(f"tile candidate {t} is not a power of two in [1, 128]")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=m * k * p)
    b = rng.uniform(-1.0, 1.0, size=k * n * p)
    ref = np.empty(m * n * p)
    got = np.empty(m * n * p)
    for q in range(p):
        gemm(Op.Normal, Op.Normal, m, n, k, 1.0, a, m, b, k, 0.0, ref, m,
             offa=q * m * k, offb=q * k * n, offc=q * m * n)
    scale = max(1.0, float(np.max(np.abs(ref))))

    rows = []
    best = None
    best_t = None
    for tm in cand:
        for tn in cand:
            for tp in cand:
                for tk in cand:
                    row = {"tm": tm, "tn": tn, "tp": tp, "tk": tk,
                           "micros": "", "status": "ok"}
                    rows.append(row)
                    if tm > m or tn > n or tp > p or tk > k:
                        row["status"] = "skipped"
                        continue

                    def run():
                        for q0 in range(0, p, tp):
                            for q in range(q0, min(q0 + tp, p)):
                                blocked_gemm(m, n, k, 1.0, a, m, b, k, 0.0, got, m,
                                             tiles=(tm, tn, tk),
                                             offa=q * m * k, offb=q * k * n,
                                             offc=q * m * n)

                    run()
                    err = float(np.max(np.abs(got - ref))) / scale
                    if err > 1e-13:
                        raise RuntimeError(
                            f"blocked gemm tiles ({tm},{tn},{tp},{tk}) "
                            f"disagree with reference: rel err {err:.3e}")
                    times = []
                    for _ in range(reps):
                        t0 = time.perf_counter()
                        run()
                        times.append((time.perf_counter() - t0) * 1e6)
                    micros = statistics.median(times)
                    row["micros"] = f"{micros:.3f}"
                    if best is None or micros < best:
                        best = micros
                        best_t = (tm, tn, tp, tk)
    if best_t is None:
        raise ValueError("no feasible tile candidate for the given sizes")
    return best_t, rows


def tile_table_to_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["tm", "tn", "tp", "tk", "micros", "status"])
        writer.writeheader()
        writer.writerows(rows)

"""Tucker decomposition by higher-order orthogonal iteration.

Factors start from the truncated HOSVD of each unfolding; every mode product
in the iteration is evaluated through the single-mode contraction planner,
so no tensor is ever transposed or copied.  Leading singular vectors come
from a cyclic Jacobi eigensolver on the Gram matrix of the unfolding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layout import DenseTensor, Layout, unfold
from .notation import ContractionSpec
from .planner import execute_plan, plan_single_mode

_LETTERS = "abcdefgh"          # per-mode labels for planned contractions


def jacobi_eigh(sym: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvalues descending and
    columns of the eigenvector matrix matching that order.  Converges when
    the off-diagonal Frobenius norm falls below tol * ||sym||_F.
    """
    a = np.array(sym, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * norm / max(1, n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                cc = 1.0 / np.sqrt(t * t + 1.0)
                ss = t * cc
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = cc
                rot[p, q] = ss
                rot[q, p] = -ss
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[order], v[:, order]


def leading_left_singular_vectors(mat: np.ndarray, rank: int) -> np.ndarray:
    """First `rank` left singular vectors, via Jacobi on the Gram matrix."""
    rows = mat.shape[0]
    if rank > rows:
        raise ValueError(f"rank {rank} exceeds row count {rows}")
    gram = mat @ mat.T
    _, vecs = jacobi_eigh(gram)
    u = vecs[:, :rank].copy()
    # fix signs so the largest-magnitude entry of each vector is positive
    for j in range(rank):
        i = np.argmax(np.abs(u[:, j]))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
    return u


@dataclass
class TuckerModel:
    core: DenseTensor
    factors: list[np.ndarray]      # factors[r] is dim_r x rank_r
    fit_history: list[float]
    iterations: int


def _mode_product_chain(t: DenseTensor, factors, skip: int | None,
                        transpose: bool) -> DenseTensor:
    """Apply U_r (or U_r^T) along every mode except `skip`.

    Each product is one planned single-mode contraction; modes with the
    larger reduction extent are contracted first.
    """
    order = t.layout.order
    modes = [r for r in range(order) if r != skip]
    # reduction extent of mode r is the extent being summed away
    def red(r):
        return t.layout.dims[r] if transpose else factors[r].shape[1]
    modes.sort(key=lambda r: -red(r))
    cur = t
    for r in modes:
        u = factors[r]
        rows, cols = u.shape
        # B holds U stored dim_r x rank_r; transpose=True contracts dim_r
        if transpose:
            out_ext = cols
            labels_b = ("k", "z")
        else:
            out_ext = rows
            labels_b = ("z", "k")
        labels_a = tuple("k" if i == r else _LETTERS[i] for i in range(order))
        labels_c = tuple("z" if i == r else _LETTERS[i] for i in range(order))
        spec = ContractionSpec(labels_a, labels_b, labels_c)
        lb = Layout.packed(u.shape)
        out_dims = list(cur.layout.dims)
        out_dims[r] = out_ext
        lc = Layout.packed(out_dims)
        b = DenseTensor.from_array(u)
        out = DenseTensor.zeros(lc)
        plan = plan_single_mode(spec, cur.layout, lb, lc)
        execute_plan(plan, cur, b, 1.0, 0.0, out)
        cur = out
    return cur


def tucker_core(t: DenseTensor, factors) -> DenseTensor:
    """G = T x_1 U_1^T x_2 U_2^T ... computed via planned contractions."""
    return _mode_product_chain(t, factors, skip=None, transpose=True)


def tucker_reconstruct(model: TuckerModel) -> DenseTensor:
    return _mode_product_chain(model.core, model.factors, skip=None,
                               transpose=False)


def hooi(t: DenseTensor, ranks, max_iters: int = 50, tol: float = 1e-10) -> TuckerModel:
    """Higher-order orthogonal iteration.

    Initializes each factor from the truncated HOSVD of the mode-r unfolding,
    then alternates: project T with every factor but one, refresh that factor
    from the projection's unfolding.  Stops when the fit improvement drops
    below tol or max_iters is reached.
    """
    order = t.layout.order
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != order:
        raise ValueError(f"need {order} ranks, got {len(ranks)}")
    for r, (rank, dim) in enumerate(zip(ranks, t.layout.dims)):
        if not 1 <= rank <= dim:
            raise ValueError(f"rank {rank} invalid for mode {r} extent {dim}")

    factors = [leading_left_singular_vectors(unfold(t, r).to_array(), ranks[r])
               for r in range(order)]
    norm_t = float(np.linalg.norm(t.data))
    fit_history: list[float] = []
    prev_fit = -np.inf
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        for r in range(order):
            y = _mode_product_chain(t, factors, skip=r, transpose=True)
            factors[r] = leading_left_singular_vectors(unfold(y, r).to_array(), ranks[r])
        core = tucker_core(t, factors)
        # ||T - rec||^2 = ||T||^2 - ||G||^2 for orthonormal factors
        norm_g = float(np.linalg.norm(core.data))
        resid = np.sqrt(max(0.0, norm_t ** 2 - norm_g ** 2))
        fit = 1.0 - resid / norm_t if norm_t > 0 else 1.0
        fit_history.append(fit)
        if fit - prev_fit < tol and it > 0:
            break
        prev_fit = fit
    core = tucker_core(t, factors)
    return TuckerModel(core=core, factors=factors, fit_history=fit_history,
                       iterations=iters)

"""Single-mode contraction planning onto transpose-free batched kernels.

A plan flattens output substrings into larger GEMM modes where strides
permit, picks one batched mode (largest extent that is not the first stored
mode of any matrix term), nests remaining free modes as outer loops, and
falls back to the extended-operation batched kernel when the only viable
batch mode is an operand's unit-stride first mode.  A conventional
permute-then-GEMM plan and a batched-GEMV plan are available as overrides.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial, prod

import numpy as np

from . import kernels
from .kernels import KernelArgs, Op
from .layout import DenseTensor, Layout, permute_copy
from .notation import ContractionSpec, classify_indices, kernel_family


class PlanError(ValueError):
    pass


class UnsupportedContractionError(PlanError):
    """The single-mode planner requires exactly one contracted index."""


class PlanConsistencyError(PlanError):
    """Tensors passed to execute_plan do not match the planned layouts."""


_FREE_LETTERS = "mnpqrstuvw"


@dataclass(frozen=True)
class Mode:
    label: str
    extent: int
    stride: int


@dataclass(frozen=True)
class FlattenStep:
    tensor: str                 # "A" | "B" | "C"
    labels: tuple[str, ...]     # merged labels, storage order
    merged: str


@dataclass(frozen=True)
class LoopStep:
    label: str
    extent: int


@dataclass(frozen=True)
class GemmStep:
    first: str                  # tensor providing GEMM rows: "A" | "B"
    op_first: Op
    op_second: Op
    m_label: str | None
    n_label: str | None
    k_label: str


@dataclass(frozen=True)
class BatchedStep:
    gemm: GemmStep
    batch_label: str
    extent: int
    extended: bool = False


@dataclass(frozen=True)
class GemvBatchStep:
    loop_labels: tuple[str, ...]
    matrix: str                 # tensor acting as the GEMV matrix
    op: Op
    v_label: str                # output mode of each GEMV
    k_label: str


@dataclass(frozen=True)
class PermuteStep:
    tensor: str
    perm: tuple[int, ...]


@dataclass(frozen=True)
class ConventionalInfo:
    free_a: tuple[str, ...]
    free_b: tuple[str, ...]
    contracted: tuple[str, ...]
    op_a: Op
    op_b: Op
    permute_a: tuple[int, ...] | None
    permute_b: tuple[int, ...] | None
    c_matches: bool             # C's label order is already free_a + free_b
    family: str
    policy: str


@dataclass
class EvaluationPlan:
    spec: ContractionSpec
    layout_a: Layout
    layout_b: Layout
    layout_c: Layout
    strategy: str
    steps: list = field(default_factory=list)
    predicted_transpositions: int = 0
    eff: dict = field(default_factory=dict)      # tensor -> tuple[Mode, ...]
    conventional: ConventionalInfo | None = None


@dataclass(frozen=True)
class CaseDescriptor:
    case_id: str
    labels_a: tuple[str, ...]
    labels_b: tuple[str, ...]
    labels_c: tuple[str, ...]
    classification: str         # single-gemm | strided-batched | exceptional


# ---------------------------------------------------------------------------
# case enumeration


def enumerate_cases(order_a: int, order_b: int) -> list[CaseDescriptor]:
    """Every unique single-mode contraction pattern for the given orders.

    Count is (order_a + order_b - 2)! * order_a * order_b; for orders (2, 3)
    the family.variant ids match the standard 6x6 table with C fixed as mnp.
    """
    if order_a < 1 or order_b < 1:
        raise ValueError("orders must be >= 1")
    n_free = order_a + order_b - 2
    if n_free > len(_FREE_LETTERS):
        raise ValueError("orders too large to label")
    free = tuple(_FREE_LETTERS[:n_free])
    cases = []
    family = 0
    for a_free in itertools.permutations(free, order_a - 1):
        remaining = [l for l in free if l not in a_free]
        for kpos_a in range(order_a - 1, -1, -1):
            family += 1
            labels_a = list(a_free)
            labels_a.insert(kpos_a, "k")
            variant = 0
            for kpos_b in range(order_b):
                for b_free in itertools.permutations(remaining):
                    variant += 1
                    labels_b = list(b_free)
                    labels_b.insert(kpos_b, "k")
                    spec = ContractionSpec(tuple(labels_a), tuple(labels_b), free)
                    cases.append(CaseDescriptor(
                        case_id=f"{family}.{variant}",
                        labels_a=tuple(labels_a),
                        labels_b=tuple(labels_b),
                        labels_c=free,
                        classification=_classify(spec),
                    ))
    assert len(cases) == factorial(n_free) * order_a * order_b
    return cases


def find_case(order_a: int, order_b: int, case_id: str) -> CaseDescriptor:
    for case in enumerate_cases(order_a, order_b):
        if case.case_id == case_id:
            return case
    raise PlanError(f"no case {case_id} for orders ({order_a}, {order_b})")


def _canonical_layouts(spec: ContractionSpec):
    """Packed layouts with distinct extents per label, for structural analysis."""
    extent = {lab: 3 + i for i, lab in
              enumerate(sorted(set(spec.labels_a) | set(spec.labels_b)))}
    return (Layout.packed([extent[l] for l in spec.labels_a]),
            Layout.packed([extent[l] for l in spec.labels_b]),
            Layout.packed([extent[l] for l in spec.labels_c])
            if spec.labels_c else Layout.packed([1]))


def _classify(spec: ContractionSpec) -> str:
    la, lb, lc = _canonical_layouts(spec)
    plan = plan_single_mode(spec, la, lb, lc)
    if plan.strategy == "flattened-gemm":
        return "single-gemm"
    if plan.strategy == "extended-batched":
        return "exceptional"
    return "strided-batched"


def classify_case(case: CaseDescriptor) -> str:
    return case.classification


# ---------------------------------------------------------------------------
# single-mode planning


def _modes(labels, layout: Layout) -> list[Mode]:
    if len(labels) != layout.order:
        raise PlanError(f"{len(labels)} labels for order-{layout.order} layout")
    return [Mode(l, d, s) for l, d, s in zip(labels, layout.dims, layout.strides)]


def _find(eff, label):
    for i, mode in enumerate(eff):
        if mode.label == label:
            return i
    return -1


def plan_single_mode(spec: ContractionSpec, layout_a: Layout, layout_b: Layout,
                     layout_c: Layout) -> EvaluationPlan:
    cls = classify_indices(spec)
    if len(cls.contracted) != 1:
        raise UnsupportedContractionError(
            f"single-mode planner requires exactly one contracted index, "
            f"got {cls.contracted}")
    k_label = cls.contracted[0]

    ea = _modes(spec.labels_a, layout_a)
    eb = _modes(spec.labels_b, layout_b)
    if not spec.labels_c:
        ec = []
        if layout_c.dims != (1,):
            raise PlanError("scalar output requires a single-element layout")
    else:
        ec = _modes(spec.labels_c, layout_c)
    extent = {m.label: m.extent for m in (*ea, *eb)}
    for m in ec:
        if extent.get(m.label) != m.extent:
            raise PlanError(f"extent mismatch for output label {m.label!r}")
    ka = next(m for m in ea if m.label == k_label)
    kb = next(m for m in eb if m.label == k_label)
    if ka.extent != kb.extent:
        raise PlanError(f"extent mismatch for contracted label {k_label!r}")

    plan = EvaluationPlan(spec=spec, layout_a=layout_a, layout_b=layout_b,
                          layout_c=layout_c, strategy="", steps=[])

    # Degenerate free modes are planned away and contribute offset zero.
    ea = [m for m in ea if m.label == k_label or m.extent > 1]
    eb = [m for m in eb if m.label == k_label or m.extent > 1]
    ec = [m for m in ec if m.extent > 1]

    # Greedy flattening of maximal output substrings that are contiguous,
    # same-order and stride-mergeable in both C and the owning input.
    owner_of = {m.label: "A" for m in ea}
    owner_of.update({m.label: "B" for m in eb if m.label != k_label})
    eff = {"A": ea, "B": eb, "C": ec}
    i = 0
    while i < len(ec) - 1:
        owner = owner_of[ec[i].label]
        own = eff[owner]
        j = i
        while j + 1 < len(ec):
            nxt = ec[j + 1]
            if owner_of[nxt.label] != owner:
                break
            pos = _find(own, ec[j].label)
            if pos < 0 or pos + 1 >= len(own) or own[pos + 1].label != nxt.label:
                break
            if not (ec[j + 1].stride == ec[j].stride * ec[j].extent
                    and own[pos + 1].stride == own[pos].stride * own[pos].extent):
                break
            j += 1
        if j > i:
            run = [m.label for m in ec[i:j + 1]]
            merged = "".join(run)
            for tname in (owner, "C"):
                lst = eff[tname]
                pos = _find(lst, run[0])
                group = lst[pos:pos + len(run)]
                lst[pos:pos + len(run)] = [Mode(
                    merged, prod(g.extent for g in group), group[0].stride)]
                plan.steps.append(FlattenStep(tname, tuple(run), merged))
                owner_of[merged] = owner
        i += 1
        ec = eff["C"]

    plan.eff = {"A": tuple(eff["A"]), "B": tuple(eff["B"]), "C": tuple(eff["C"])}
    ea, eb, ec = eff["A"], eff["B"], eff["C"]

    if not ec:
        plan.steps.append(GemmStep(first="A", op_first=Op.Normal,
                                   op_second=Op.Normal, m_label=None,
                                   n_label=None, k_label=k_label))
        plan.strategy = "flattened-gemm"
        return plan

    if ec[0].stride != 1:
        raise PlanError("output's leading free mode must have unit stride")
    c1 = ec[0].label
    first = "A" if _find(ea, c1) >= 0 else "B"
    ex, ey = (ea, eb) if first == "A" else (eb, ea)

    free_x = [m for m in ex if m.label not in (c1, k_label)]
    free_y = [m for m in ey if m.label != k_label]

    def later_in_c(label):
        return _find(ec, label)

    # GEMM column mode from the second operand: forced to its first stored
    # mode when that mode is free, otherwise the free mode of largest extent.
    n_mode = None
    if free_y:
        if ey[0].label != k_label:
            n_mode = ey[0]
        else:
            n_mode = max(free_y, key=lambda m: (m.extent, later_in_c(m.label)))

    def _op_first():
        if ex[0].label == c1:
            return Op.Normal
        if ex[0].label == k_label:
            return Op.Transpose
        raise PlanError("first operand has no legal plain op")

    def _op_second():
        if n_mode is None:
            return Op.Normal  # k x 1 vector operand
        if ey[0].label == k_label:
            return Op.Normal
        if ey[0].label == n_mode.label:
            return Op.Transpose
        raise PlanError("second operand has no legal plain op")

    extended = ex[0].label not in (c1, k_label)
    rest = [m for m in free_x] + [m for m in free_y if n_mode is None
                                  or m.label != n_mode.label]

    if extended:
        batch = ex[0]
        rest = [m for m in rest if m.label != batch.label]
        # Extended operand: batch in its unit-stride first mode; flag tells
        # whether the remaining (row, col) pair is stored (m, k) or (k, m).
        pos_c1 = _find(ex, c1)
        pos_k = _find(ex, k_label)
        op_first = Op.ExtendedNormal if pos_c1 < pos_k else Op.ExtendedTranspose
        gemm = GemmStep(first=first, op_first=op_first, op_second=_op_second(),
                        m_label=c1, n_label=n_mode.label if n_mode else None,
                        k_label=k_label)
        loops = sorted(rest, key=lambda m: later_in_c(m.label))
        for m in loops:
            plan.steps.append(LoopStep(m.label, m.extent))
        plan.steps.append(BatchedStep(gemm, batch.label, batch.extent, extended=True))
        plan.strategy = "extended-batched"
        return plan

    gemm = GemmStep(first=first, op_first=_op_first(), op_second=_op_second(),
                    m_label=c1, n_label=n_mode.label if n_mode else None,
                    k_label=k_label)
    if not rest:
        plan.steps.append(gemm)
        plan.strategy = "flattened-gemm"
        return plan

    batch = max(rest, key=lambda m: (m.extent, later_in_c(m.label)))
    loops = sorted((m for m in rest if m.label != batch.label),
                   key=lambda m: later_in_c(m.label))
    for m in loops:
        plan.steps.append(LoopStep(m.label, m.extent))
    plan.steps.append(BatchedStep(gemm, batch.label, batch.extent))
    plan.strategy = "nested-batched" if loops else "strided-batched"
    return plan


def plan_batched_gemv(spec: ContractionSpec, layout_a: Layout, layout_b: Layout,
                      layout_c: Layout) -> EvaluationPlan:
    """Looped-GEMV evaluation; no copies, lower arithmetic intensity."""
    cls = classify_indices(spec)
    if len(cls.contracted) != 1:
        raise UnsupportedContractionError("batched-gemv planning is single-mode only")
    k_label = cls.contracted[0]
    plan = plan_single_mode(spec, layout_a, layout_b, layout_c)  # reuse squeeze/flatten
    ea, eb, ec = plan.eff["A"], plan.eff["B"], plan.eff["C"]
    if not ec:
        raise PlanError("scalar output has no batched-gemv form")
    c1 = ec[0].label
    first = "A" if _find(ea, c1) >= 0 else "B"
    ex = ea if first == "A" else eb
    if ex[0].label == k_label:
        v_label = c1
        op = Op.Transpose
    elif ex[0].label == c1:
        v_label = c1
        op = Op.Normal
    else:
        v_label = ex[0].label
        op = Op.Normal
    loops = tuple(m.label for m in ec if m.label != v_label)
    gplan = EvaluationPlan(spec=spec, layout_a=layout_a, layout_b=layout_b,
                           layout_c=layout_c, strategy="batched-gemv",
                           steps=[s for s in plan.steps if isinstance(s, FlattenStep)],
                           eff=plan.eff)
    gplan.steps.append(GemvBatchStep(loop_labels=loops, matrix=first, op=op,
                                     v_label=v_label, k_label=k_label))
    return gplan


# ---------------------------------------------------------------------------
# conventional (matricized) planning


def plan_conventional(spec: ContractionSpec, layout_a: Layout, layout_b: Layout,
                      layout_c: Layout, policy: str = "opt") -> EvaluationPlan:
    """Permute-and-matricize plan: bring operands to C_IJ = A_IK B_KJ form.

    policy "opt" replaces single leading-block swaps with transpose op flags
    and skips the output pre-permute when beta == 0; policy "naive" always
    materializes every permutation.
    """
    if policy not in ("opt", "naive"):
        raise PlanError(f"unknown conventional policy {policy!r}")
    cls = classify_indices(spec)
    plan = EvaluationPlan(spec=spec, layout_a=layout_a, layout_b=layout_b,
                          layout_c=layout_c, strategy="conventional", steps=[])
    _modes(spec.labels_a, layout_a)
    _modes(spec.labels_b, layout_b)
    if spec.labels_c:
        _modes(spec.labels_c, layout_c)
    for name, lay in (("A", layout_a), ("B", layout_b), ("C", layout_c)):
        if not lay.is_packed():
            raise PlanError(f"conventional evaluation requires packed {name}")

    target_a = cls.free_a + cls.contracted
    target_b = cls.contracted + cls.free_b
    op_a = op_b = Op.Normal
    perm_a = perm_b = None
    if spec.labels_a != target_a:
        if policy == "opt" and spec.labels_a == cls.contracted + cls.free_a:
            op_a = Op.Transpose
        else:
            perm_a = tuple(spec.labels_a.index(l) for l in target_a)
            plan.steps.append(PermuteStep("A", perm_a))
    if spec.labels_b != target_b:
        if policy == "opt" and spec.labels_b == cls.free_b + cls.contracted:
            op_b = Op.Transpose
        else:
            perm_b = tuple(spec.labels_b.index(l) for l in target_b)
            plan.steps.append(PermuteStep("B", perm_b))

    target_c = cls.free_a + cls.free_b
    c_matches = spec.labels_c == target_c
    if not c_matches:
        if policy == "naive" or spec.beta != 0.0:
            plan.steps.append(PermuteStep(
                "C", tuple(spec.labels_c.index(l) for l in target_c)))
        plan.steps.append(PermuteStep(
            "C", tuple(target_c.index(l) for l in spec.labels_c)))

    family = kernel_family(cls)
    plan.conventional = ConventionalInfo(
        free_a=cls.free_a, free_b=cls.free_b, contracted=cls.contracted,
        op_a=op_a, op_b=op_b, permute_a=perm_a, permute_b=perm_b,
        c_matches=c_matches, family=family, policy=policy)
    plan.predicted_transpositions = sum(
        1 for s in plan.steps if isinstance(s, PermuteStep))
    return plan


# ---------------------------------------------------------------------------
# execution


def _check_tensor(plan_layout: Layout, t: DenseTensor, name: str):
    if t.layout != plan_layout:
        raise PlanConsistencyError(
            f"layout of {name} drifted from the planned layout: "
            f"{t.layout} != {plan_layout}")


def _stride_of(eff, label):
    i = _find(eff, label)
    return eff[i].stride if i >= 0 else None


def execute_plan(plan: EvaluationPlan, a: DenseTensor, b: DenseTensor,
                 alpha: float, beta: float, c: DenseTensor,
                 threads: int = 1, counters=None) -> None:
    """Run a plan, mutating C in place."""
    _check_tensor(plan.layout_a, a, "A")
    _check_tensor(plan.layout_b, b, "B")
    _check_tensor(plan.layout_c, c, "C")
    if np.shares_memory(c.data, a.data) or np.shares_memory(c.data, b.data):
        raise PlanError("C must not alias A or B")

    if plan.strategy == "conventional":
        _execute_conventional(plan, a, b, alpha, beta, c, counters)
        return
    if plan.strategy == "batched-gemv":
        _execute_gemv(plan, a, b, alpha, beta, c, counters)
        return
    _execute_batched(plan, a, b, alpha, beta, c, threads, counters)


def _count_kernel(counters, kind):
    if counters is not None:
        counters.kernel_calls[kind] = counters.kernel_calls.get(kind, 0) + 1


def _execute_batched(plan, a, b, alpha, beta, c, threads, counters):
    eff = plan.eff
    ea, eb, ec = eff["A"], eff["B"], eff["C"]
    gemm_step = plan.steps[-1]
    batch = None
    if isinstance(gemm_step, BatchedStep):
        batch = gemm_step
        gemm_step = gemm_step.gemm
    loops = [s for s in plan.steps if isinstance(s, LoopStep)]

    ex, ey = (ea, eb) if gemm_step.first == "A" else (eb, ea)
    bx, by = (a, b) if gemm_step.first == "A" else (b, a)

    m_label, n_label, k_label = gemm_step.m_label, gemm_step.n_label, gemm_step.k_label
    extent = {mode.label: mode.extent for mode in (*ea, *eb, *ec)}
    m = extent[m_label] if m_label else 1
    n = extent[n_label] if n_label else 1
    k = extent[k_label]

    # Leading dimensions of the two operands and of C.
    if gemm_step.op_first is Op.Normal:
        lda = _stride_of(ex, k_label)
    elif gemm_step.op_first is Op.Transpose:
        lda = _stride_of(ex, m_label)
    else:  # extended: (ld, lo) = strides of the remaining modes, stored order
        rest = [mo for mo in ex if mo.label not in (batch.batch_label,)
                and mo.label in (m_label, k_label)]
        lda, loa_ex = rest[0].stride, rest[1].stride
    if gemm_step.op_second is Op.Normal:
        ldb = _stride_of(ey, n_label) if n_label else k
    else:
        ldb = _stride_of(ey, k_label)
    ldc = _stride_of(ec, n_label) if n_label else max(m, 1)

    def offsets(fixed):
        offs = {"A": 0, "B": 0, "C": 0}
        for label, idx in fixed:
            for tname, teff in (("A", ea), ("B", eb), ("C", ec)):
                s = _stride_of(teff, label)
                if s is not None:
                    offs[tname] += idx * s
        return offs

    loop_ranges = [range(extent[s.label]) for s in loops]
    for combo in itertools.product(*loop_ranges):
        fixed = list(zip((s.label for s in loops), combo))
        offs = offsets(fixed)
        ox = offs["A"] if gemm_step.first == "A" else offs["B"]
        oy = offs["B"] if gemm_step.first == "A" else offs["A"]
        oc = offs["C"]
        if batch is None:
            kernels.gemm(gemm_step.op_first, gemm_step.op_second, m, n, k,
                         alpha, bx.data, lda, by.data, ldb, beta, c.data, ldc,
                         offa=ox, offb=oy, offc=oc)
            _count_kernel(counters, "gemm")
            continue
        loc = _stride_of(ec, batch.batch_label)
        if batch.extended:
            loy = _stride_of(ey, batch.batch_label) or 0
            kernels.strided_batched_gemm_ex(
                gemm_step.op_first, gemm_step.op_second, m, n, k, alpha,
                bx.data, lda, loa_ex, by.data, ldb, loy, beta,
                c.data, ldc, loc, batch.extent,
                offa=ox, offb=oy, offc=oc, threads=threads)
            _count_kernel(counters, "strided_batched_gemm_ex")
        else:
            lox = _stride_of(ex, batch.batch_label) or 0
            loy = _stride_of(ey, batch.batch_label) or 0
            kernels.strided_batched_gemm(
                gemm_step.op_first, gemm_step.op_second, m, n, k, alpha,
                bx.data, lda, lox, by.data, ldb, loy, beta,
                c.data, ldc, loc, batch.extent,
                offa=ox, offb=oy, offc=oc, threads=threads)
            _count_kernel(counters, "strided_batched_gemm")


def _execute_gemv(plan, a, b, alpha, beta, c, counters):
    eff = plan.eff
    ea, eb, ec = eff["A"], eff["B"], eff["C"]
    step = plan.steps[-1]
    ex = ea if step.matrix == "A" else eb
    ey = eb if step.matrix == "A" else ea
    bx = a if step.matrix == "A" else b
    by = b if step.matrix == "A" else a
    v_label, k_label = step.v_label, step.k_label
    extent = {mo.label: mo.extent for mo in (*ea, *eb, *ec)}

    if step.op is Op.Normal:
        rows, cols = extent[v_label], extent[k_label]
        lda = _stride_of(ex, k_label)
    else:
        rows, cols = extent[k_label], extent[v_label]
        lda = _stride_of(ex, v_label)
    incx = _stride_of(ey, k_label)
    incy = _stride_of(ec, v_label)

    loop_ranges = [range(extent[l]) for l in step.loop_labels]
    for combo in itertools.product(*loop_ranges):
        offs = {"A": 0, "B": 0, "C": 0}
        for label, idx in zip(step.loop_labels, combo):
            for tname, teff in (("A", ea), ("B", eb), ("C", ec)):
                s = _stride_of(teff, label)
                if s is not None:
                    offs[tname] += idx * s
        ox = offs["A"] if step.matrix == "A" else offs["B"]
        oy = offs["B"] if step.matrix == "A" else offs["A"]
        kernels.gemv(step.op, rows, cols, alpha, bx.data, lda,
                     by.data, incx, beta, c.data, incy,
                     offa=ox, offx=oy, offy=offs["C"])
        _count_kernel(counters, "gemv")


def _execute_conventional(plan, a, b, alpha, beta, c, counters):
    info = plan.conventional
    spec = plan.spec

    def note_copy(n_elements):
        if counters is not None:
            counters.transpositions += 1
            counters.bytes_copied += n_elements * 8

    ta = a
    if info.permute_a is not None:
        ta = permute_copy(a, info.permute_a)
        note_copy(ta.layout.size)
    tb = b
    if info.permute_b is not None:
        tb = permute_copy(b, info.permute_b)
        note_copy(tb.layout.size)

    ext = {}
    for labels, layout in ((spec.labels_a, plan.layout_a),
                           (spec.labels_b, plan.layout_b)):
        ext.update(dict(zip(labels, layout.dims)))
    mi = prod(ext[l] for l in info.free_a) if info.free_a else 1
    nj = prod(ext[l] for l in info.free_b) if info.free_b else 1
    kk = prod(ext[l] for l in info.contracted) if info.contracted else 1

    av = ta.to_array().reshape(-1, order="F")
    bv = tb.to_array().reshape(-1, order="F")

    target_c = info.free_a + info.free_b
    if info.c_matches:
        cbuf = c.data
    else:
        tmp = DenseTensor.zeros(Layout.packed(
            [ext[l] for l in target_c] if target_c else [1]))
        if beta != 0.0 or info.policy == "naive":
            perm_in = tuple(spec.labels_c.index(l) for l in target_c)
            tmp_in = permute_copy(c, perm_in)
            note_copy(tmp_in.layout.size)
            tmp = tmp_in
        cbuf = tmp.data

    fam = info.family
    if fam == "GEMM":
        lda = kk if info.op_a is Op.Transpose else mi
        ldb = nj if info.op_b is Op.Transpose else kk
        kernels.gemm(info.op_a, info.op_b, mi, nj, kk, alpha,
                     np.ascontiguousarray(av), lda,
                     np.ascontiguousarray(bv), ldb, beta, cbuf, mi)
        _count_kernel(counters, "gemm")
    elif fam == "GEMV":
        if info.free_a:
            # C_I = alpha * A_(I,K) * b + beta * C_I
            op = Op.Transpose if info.op_a is Op.Transpose else Op.Normal
            if op is Op.Normal:
                kernels.gemv(Op.Normal, mi, kk, alpha, np.ascontiguousarray(av),
                             mi, np.ascontiguousarray(bv), 1, beta, cbuf, 1)
            else:
                kernels.gemv(Op.Transpose, kk, mi, alpha, np.ascontiguousarray(av),
                             kk, np.ascontiguousarray(bv), 1, beta, cbuf, 1)
        else:
            # C_J = alpha * B_(K,J)^T * a + beta * C_J
            op = Op.Normal if info.op_b is Op.Transpose else Op.Transpose
            if op is Op.Transpose:
                kernels.gemv(Op.Transpose, kk, nj, alpha, np.ascontiguousarray(bv),
                             kk, np.ascontiguousarray(av), 1, beta, cbuf, 1)
            else:
                kernels.gemv(Op.Normal, nj, kk, alpha, np.ascontiguousarray(bv),
                             nj, np.ascontiguousarray(av), 1, beta, cbuf, 1)
        _count_kernel(counters, "gemv")
    elif fam == "GER":
        if beta == 0.0:
            cbuf[:mi * nj] = 0.0
        elif beta != 1.0:
            cbuf[:mi * nj] *= beta
        kernels.ger(mi, nj, alpha, np.ascontiguousarray(av), 1,
                    np.ascontiguousarray(bv), 1, cbuf, mi)
        _count_kernel(counters, "ger")
    else:  # DOT
        prev = cbuf[0] if beta != 0.0 else 0.0
        cbuf[0] = alpha * kernels.dot(kk, np.ascontiguousarray(av), 1,
                                      np.ascontiguousarray(bv), 1) + beta * prev
        _count_kernel(counters, "dot")

    if not info.c_matches:
        from . import layout as _layout
        perm_out = tuple(target_c.index(l) for l in spec.labels_c)
        shaped = cbuf[:prod(ext[l] for l in target_c)].reshape(
            [ext[l] for l in target_c], order="F")
        out = np.transpose(shaped, axes=perm_out)
        c.writable_view()[...] = out
        _layout._record_transposition()
        _layout._record_allocation()
        note_copy(out.size)


# ---------------------------------------------------------------------------
# rendering


def _render_tensor(name, eff, batch_label=None, loop_labels=()):
    parts = []
    for mode in eff:
        body = mode.label if len(mode.label) == 1 else f"({mode.label})"
        if mode.label == batch_label:
            body = f"[{mode.label}]" if len(mode.label) == 1 else f"[({mode.label})]"
        parts.append(body)
    return f"{name}[{''.join(parts)}]"


def render_plan(plan: EvaluationPlan) -> str:
    """Paper-style notation, one step per line."""
    lines = []
    if plan.strategy == "conventional":
        info = plan.conventional
        for step in plan.steps:
            if isinstance(step, PermuteStep):
                lines.append(f"permute {step.tensor}: modes {step.perm}")
        ops = {"A": "^T" if info.op_a is Op.Transpose else "",
               "B": "^T" if info.op_b is Op.Transpose else ""}
        ci = "".join(f"({''.join(g)})" if len(g) > 1 else g[0]
                     for g in [info.free_a, info.free_b] if g)
        lines.append(f"C[{ci or '.'}] = A[{'(' + ''.join(info.free_a) + ')' if len(info.free_a) > 1 else ''.join(info.free_a)}"
                     f"{'(' + ''.join(info.contracted) + ')' if len(info.contracted) > 1 else ''.join(info.contracted)}]{ops['A']}"
                     f" * B[{'(' + ''.join(info.contracted) + ')' if len(info.contracted) > 1 else ''.join(info.contracted)}"
                     f"{'(' + ''.join(info.free_b) + ')' if len(info.free_b) > 1 else ''.join(info.free_b)}]{ops['B']}"
                     f"   # {info.family}")
        return "\n".join(lines)

    eff = plan.eff
    last = plan.steps[-1] if plan.steps else None
    if isinstance(last, GemvBatchStep):
        for lab in last.loop_labels:
            lines.append(f"for {lab}:")
        mat = _render_tensor(last.matrix, eff[last.matrix])
        other = "B" if last.matrix == "A" else "A"
        op = "^T" if last.op is Op.Transpose else ""
        lines.append(f"gemv {last.v_label}: C[{last.v_label}] = "
                     f"{mat}{op} * {other}[{last.k_label}]")
        return "\n".join(lines)

    batch_label = None
    gemm_step = last
    if isinstance(last, BatchedStep):
        batch_label = last.batch_label
        gemm_step = last.gemm
    loop_labels = tuple(s.label for s in plan.steps if isinstance(s, LoopStep))
    indent = ""
    for step in plan.steps:
        if isinstance(step, LoopStep):
            lines.append(f"{indent}for {step.label} in [0,{step.extent}):")
            indent += "  "
    first, second = gemm_step.first, "B" if gemm_step.first == "A" else "A"
    opf = "^T" if gemm_step.op_first is Op.Transpose else ""
    ops = "^T" if gemm_step.op_second is Op.Transpose else ""
    if gemm_step.op_first is Op.ExtendedTranspose:
        opf = "^T"
    lhs = _render_tensor("C", eff["C"], batch_label)
    rhs1 = _render_tensor(first, eff[first], batch_label)
    rhs2 = _render_tensor(second, eff[second], batch_label)
    lines.append(f"{indent}{lhs} = {rhs1}{opf} {rhs2}{ops}")
    return "\n".join(lines)


def resolved_kernel_args(plan: EvaluationPlan, alpha=1.0, beta=0.0) -> KernelArgs | None:
    """KernelArgs for the plan's (batched) GEMM step, strides resolved."""
    last = plan.steps[-1] if plan.steps else None
    batch = None
    if isinstance(last, BatchedStep):
        batch = last
        last = last.gemm
    if not isinstance(last, GemmStep):
        return None
    eff = plan.eff
    ea, eb, ec = eff["A"], eff["B"], eff["C"]
    ex, ey = (ea, eb) if last.first == "A" else (eb, ea)
    extent = {mo.label: mo.extent for mo in (*ea, *eb, *ec)}
    m = extent[last.m_label] if last.m_label else 1
    n = extent[last.n_label] if last.n_label else 1
    k = extent[last.k_label]
    if last.op_first is Op.Normal:
        lda = _stride_of(ex, last.k_label)
    elif last.op_first is Op.Transpose:
        lda = _stride_of(ex, last.m_label)
    else:
        rest = [mo for mo in ex if mo.label in (last.m_label, last.k_label)]
        lda = rest[0].stride
    if last.op_second is Op.Normal:
        ldb = _stride_of(ey, last.n_label) if last.n_label else k
    else:
        ldb = _stride_of(ey, last.k_label)
    ldc = (_stride_of(ec, last.n_label) if last.n_label else max(m, 1)) or max(m, 1)
    loa = lob = loc = 0
    batch_count = 0
    if batch is not None:
        batch_count = batch.extent
        loc = _stride_of(ec, batch.batch_label)
        if batch.extended:
            rest = [mo for mo in ex if mo.label in (last.m_label, last.k_label)]
            loa = rest[1].stride
            lob = _stride_of(ey, batch.batch_label) or 0
        else:
            loa = _stride_of(ex, batch.batch_label) or 0
            lob = _stride_of(ey, batch.batch_label) or 0
    if last.first == "B":
        # A/B slots follow operand role order (first operand in the A slot).
        pass
    return KernelArgs(opa=last.op_first, opb=last.op_second, m=m, n=n, k=k,
                      alpha=alpha, beta=beta, lda=lda or max(m, 1), loa=loa,
                      ldb=ldb or k, lob=lob, ldc=ldc, loc=loc,
                      batch_count=batch_count)

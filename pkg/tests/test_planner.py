import numpy as np
import pytest

from conftest import clone, make_operands, max_rel_err
from sbtensor import layout as L
from sbtensor.layout import DenseTensor, Layout
from sbtensor.notation import ContractionSpec, parse_contraction
from sbtensor.planner import (BatchedStep, GemmStep, PermuteStep, PlanError,
                              UnsupportedContractionError, enumerate_cases,
                              execute_plan, find_case, plan_batched_gemv,
                              plan_conventional, plan_single_mode,
                              render_plan, resolved_kernel_args)
from sbtensor.reference import contract_naive

EXPECTED_EXCEPTIONAL = {"3.4", "3.6", "4.4", "4.6", "5.4", "5.6", "6.4", "6.6"}
EXPECTED_SINGLE = {"1.1", "1.5", "2.1", "2.5", "5.1", "5.5", "6.1", "6.5"}


def test_enumerate_2_3_partition():
    cases = enumerate_cases(2, 3)
    assert len(cases) == 36
    by = {}
    for c in cases:
        by.setdefault(c.classification, set()).add(c.case_id)
    assert by["single-gemm"] == EXPECTED_SINGLE
    assert by["exceptional"] == EXPECTED_EXCEPTIONAL
    assert len(by["strided-batched"]) == 20


def test_case_ids_unique():
    cases = enumerate_cases(2, 3)
    assert len({c.case_id for c in cases}) == 36


def test_case_1_1_flattens_to_single_gemm():
    spec = parse_contraction("C[mnp] = A[mk] * B[knp]")
    ext = dict(m=4, n=5, p=6, k=3)
    la = Layout.packed([ext[l] for l in spec.labels_a])
    lb = Layout.packed([ext[l] for l in spec.labels_b])
    lc = Layout.packed([ext[l] for l in spec.labels_c])
    plan = plan_single_mode(spec, la, lb, lc)
    assert plan.strategy == "flattened-gemm"
    ka = resolved_kernel_args(plan)
    assert (ka.m, ka.n, ka.k) == (4, 30, 3)
    assert "C[m(np)] = A[mk] B[k(np)]" in render_plan(plan)


def test_flattening_blocked_by_stride_gap():
    spec = parse_contraction("C[mnp] = A[mk] * B[knp]")
    ext = dict(m=4, n=5, p=6, k=3)
    la = Layout.packed([ext[l] for l in spec.labels_a])
    # pad B's p-mode stride so (np) cannot merge in B
    lb = Layout((3, 5, 6), (1, 3, 16))
    lc = Layout.packed([ext[l] for l in spec.labels_c])
    plan = plan_single_mode(spec, la, lb, lc)
    assert plan.strategy == "strided-batched"


def test_extent_one_modes_are_squeezed():
    spec = parse_contraction("C[mnp] = A[mk] * B[knp]")
    la = Layout.packed([4, 3])
    lb = Layout.packed([3, 1, 6])     # n == 1
    lc = Layout.packed([4, 1, 6])
    plan = plan_single_mode(spec, la, lb, lc)
    labels = {m.label for m in plan.eff["C"]}
    assert "n" not in labels


def test_rejects_multi_mode_contraction():
    spec = ContractionSpec(("m", "k", "l"), ("k", "l", "n"), ("m", "n"))
    with pytest.raises(UnsupportedContractionError):
        plan_single_mode(spec, Layout.packed([2, 3, 4]),
                         Layout.packed([3, 4, 5]), Layout.packed([2, 5]))


def test_rejects_extent_mismatch():
    spec = parse_contraction("C[mn] = A[mk] * B[kn]")
    with pytest.raises(PlanError):
        plan_single_mode(spec, Layout.packed([4, 3]), Layout.packed([2, 5]),
                         Layout.packed([4, 5]))


def test_exceptional_cases_use_extended_kernel(rng):
    for cid in sorted(EXPECTED_EXCEPTIONAL):
        case = find_case(2, 3, cid)
        spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
        ext = dict(m=4, n=5, p=6, k=3)
        a, b, c = make_operands(spec, ext, rng)
        plan = plan_single_mode(spec, a.layout, b.layout, c.layout)
        assert plan.strategy == "extended-batched", cid
        step = plan.steps[-1]
        assert isinstance(step, BatchedStep) and step.extended
        cref = clone(c)
        execute_plan(plan, a, b, 1.0, 0.0, c)
        contract_naive(spec, a, b, 1.0, 0.0, cref)
        assert max_rel_err(c, cref) < 1e-12, cid


def test_nested_batching_batches_larger_mode(rng):
    spec = ContractionSpec(tuple("mkp"), tuple("nkq"), tuple("mnpq"))
    for p, q in ((4, 7), (7, 4)):
        ext = dict(m=5, n=6, k=3, p=p, q=q)
        a, b, c = make_operands(spec, ext, rng)
        plan = plan_single_mode(spec, a.layout, b.layout, c.layout)
        assert plan.strategy == "nested-batched"
        step = plan.steps[-1]
        assert isinstance(step, BatchedStep)
        assert step.batch_label == ("p" if p > q else "q")
        assert step.extent == max(p, q)
        cref = clone(c)
        execute_plan(plan, a, b, 1.0, 0.0, c)
        contract_naive(spec, a, b, 1.0, 0.0, cref)
        assert max_rel_err(c, cref) < 1e-12


def test_scalar_output_dot(rng):
    spec = ContractionSpec(("k",), ("k",), ())
    la = lb = Layout.packed([7])
    lc = Layout.packed([1])
    a, b, c = make_operands(spec, dict(k=7), rng)
    plan = plan_single_mode(spec, la, lb, lc)
    execute_plan(plan, a, b, 2.0, 0.0, c)
    assert c.data[0] == pytest.approx(2.0 * float(a.data @ b.data), abs=1e-13)


def test_execute_rejects_aliased_output(rng):
    spec = parse_contraction("C[mn] = A[mk] * B[kn]")
    a, b, c = make_operands(spec, dict(m=3, n=3, k=3), rng)
    plan = plan_single_mode(spec, a.layout, b.layout, c.layout)
    bad = DenseTensor(layout=c.layout, data=a.data)
    with pytest.raises(PlanError):
        execute_plan(plan, a, b, 1.0, 0.0, bad)


def test_execute_rejects_layout_drift(rng):
    spec = parse_contraction("C[mn] = A[mk] * B[kn]")
    a, b, c = make_operands(spec, dict(m=3, n=4, k=2), rng)
    plan = plan_single_mode(spec, a.layout, b.layout, c.layout)
    other = DenseTensor.zeros(Layout.packed([4, 3]))
    with pytest.raises(PlanError):
        execute_plan(plan, a, b, 1.0, 0.0, other)


def test_planned_execution_never_copies(rng):
    cases = enumerate_cases(2, 3)
    ext = dict(m=4, n=5, p=6, k=3)
    for case in cases:
        spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
        a, b, c = make_operands(spec, ext, rng)
        plan = plan_single_mode(spec, a.layout, b.layout, c.layout)
        t0, a0 = L.transposition_count(), L.allocation_count()
        execute_plan(plan, a, b, 1.0, 0.0, c)
        assert L.transposition_count() == t0, case.case_id
        assert L.allocation_count() == a0, case.case_id


def test_conventional_case_2_4_naive_four_permutes():
    case = find_case(2, 3, "2.4")
    spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
    ext = dict(m=4, n=5, p=6, k=3)
    la = Layout.packed([ext[l] for l in spec.labels_a])
    lb = Layout.packed([ext[l] for l in spec.labels_b])
    lc = Layout.packed([ext[l] for l in spec.labels_c])
    plan = plan_conventional(spec, la, lb, lc, policy="naive")
    assert sum(1 for s in plan.steps if isinstance(s, PermuteStep)) == 4
    opt = plan_conventional(spec, la, lb, lc, policy="opt")
    n_opt = sum(1 for s in opt.steps if isinstance(s, PermuteStep))
    assert n_opt < 4


def test_conventional_rejects_unknown_policy():
    spec = parse_contraction("C[mn] = A[mk] * B[kn]")
    lay = Layout.packed([2, 2])
    with pytest.raises(PlanError):
        plan_conventional(spec, lay, lay, lay, policy="fast")


def test_batched_gemv_matches_oracle_on_exceptional(rng):
    for cid in sorted(EXPECTED_EXCEPTIONAL):
        case = find_case(2, 3, cid)
        spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
        ext = dict(m=4, n=5, p=6, k=3)
        a, b, c = make_operands(spec, ext, rng)
        plan = plan_batched_gemv(spec, a.layout, b.layout, c.layout)
        assert plan.strategy == "batched-gemv"
        cref = clone(c)
        execute_plan(plan, a, b, 1.5, 0.0, c)
        contract_naive(spec, a, b, 1.5, 0.0, cref)
        assert max_rel_err(c, cref) < 1e-12, cid


def test_render_plan_mentions_batched_mode(rng):
    case = find_case(2, 3, "1.3")
    spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
    ext = dict(m=4, n=5, p=6, k=3)
    la = Layout.packed([ext[l] for l in spec.labels_a])
    lb = Layout.packed([ext[l] for l in spec.labels_b])
    lc = Layout.packed([ext[l] for l in spec.labels_c])
    plan = plan_single_mode(spec, la, lb, lc)
    text = render_plan(plan)
    assert "[" in text and "]" in text


def test_resolved_kernel_args_strides_are_buffer_valid(rng):
    # every planned stride must address inside the operand buffers
    ext = dict(m=4, n=5, p=6, k=3)
    for case in enumerate_cases(2, 3):
        spec = ContractionSpec(case.labels_a, case.labels_b, case.labels_c)
        la = Layout.packed([ext[l] for l in spec.labels_a])
        lb = Layout.packed([ext[l] for l in spec.labels_b])
        lc = Layout.packed([ext[l] for l in spec.labels_c])
        plan = plan_single_mode(spec, la, lb, lc)
        ka = resolved_kernel_args(plan)
        assert ka is not None
        assert ka.m >= 1 and ka.n >= 1 and ka.k >= 1
        assert ka.lda >= 1 and ka.ldb >= 1 and ka.ldc >= 1

"""Reference evaluators: naive nested loops and the permute-then-GEMM path.

contract_naive is the correctness oracle — plain Python loops, no planning,
accumulation over contracted indices in ascending order.  contract_conventional
runs the matricized plan and reports how many explicit transpositions and
bytes of copy traffic it needed.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from .layout import DenseTensor, linear_offset
from .notation import ContractionSpec, classify_indices
from .planner import execute_plan, plan_conventional


@dataclass
class EvalCounters:
    transpositions: int = 0
    bytes_copied: int = 0
    kernel_calls: dict = field(default_factory=dict)
    elapsed: float = 0.0


def contract_naive(spec: ContractionSpec, a: DenseTensor, b: DenseTensor,
                   alpha: float, beta: float, c: DenseTensor) -> None:
    """Evaluate the contraction with nested loops, mutating C in place."""
    cls = classify_indices(spec)
    ext = {}
    for labels, t in ((spec.labels_a, a), (spec.labels_b, b),
                      (spec.labels_c, c)):
        for lab, d in zip(labels, t.layout.dims):
            if ext.setdefault(lab, d) != d:
                raise ValueError(f"extent mismatch for label {lab!r}")
    free = spec.labels_c
    kls = cls.contracted
    scalar_out = not free
    for out_idx in itertools.product(*(range(ext[l]) for l in free)):
        env = dict(zip(free, out_idx))
        acc = 0.0
        for k_idx in itertools.product(*(range(ext[l]) for l in kls)):
            env.update(zip(kls, k_idx))
            oa = linear_offset(a.layout, tuple(env[l] for l in spec.labels_a))
            ob = linear_offset(b.layout, tuple(env[l] for l in spec.labels_b))
            acc += a.data[oa] * b.data[ob]
        oc = 0 if scalar_out else linear_offset(
            c.layout, tuple(env[l] for l in free))
        prev = c.data[oc] if beta != 0.0 else 0.0
        c.data[oc] = alpha * acc + beta * prev


def contract_conventional(spec: ContractionSpec, a: DenseTensor, b: DenseTensor,
                          alpha: float, beta: float, c: DenseTensor,
                          policy: str = "opt") -> EvalCounters:
    """Matricized evaluation; returns copy/transposition counters."""
    plan = plan_conventional(spec, a.layout, b.layout, c.layout, policy=policy)
    counters = EvalCounters()
    t0 = time.perf_counter()
    execute_plan(plan, a, b, alpha, beta, c, counters=counters)
    counters.elapsed = time.perf_counter() - t0
    return counters

"""Dense single-mode tensor contractions without copies or transpositions.

Contractions are planned onto flattened GEMM, strided-batched GEMM, or an
extended-operation batched kernel, chosen from the operand layouts alone;
the operands are never permuted.  A conventional permute-then-GEMM
evaluator and a naive loop oracle are included for comparison, plus a
Tucker/HOOI decomposition built on the planner and a benchmarking CLI.
"""
from .backend import active_backend
from .kernels import (KernelArgs, Op, blocked_gemm, blocked_gemm_tile_search,
                      dot, gemm, gemv, ger, strided_batched_gemm,
                      strided_batched_gemm_ex)
from .layout import (DenseTensor, IllegalFlattenError, Layout, can_flatten,
                     flatten, linear_offset, permute_copy, unfold)
from .notation import (ContractionError, ContractionSpec, classify_indices,
                       kernel_family, parse_contraction)
from .planner import (EvaluationPlan, PlanError, UnsupportedContractionError,
                      enumerate_cases, execute_plan, find_case,
                      plan_batched_gemv, plan_conventional, plan_single_mode,
                      render_plan, resolved_kernel_args)
from .reference import EvalCounters, contract_conventional, contract_naive
from .tucker import TuckerModel, hooi, tucker_core, tucker_reconstruct

__version__ = "0.1.0"

__all__ = [
    "active_backend", "KernelArgs", "Op", "blocked_gemm",
    "blocked_gemm_tile_search", "dot", "gemm", "gemv", "ger",
    "strided_batched_gemm", "strided_batched_gemm_ex", "DenseTensor",
    "IllegalFlattenError", "Layout", "can_flatten", "flatten",
    "linear_offset", "permute_copy", "unfold", "ContractionError",
    "ContractionSpec", "classify_indices", "kernel_family",
    "parse_contraction", "EvaluationPlan", "PlanError",
    "UnsupportedContractionError", "enumerate_cases", "execute_plan",
    "find_case", "plan_batched_gemv", "plan_conventional",
    "plan_single_mode", "render_plan", "resolved_kernel_args",
    "EvalCounters", "contract_conventional", "contract_naive",
    "TuckerModel", "hooi", "tucker_core", "tucker_reconstruct",
    "__version__",
]

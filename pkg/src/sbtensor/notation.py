"""Parsing and classification of single-mode contraction expressions.

Grammar (also shown in the CLI help):

    C[<labels>] = <alpha>? A[<labels>] * B[<labels>] (+ <beta> C[<labels>])?

Labels are single lowercase letters; omitted alpha defaults to 1, an omitted
beta term to beta = 0.  The beta term must repeat C's labels verbatim.
"""
from __future__ import annotations

import re
from dataclasses import dataclass


class ContractionError(ValueError):
    """Base class for expression errors."""


class MalformedExpressionError(ContractionError):
    pass


class DuplicateIndexError(ContractionError):
    pass


class OutputIndexError(ContractionError):
    """C's labels are inconsistent with the free-index rule."""


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_EXPR_RE = re.compile(
    rf"""^\s*C\[(?P<c>[a-z]*)\]\s*=\s*
         (?:(?P<alpha>{_NUM})\s*\*?\s*)?
         A\[(?P<a>[a-z]*)\]\s*\*\s*B\[(?P<b>[a-z]*)\]
         (?:\s*\+\s*(?P<beta>{_NUM})\s*\*?\s*C\[(?P<c2>[a-z]*)\])?
         \s*$""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class ContractionSpec:
    labels_a: tuple[str, ...]
    labels_b: tuple[str, ...]
    labels_c: tuple[str, ...]
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "labels_a", tuple(self.labels_a))
        object.__setattr__(self, "labels_b", tuple(self.labels_b))
        object.__setattr__(self, "labels_c", tuple(self.labels_c))
        for name, labels in (("A", self.labels_a), ("B", self.labels_b),
                             ("C", self.labels_c)):
            for lab in labels:
                if not (len(lab) == 1 and lab.islower() and lab.isalpha()):
                    raise MalformedExpressionError(
                        f"label {lab!r} in {name}: labels are single lowercase letters")
            if len(set(labels)) != len(labels):
                raise DuplicateIndexError(f"duplicate label within {name}: {labels}")
        free = (set(self.labels_a) | set(self.labels_b)) - (
            set(self.labels_a) & set(self.labels_b))
        if set(self.labels_c) != free:
            raise OutputIndexError(
                f"C labels {self.labels_c} must be exactly the free indices "
                f"{tuple(sorted(free))}")

    @property
    def contracted(self) -> tuple[str, ...]:
        return tuple(l for l in self.labels_a if l in set(self.labels_b))


@dataclass(frozen=True)
class IndexClassification:
    contracted: tuple[str, ...]  # K, in A order
    free_a: tuple[str, ...]      # I, in A order
    free_b: tuple[str, ...]      # J, in B order


def parse_contraction(text: str) -> ContractionSpec:
    match = _EXPR_RE.match(text)
    if match is None:
        raise MalformedExpressionError(f"cannot parse contraction expression: {text!r}")
    alpha = float(match["alpha"]) if match["alpha"] is not None else 1.0
    beta = float(match["beta"]) if match["beta"] is not None else 0.0
    if match["c2"] is not None and match["c2"] != match["c"]:
        raise OutputIndexError(
            f"beta term C[{match['c2']}] must repeat the output labels C[{match['c']}]")
    return ContractionSpec(tuple(match["a"]), tuple(match["b"]), tuple(match["c"]),
                           alpha=alpha, beta=beta)


def format_contraction(spec: ContractionSpec) -> str:
    a = "".join(spec.labels_a)
    b = "".join(spec.labels_b)
    c = "".join(spec.labels_c)
    alpha = "" if spec.alpha == 1.0 else f"{spec.alpha!r} "
    out = f"C[{c}] = {alpha}A[{a}] * B[{b}]"
    if spec.beta != 0.0:
        out += f" + {spec.beta!r} C[{c}]"
    return out


def classify_indices(spec: ContractionSpec) -> IndexClassification:
    in_b = set(spec.labels_b)
    contracted = tuple(l for l in spec.labels_a if l in in_b)
    kset = set(contracted)
    return IndexClassification(
        contracted=contracted,
        free_a=tuple(l for l in spec.labels_a if l not in kset),
        free_b=tuple(l for l in spec.labels_b if l not in kset),
    )


def kernel_family(cls: IndexClassification) -> str:
    """Which of the four classic kernels evaluates the matricized form."""
    if not cls.free_a and not cls.free_b:
        return "DOT"
    if not cls.contracted:
        return "GER"
    if bool(cls.free_a) != bool(cls.free_b):
        return "GEMV"
    return "GEMM"

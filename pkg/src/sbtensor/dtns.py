"""DTNS1 dense-tensor text format.

Line 1: the literal tag DTNS1.  Line 2: the order.  Line 3: the extents.
Then size-many values in column-major order, separated by any whitespace.
Values are written with 17 significant digits so doubles round-trip.
"""
from __future__ import annotations

from math import prod

from .layout import DenseTensor, Layout

TAG = "DTNS1"


class FormatError(ValueError):
    pass


def loads(text: str) -> DenseTensor:
    tokens = text.split()
    if not tokens or tokens[0] != TAG:
        raise FormatError(f"missing {TAG} tag")
    try:
        order = int(tokens[1])
    except (IndexError, ValueError):
        raise FormatError("missing or invalid order") from None
    if order < 1:
        raise FormatError(f"order must be >= 1, got {order}")
    dims = tokens[2:2 + order]
    if len(dims) != order:
        raise FormatError(f"expected {order} extents")
    try:
        dims = [int(d) for d in dims]
    except ValueError:
        raise FormatError("extents must be integers") from None
    if any(d < 1 for d in dims):
        raise FormatError(f"extents must be positive: {dims}")
    size = prod(dims)
    values = tokens[2 + order:]
    if len(values) != size:
        raise FormatError(f"expected {size} values, found {len(values)}")
    t = DenseTensor.zeros(Layout.packed(dims))
    try:
        for i, v in enumerate(values):
            t.data[i] = float(v)
    except ValueError:
        raise FormatError(f"invalid value token {v!r}") from None
    return t


def dumps(t: DenseTensor) -> str:
    if not t.layout.is_packed():
        raise FormatError("only packed tensors can be serialized")
    lines = [TAG, str(t.layout.order), " ".join(map(str, t.layout.dims))]
    lines.extend(f"{v:.17g}" for v in t.data)
    return "\n".join(lines) + "\n"


def load(path) -> DenseTensor:
    with open(path, "r", encoding="ascii") as f:
        return loads(f.read())


def dump(t: DenseTensor, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(dumps(t))

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbtensor.notation import (ContractionSpec, DuplicateIndexError,
                               MalformedExpressionError, OutputIndexError,
                               classify_indices, format_contraction,
                               kernel_family, parse_contraction)


def test_parse_basic():
    spec = parse_contraction("C[mnp] = A[mk] * B[knp]")
    assert spec.labels_a == ("m", "k")
    assert spec.labels_b == ("k", "n", "p")
    assert spec.labels_c == ("m", "n", "p")
    assert spec.alpha == 1.0 and spec.beta == 0.0
    assert spec.contracted == ("k",)


def test_parse_alpha_beta():
    spec = parse_contraction("C[mn] = 2.5 A[mk] * B[kn] + -0.5 C[mn]")
    assert spec.alpha == 2.5 and spec.beta == -0.5
    spec = parse_contraction("C[mn] = 1e-3 * A[mk] * B[kn]")
    assert spec.alpha == 1e-3


def test_parse_whitespace_insensitive():
    spec = parse_contraction("C[mnp]=A[mk]*B[knp]")
    assert spec.labels_c == ("m", "n", "p")


def test_parse_errors():
    with pytest.raises(MalformedExpressionError):
        parse_contraction("C[mnp] = A[mk] + B[knp]")
    with pytest.raises(DuplicateIndexError):
        parse_contraction("C[mn] = A[mkk] * B[kn]")
    with pytest.raises(OutputIndexError):
        parse_contraction("C[mq] = A[mk] * B[kn]")
    with pytest.raises(OutputIndexError):
        parse_contraction("C[mn] = A[mk] * B[kn] + 0.5 C[nm]")


def test_output_must_be_symmetric_difference():
    with pytest.raises(OutputIndexError):
        ContractionSpec(("m", "k"), ("k", "n"), ("m", "n", "k"))
    # any order of the free indices is legal
    ContractionSpec(("m", "k"), ("k", "n"), ("n", "m"))


def test_classify_orders():
    spec = parse_contraction("C[mnp] = A[km] * B[pkn]")
    cls = classify_indices(spec)
    assert cls.contracted == ("k",)
    assert cls.free_a == ("m",)
    assert cls.free_b == ("p", "n")   # B storage order


def test_multi_mode_contraction_classifies():
    spec = ContractionSpec(("m", "k", "l"), ("k", "l", "n"), ("m", "n"))
    cls = classify_indices(spec)
    assert cls.contracted == ("k", "l")
    assert kernel_family(cls) == "GEMM"


def test_kernel_families():
    assert kernel_family(classify_indices(
        ContractionSpec(("k",), ("k",), ()))) == "DOT"
    assert kernel_family(classify_indices(
        ContractionSpec(("m",), ("n",), ("m", "n")))) == "GER"
    assert kernel_family(classify_indices(
        ContractionSpec(("m", "k"), ("k",), ("m",)))) == "GEMV"
    assert kernel_family(classify_indices(
        ContractionSpec(("m", "k"), ("k", "n"), ("m", "n")))) == "GEMM"


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_round_trip_random_specs(data):
    letters = list("mnpqk")
    na = data.draw(st.integers(1, 3))
    nb = data.draw(st.integers(1, 3))
    nk = data.draw(st.integers(0, min(na, nb)))
    pool = data.draw(st.permutations(letters))
    shared = pool[:nk]
    fa = pool[nk:nk + na - nk]
    fb = pool[nk + na - nk:nk + na - nk + nb - nk]
    la = data.draw(st.permutations(shared + fa))
    lb = data.draw(st.permutations(shared + fb))
    lc = data.draw(st.permutations(fa + fb))
    if not la or not lb:
        return
    spec = ContractionSpec(tuple(la), tuple(lb), tuple(lc))
    again = parse_contraction(format_contraction(spec))
    assert again == spec

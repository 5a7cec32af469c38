import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbpnet.errors import DegenerateNormalizer, DimMismatch, UnknownLabel, ZeroToNegativePower
from gbpnet.tensor import (
    LabeledTensor,
    allclose,
    contract,
    elem_pow,
    hadamard,
    normalize,
    ones,
    sum_over,
    to_dense,
    to_sparse,
)


def vec(label, values, **kw):
    return LabeledTensor([label], np.asarray(values, dtype=complex), **kw)


def test_hadamard_examples():
    assert allclose(hadamard(vec("x", [1, 2]), vec("x", [3, 4])), vec("x", [3, 8]))
    assert allclose(hadamard(vec("x", [1, 2]), ones(["x"], [2])), vec("x", [1, 2]))
    outer = hadamard(vec("x", [1, 2]), vec("y", [1, 10]))
    assert outer.labels == ("x", "y")
    np.testing.assert_allclose(outer.dense_array(), [[1, 10], [2, 20]])


def test_hadamard_log_scales_add_and_dims_checked():
    out = hadamard(vec("x", [1, 2], log_scale=0.5), vec("x", [1, 1], log_scale=0.25))
    assert out.log_scale == pytest.approx(0.75)
    with pytest.raises(DimMismatch):
        hadamard(vec("x", [1, 2]), vec("x", [1, 2, 3]))


def test_sum_over_examples():
    m = LabeledTensor(["x", "y"], [[1, 2], [3, 4]])
    assert allclose(sum_over(m, {"y"}), vec("x", [3, 7]))
    assert sum_over(m, set()) is m
    total = sum_over(m, {"x", "y"})
    assert total.labels == () and complex(total.data) == 10
    with pytest.raises(UnknownLabel):
        sum_over(m, {"z"})


def test_elem_pow_examples():
    assert allclose(elem_pow(vec("x", [4, 9]), 0.5), vec("x", [2, 3]))
    t = LabeledTensor(["a", "b"], np.arange(1, 7).reshape(2, 3) - 2.5)
    assert allclose(elem_pow(t, 1), t)
    np.testing.assert_allclose(elem_pow(vec("x", [-1]), 0.5).dense_array(), [1j], atol=1e-15)


def test_elem_pow_zero_handling():
    t = vec("x", [0, 4])
    np.testing.assert_allclose(elem_pow(t, 0.5).dense_array(), [0, 2])
    with pytest.raises(ZeroToNegativePower):
        elem_pow(t, -1)
    np.testing.assert_allclose(elem_pow(t, -1, zero_convention=True).dense_array(), [0, 0.25])
    assert elem_pow(vec("x", [1, 2], log_scale=2.0), 3).log_scale == pytest.approx(6.0)


def test_normalize_examples():
    t, log_z = normalize(vec("x", [1, 3]))
    np.testing.assert_allclose(t.dense_array(), [0.25, 0.75])
    assert log_z == pytest.approx(math.log(4))
    t2, log_z2 = normalize(t)
    assert allclose(t2, t) and abs(log_z2) < 1e-15
    t3, log_z3 = normalize(vec("x", [2, 2], log_scale=math.log(3)))
    np.testing.assert_allclose(t3.dense_array(), [0.5, 0.5])
    assert log_z3 == pytest.approx(math.log(12))
    assert t3.log_scale == 0.0


def test_normalize_degenerate():
    with pytest.raises(DegenerateNormalizer):
        normalize(vec("x", [1, -1]))


def test_normalize_negative_total_gives_complex_log():
    _, log_z = normalize(vec("x", [-1, -3]))
    assert log_z == pytest.approx(cmath.log(-4))


def test_contract_examples():
    eye = LabeledTensor(["x", "y"], np.eye(2))
    assert allclose(contract(eye, vec("y", [5, 7])), vec("x", [5, 7]))
    dot = contract(vec("x", [1, 2]), vec("x", [3, 4]))
    assert dot.labels == () and complex(dot.data) == 11


def test_to_sparse_examples():
    ice = np.zeros((2,) * 4)
    for idx in np.ndindex(*ice.shape):
        ice[idx] = 1.0 if sum(idx) == 2 else 0.0
    sp = to_sparse(LabeledTensor(list("abcd"), ice))
    assert sp.is_sparse and sp.nnz == 6
    assert to_sparse(LabeledTensor(["x", "y"], np.zeros((3, 2)))).nnz == 0
    rng = np.random.default_rng(1)
    t = LabeledTensor(["p", "q", "r"], rng.normal(size=(2, 3, 4)))
    back = to_dense(to_sparse(t))
    assert np.array_equal(back.data, t.data)


def test_entry_addressing_is_by_label():
    t = LabeledTensor(["x", "y"], [[1, 2], [3, 4]])
    tt = t.transpose(["y", "x"])
    for x in range(2):
        for y in range(2):
            assert t.entry({"x": x, "y": y}) == tt.entry({"y": y, "x": x})
    assert to_sparse(t).entry({"x": 1, "y": 0}) == 3


# -- properties -------------------------------------------------------------

LABELS = ["a", "b", "c", "d"]


@st.composite
def tensor_pairs(draw):
    dims = {l: draw(st.integers(1, 3)) for l in LABELS}
    la = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=3, unique=True))
    lb = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=3, unique=True))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)

    def make(ls):
        shape = [dims[l] for l in ls]
        data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        data[rng.random(size=shape) < 0.5] = 0.0
        return LabeledTensor(ls, data)

    return make(la), make(lb), rng


@settings(max_examples=60, deadline=None)
@given(tensor_pairs())
def test_hadamard_commutes_and_is_permutation_invariant(pair):
    a, b, rng = pair
    ab, ba = hadamard(a, b), hadamard(b, a)
    assert allclose(ab, ba, rtol=0, atol=1e-14)
    perm = list(a.labels)
    rng.shuffle(perm)
    assert allclose(hadamard(a.transpose(perm), b), ab, rtol=0, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(tensor_pairs())
def test_contract_matches_hadamard_then_sum(pair):
    a, b, _ = pair
    shared = set(a.labels) & set(b.labels)
    ref = sum_over(hadamard(a, b), shared)
    assert allclose(contract(a, b), ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(tensor_pairs())
def test_sparse_and_dense_paths_agree(pair):
    a, b, _ = pair
    sa, sb = to_sparse(a), to_sparse(b)
    ref = hadamard(a, b)
    for x, y in [(sa, b), (a, sb), (sa, sb)]:
        assert allclose(to_dense(hadamard(x, y)), ref, rtol=0, atol=1e-13)
    shared = set(a.labels) & set(b.labels)
    assert allclose(to_dense(contract(sa, sb)), contract(a, b), rtol=0, atol=1e-13)
    drop = set(a.labels[:1])
    assert allclose(to_dense(sum_over(sa, drop)), sum_over(a, drop), rtol=0, atol=1e-13)
    assert allclose(to_dense(elem_pow(sa, 2)), elem_pow(a, 2), rtol=0, atol=1e-13)
    if shared:
        assert allclose(to_dense(sum_over(hadamard(sa, sb), shared)), contract(a, b),
                        rtol=0, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0))
def test_pow_roundtrip_positive(seed, p):
    rng = np.random.default_rng(seed)
    t = LabeledTensor(["x", "y"], rng.uniform(0.1, 3.0, size=(3, 2)))
    back = elem_pow(elem_pow(t, p), 1.0 / p)
    assert allclose(back, t, rtol=0, atol=1e-12)

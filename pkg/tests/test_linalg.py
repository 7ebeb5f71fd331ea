import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from sympy import GF
from sympy.polys.matrices import DomainMatrix
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from coarsehom.linalg import (QQ, ZZ, Ring, certify_snf, det_bareiss, exact_matmul, field_normal_form,
                              invariant_factors, normal_form, rank, smith_normal_form,
                              sparse_invariant_factors)


def sympy_factors(M):
    """Nonzero invariant factors from sympy, made positive."""
    if M.size == 0:
        return []
    S = sympy_snf(sympy.Matrix(M.tolist()), domain=sympy.ZZ)
    return sorted(abs(int(S[i, i])) for i in range(min(S.shape)) if S[i, i] != 0)


small_mats = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda s: arrays(np.int64, s, elements=st.integers(-6, 6)))


def test_ring_parse():
    assert Ring.parse("Z") == ZZ
    assert Ring.parse("Q") == QQ
    assert Ring.parse("Z/3") == Ring("Zp", 3)
    assert str(Ring.parse("F5")) == "Z/5"
    with pytest.raises(ValueError):
        Ring("Zp", 4)
    with pytest.raises(ValueError):
        Ring.parse("R")


def test_textbook_example():
    M = np.array([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    f = smith_normal_form(M)
    assert f.invariant_factors == [2, 6, 12]
    assert certify_snf(M, f).ok


def test_zero_and_empty():
    f = smith_normal_form(np.zeros((3, 2), dtype=int))
    assert f.rank == 0 and certify_snf(np.zeros((3, 2), dtype=int), f).ok
    assert rank(np.zeros((0, 4), dtype=int)) == 0


@given(small_mats)
def test_snf_matches_sympy(M):
    f = smith_normal_form(M)
    assert certify_snf(M, f).ok
    assert f.invariant_factors == sympy_factors(M)


@given(small_mats)
def test_inverse_transforms(M):
    f = smith_normal_form(M)
    assert certify_snf(M, f, use_det=False).ok


@given(small_mats)
def test_sparse_factors_agree(M):
    cols = [{i: int(M[i, j]) for i in range(M.shape[0]) if M[i, j]} for j in range(M.shape[1])]
    assert list(sparse_invariant_factors(cols, M.shape[0])) == invariant_factors(M)


@given(small_mats, st.sampled_from([2, 3, 5]))
def test_field_rank_matches_sympy(M, p):
    f = field_normal_form(M, Ring("Zp", p))
    assert f.rank == DomainMatrix.from_Matrix(sympy.Matrix(M.tolist())).convert_to(GF(p)).rank()
    # exact check: U M V is the rank-r identity block mod p
    prod = (np.asarray(f.U, dtype=object).dot(M.astype(object)).dot(np.asarray(f.V, dtype=object))) % p
    want = np.zeros(M.shape, dtype=object)
    for k in range(f.rank):
        want[k, k] = 1
    assert np.array_equal(prod, want)


@given(small_mats)
def test_rational_rank(M):
    assert rank(M, QQ) == sympy.Matrix(M.tolist()).rank()
    assert normal_form(M, QQ).rank == rank(M, ZZ)


def test_determinant_and_large_products():
    M = np.array([[2, 1], [7, 4]])
    assert det_bareiss(M) == 1
    big = np.full((3, 3), 2**40, dtype=object)
    P = exact_matmul(big, big)
    assert P[0, 0] == 3 * 2**80


def test_no_overflow_on_growth():
    # a matrix whose naive elimination blows past 64 bits
    rng = np.random.default_rng(3)
    M = rng.integers(-5, 6, (30, 30))
    f = smith_normal_form(M)
    assert certify_snf(M, f).ok
    assert abs(int(np.prod([int(d) for d in f.invariant_factors], dtype=object))) == abs(det_bareiss(M))

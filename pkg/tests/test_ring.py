import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from falconpack.exceptions import DimensionError, ParameterMismatchError
from falconpack.ring import (RingPoly, poly_add, poly_mul_negacyclic, poly_mul_schoolbook,
                            poly_neg, poly_sub)
from oracles import negacyclic_loops

Q = 1 << 59


def rand_poly(n, rng, bits=59):
    return RingPoly(rng.integers(0, 1 << bits, size=n, dtype=np.uint64), bits)


def sparse_poly(n, nnz, rng):
    c = np.zeros(n, dtype=np.uint64)
    c[rng.choice(n, nnz, replace=False)] = rng.integers(0, Q, size=nnz, dtype=np.uint64)
    return RingPoly(c)


def test_add_identity_and_inverse(rng):
    a = rand_poly(64, rng)
    assert a + RingPoly.zero(64) == a
    assert a - a == RingPoly.zero(64)
    assert poly_add(a, poly_neg(a)) == RingPoly.zero(64)


def test_add_sub_roundtrip(rng):
    a, b = rand_poly(2048, rng), rand_poly(2048, rng)
    assert poly_sub(poly_add(a, b), b) == a


def test_small_hand_product():
    one_x = RingPoly(np.array([1, 1, 0, 0]))
    assert (one_x * one_x).coeffs.tolist() == [1, 2, 1, 0]


def test_negacyclic_wrap():
    n = 2048
    y = RingPoly.monomial(n, n - 1) * RingPoly.monomial(n, 1)
    assert int(y.coeffs[0]) == Q - 1 and y.nonzero() == 1
    assert RingPoly.monomial(n, n + 3) == poly_neg(RingPoly.monomial(n, 3))


def test_parameter_mismatch(rng):
    with pytest.raises(ParameterMismatchError):
        rand_poly(8, rng) + rand_poly(16, rng)
    with pytest.raises(ParameterMismatchError):
        poly_mul_negacyclic(RingPoly.zero(8, 59), RingPoly.zero(8, 40))


def test_rejects_non_power_of_two():
    with pytest.raises(DimensionError):
        RingPoly(np.zeros(6, dtype=np.uint64))


def test_schoolbook_matches_loop_oracle(rng):
    a, b = rand_poly(16, rng), rand_poly(16, rng)
    assert poly_mul_schoolbook(a, b).coeffs.tolist() == negacyclic_loops(a.coeffs, b.coeffs, Q)


def test_optimized_matches_schoolbook_dense(rng):
    a, b = rand_poly(2048, rng), rand_poly(2048, rng)
    assert poly_mul_negacyclic(a, b) == poly_mul_schoolbook(a, b)


def test_optimized_matches_schoolbook_sparse(rng):
    a, b = rand_poly(2048, rng), sparse_poly(2048, 40, rng)
    assert poly_mul_negacyclic(a, b) == poly_mul_schoolbook(a, b)
    assert poly_mul_negacyclic(b, a) == poly_mul_schoolbook(a, b)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), logn=st.integers(1, 9))
def test_ring_axioms(seed, logn):
    rng = np.random.default_rng(seed)
    n = 1 << logn
    a, b, c = rand_poly(n, rng), rand_poly(n, rng), rand_poly(n, rng)
    assert a * b == b * a
    assert a * (b + c) == a * b + a * c


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_mask_reduction_matches_wide_integers(seed):
    rng = np.random.default_rng(seed)
    a, b = rand_poly(32, rng), rand_poly(32, rng)
    wide = negacyclic_loops(a.coeffs, b.coeffs, Q)  # exact big-int accumulation
    assert (a * b).coeffs.tolist() == wide


def test_bytes_roundtrip_and_header(rng):
    a = rand_poly(64, rng, bits=40)
    blob = a.to_bytes()
    assert len(blob) == 16 + 8 * 64
    assert RingPoly.from_bytes(blob) == a
    with pytest.raises(DimensionError):
        RingPoly.from_bytes(blob[:-8])


def test_centered_representatives():
    p = RingPoly(np.array([1, Q - 1, Q // 2, 0], dtype=np.uint64))
    assert p.centered() == [1, -1, Q // 2, 0]

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from firenet.numerics import (
    MatrixOperator,
    NormEstimate,
    as_complex_tensor,
    inner,
    make_rng,
    norm_l1w,
    norm_l2,
    operator_norm,
)

from conftest import crandn

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_norm_l2_examples(rng):
    assert norm_l2(np.zeros(5)) == 0.0
    assert norm_l2(np.array([3, 4j])) == pytest.approx(5.0, rel=1e-15)
    x = crandn(rng, 64)
    oracle = 0.0
    for v in x:
        oracle += v.real**2 + v.imag**2
    assert norm_l2(x) == pytest.approx(np.sqrt(oracle), rel=1e-14)


def test_norm_l1w_examples(rng):
    e1 = np.zeros(4)
    e1[0] = 1
    assert norm_l1w(e1, np.ones(4)) == 1.0
    assert norm_l1w(np.array([1, 1j]), np.array([2.0, 3.0])) == pytest.approx(5.0)
    x, w = crandn(rng, 30), rng.uniform(0.1, 3, 30)
    oracle = sum(wi * abs(xi) for xi, wi in zip(x, w))
    assert norm_l1w(x, w) == pytest.approx(oracle, rel=1e-14)


def test_norm_l1w_errors():
    with pytest.raises(ValueError):
        norm_l1w(np.ones(3), np.ones(2))
    with pytest.raises(ValueError):
        norm_l1w(np.ones(2), np.array([1.0, 0.0]))


@given(arrays(np.float64, 12, elements=finite), arrays(np.float64, 12, elements=finite))
def test_norm_properties(re, im):
    x = re + 1j * im
    assert norm_l2(x) ** 2 == pytest.approx(inner(x, x).real, rel=1e-12, abs=1e-300)
    assert norm_l1w(x, np.ones(12)) == pytest.approx(np.abs(x).sum(), rel=1e-12, abs=1e-300)


def test_rng_is_reproducible():
    a = make_rng(7).standard_normal(5)
    b = make_rng(7).standard_normal(5)
    assert np.array_equal(a, b)
    assert isinstance(make_rng(7).bit_generator, np.random.PCG64)


def test_complex_tensor_requires_powers_of_two():
    assert as_complex_tensor(np.ones((4, 8))).dtype == np.complex128
    with pytest.raises(ValueError):
        as_complex_tensor(np.ones(6))


def test_operator_norm_examples(rng):
    tol = 1e-10
    est = operator_norm(lambda x: x, lambda y: y, (8,), tol=tol)
    assert abs(est.value - 1) <= tol
    D = np.diag([1.0, 2.0, 3.0])
    est = operator_norm(lambda x: D @ x, lambda y: D @ y, (3,), tol=tol)
    assert abs(est.value - 3) <= 3 * tol and est.converged
    A = crandn(rng, 10, 20)
    est = operator_norm(lambda x: A @ x, lambda y: A.conj().T @ y, (20,), (10,), tol=1e-12, max_iters=5000)
    assert est.value == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-8)


def test_operator_norm_of_adjoint_matches(rng):
    tol = 1e-10
    for _ in range(5):
        A = crandn(rng, 7, 11)
        a = operator_norm(lambda x: A @ x, lambda y: A.conj().T @ y, (11,), tol=tol, max_iters=5000)
        b = operator_norm(lambda y: A.conj().T @ y, lambda x: A @ x, (7,), tol=tol, max_iters=5000)
        assert abs(a.value - b.value) <= 2 * tol * a.value + 1e-12


def test_operator_norm_dimension_mismatch():
    A = np.ones((3, 4))
    with pytest.raises(ValueError):
        operator_norm(lambda x: A @ x, lambda y: A.T @ y, (5,))
    with pytest.raises(ValueError):
        operator_norm(lambda x: A @ x, lambda y: A.T @ y, (4,), (2,))


def test_unconverged_estimate_is_inflated():
    est = NormEstimate(2.0, False, 10, 1e-10)
    assert est.safe_bound == pytest.approx(2.1)
    assert NormEstimate(2.0, True, 10, 1e-10).safe_bound < 2.0 + 1e-8


def test_matrix_operator(rng):
    A = crandn(rng, 4, 6)
    op = MatrixOperator(A)
    x, y = crandn(rng, 6), crandn(rng, 4)
    assert np.vdot(op.forward(x), y) == pytest.approx(np.vdot(x, op.adjoint(y)), rel=1e-12)
    assert op.norm().value == pytest.approx(np.linalg.norm(A, 2), rel=1e-12)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invbo.errors import InvalidArgumentError
from invbo.kernels import (
    CoregionalizationParams,
    InputKernelParams,
    coregionalization,
    eval_input_kernel,
    input_kernel_matrix,
    joint_covariance,
)
from invbo.mogp import cholesky_with_jitter
from reference import coreg_loop, kernel_matrix_loop, kron_loop

finite = st.floats(-50, 50, allow_nan=False)


def test_kernel_diagonal_is_variance():
    p = InputKernelParams(2.5, 0.3)
    assert eval_input_kernel([1.0, -2.0], [1.0, -2.0], p) == 2.5


def test_kernel_unit_distance():
    p = InputKernelParams(1.0, 1.0)
    assert eval_input_kernel([0.0], [1.0], p) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert eval_input_kernel([0.0, 0.0], [0.6, 0.8], p) == pytest.approx(0.60653, abs=1e-5)


def test_kernel_far_apart_vanishes():
    assert eval_input_kernel([0.0], [1e3], InputKernelParams(1.0, 1.0)) < 1e-12


@pytest.mark.parametrize("bad", [[np.nan], [np.inf], [-np.inf]])
def test_kernel_rejects_non_finite(bad):
    with pytest.raises(InvalidArgumentError):
        eval_input_kernel(bad, [0.0], InputKernelParams())


@pytest.mark.parametrize("variance,lengthscale", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, np.nan)])
def test_kernel_params_validated(variance, lengthscale):
    with pytest.raises(InvalidArgumentError):
        InputKernelParams(variance, lengthscale)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2),
       st.floats(0.1, 10), st.floats(0.1, 10))
def test_kernel_symmetric_and_bounded(x, x2, variance, lengthscale):
    p = InputKernelParams(variance, lengthscale)
    k = eval_input_kernel(x, x2, p)
    assert k == eval_input_kernel(x2, x, p)
    assert 0.0 <= k <= variance
    if x == x2:
        assert k == variance


def test_kernel_matrix_single_point():
    K = input_kernel_matrix([[0.3]], [[0.3]], InputKernelParams(1.7, 0.5))
    assert K.shape == (1, 1) and K[0, 0] == 1.7


def test_kernel_matrix_duplicate_rows_rank_deficient():
    X = np.array([[0.1, 0.2], [0.1, 0.2], [1.0, -1.0]])
    K = input_kernel_matrix(X, X, InputKernelParams())
    np.testing.assert_array_equal(K[0], K[1])
    assert np.linalg.matrix_rank(K) == 2


def test_kernel_matrix_matches_loop(rng):
    X = rng.normal(size=(4, 2))
    X2 = rng.normal(size=(3, 2))
    p = InputKernelParams(1.3, 0.7)
    np.testing.assert_allclose(input_kernel_matrix(X, X2, p), kernel_matrix_loop(X, X2, 1.3, 0.7),
                               rtol=1e-14, atol=1e-15)
    for i in range(4):
        for j in range(3):
            assert input_kernel_matrix(X, X2, p)[i, j] == pytest.approx(eval_input_kernel(X[i], X2[j], p),
                                                                        rel=1e-14)


def test_kernel_matrix_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        input_kernel_matrix(np.zeros((2, 2)), np.zeros((2, 3)), InputKernelParams())


def test_coregionalization_identity():
    np.testing.assert_array_equal(coregionalization(CoregionalizationParams(np.zeros((3, 1)), 1.0)),
                                  np.eye(3))


def test_coregionalization_outer_product():
    np.testing.assert_array_equal(coregionalization(CoregionalizationParams([[1.0], [1.0]], 0.0)),
                                  np.ones((2, 2)))


def test_coregionalization_matches_loop(rng):
    for _ in range(5):
        L = rng.normal(size=(4, 2))
        kappa = rng.uniform(0, 2)
        B = coregionalization(CoregionalizationParams(L, kappa))
        np.testing.assert_allclose(B, coreg_loop(L, kappa), rtol=1e-14, atol=1e-14)
        np.testing.assert_array_equal(B, B.T)
        assert np.linalg.eigvalsh(B).min() >= kappa - 1e-10


@pytest.mark.parametrize("kappa", [-0.1, np.nan])
def test_coregionalization_rejects_bad_kappa(kappa):
    with pytest.raises(InvalidArgumentError):
        CoregionalizationParams(np.ones((2, 1)), kappa)


def test_joint_identity_B_is_block_diagonal(rng):
    A = rng.normal(size=(3, 3))
    Kx = A @ A.T
    J = joint_covariance(np.eye(2), Kx)
    np.testing.assert_array_equal(J[:3, :3], Kx)
    np.testing.assert_array_equal(J[3:, 3:], Kx)
    np.testing.assert_array_equal(J[:3, 3:], 0.0)


def test_joint_scalar_B():
    Kx = np.array([[1.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(joint_covariance([[2.0]], Kx), 2 * Kx)


def test_joint_matches_index_loop_and_blocks_exact(rng):
    A = rng.normal(size=(2, 2))
    B = A @ A.T
    C = rng.normal(size=(3, 3))
    Kx = C @ C.T
    J = joint_covariance(B, Kx)
    np.testing.assert_array_equal(J, kron_loop(B, Kx))
    for m in range(2):
        for mp in range(2):
            np.testing.assert_array_equal(J[m * 3:(m + 1) * 3, mp * 3:(mp + 1) * 3], B[m, mp] * Kx)


def test_joint_rejects_asymmetric():
    with pytest.raises(InvalidArgumentError):
        joint_covariance(np.array([[1.0, 0.5], [0.4, 1.0]]), np.eye(2))


def test_joint_passes_jittered_cholesky(rng):
    B = coregionalization(CoregionalizationParams(rng.normal(size=(3, 1)), 0.0))
    X = np.vstack([rng.normal(size=(3, 1)), [[0.0], [0.0]]])  # duplicate rows
    Kx = input_kernel_matrix(X, X, InputKernelParams())
    J = joint_covariance(B, Kx)
    L, jitter = cholesky_with_jitter(J)
    assert 0 < jitter <= 1e-4 * np.mean(np.diag(J))
    np.testing.assert_allclose(L @ L.T, J, atol=1e-6)

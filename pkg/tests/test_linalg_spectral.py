import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coupledwaves.linalg_spectral import (
    DiscreteHilbert,
    SingularOperatorError,
    SpectralDomainError,
    SymmetryError,
    eig_sym,
    frac_power,
    op_norm,
    power_iteration_norm,
    solve,
)
from coupledwaves.operators1d import COERCIVE_CATALOG, make_named


def dirichlet_fd(n):
    h = 1.0 / (n + 1)
    M = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    return M, DiscreteHilbert(n, h)


def test_diagonal_matrix():
    op = eig_sym(np.diag([5.0, 2.0]), DiscreteHilbert(2, 1.0))
    np.testing.assert_allclose(op.eigenvalues, [2.0, 5.0])
    np.testing.assert_allclose(np.abs(op.eigenvectors), [[0, 1], [1, 0]])


def test_identity_eigenvalues():
    op = eig_sym(np.eye(3), DiscreteHilbert(3, 0.5))
    np.testing.assert_allclose(op.eigenvalues, [1, 1, 1])


def test_dirichlet_eigenvalues_closed_form():
    n = 8
    M, sp = dirichlet_fd(n)
    h = sp.weight
    k = np.arange(1, n + 1)
    expected = 4 / h**2 * np.sin(k * np.pi * h / 2) ** 2
    np.testing.assert_allclose(eig_sym(M, sp).eigenvalues, expected, rtol=1e-12)


def test_nonsymmetric_rejected_with_defect():
    M = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(SymmetryError, match="defect"):
        eig_sym(M, DiscreteHilbert(2))


def test_tiny_asymmetry_tolerated():
    M, sp = dirichlet_fd(6)
    M = M.copy()
    M[0, 1] *= 1 + 1e-14
    eig_sym(M, sp)


@pytest.mark.parametrize("name", COERCIVE_CATALOG)
def test_weighted_eigendecomposition(name):
    op = make_named(name, 32)
    V, lam, h = op.eigenvectors, op.eigenvalues, op.space.weight
    assert np.all(np.diff(lam) >= 0)
    np.testing.assert_allclose(h * V.T @ V, np.eye(32), atol=1e-9)
    resid = np.linalg.norm(op.matrix @ V - V * lam, axis=0)
    # second term: rounding floor of forming M v
    floor = 4 * np.finfo(float).eps * np.linalg.norm(op.matrix, 2)
    assert np.all(resid <= (1e-9 * np.abs(lam) + floor) * np.linalg.norm(V, axis=0))
    recon = h * (V * lam) @ V.T
    assert np.linalg.norm(op.matrix - recon) <= 1e-9 * np.linalg.norm(op.matrix)


def test_frac_power_zero_is_identity():
    op = make_named("robin_laplacian", 16)
    np.testing.assert_array_equal(frac_power(op, 0), np.eye(16))


@pytest.mark.parametrize("name", ["dirichlet_laplacian", "clamped_bilaplacian"])
def test_half_power_squares_to_operator(name):
    op = make_named(name, 24)
    R = frac_power(op, 0.5)
    np.testing.assert_allclose(R, R.T, rtol=0, atol=0)
    assert np.linalg.norm(R @ R - op.matrix) <= 1e-9 * np.linalg.norm(op.matrix)
    assert np.linalg.norm(frac_power(op, 1) - op.matrix) <= 1e-9 * np.linalg.norm(op.matrix)


def test_inverse_power():
    op = make_named("robin_laplacian", 24)
    np.testing.assert_allclose(op.matrix @ frac_power(op, -1), np.eye(24), atol=1e-10)


def test_fractional_power_needs_positive_spectrum():
    M = np.diag([0.0, 1.0, 2.0])
    op = eig_sym(M, DiscreteHilbert(3))
    with pytest.raises(SpectralDomainError):
        frac_power(op, 0.5)
    with pytest.raises(SpectralDomainError):
        frac_power(op, -1)
    np.testing.assert_allclose(frac_power(op, 2), M @ M)


EXPONENTS = [-1.0, -0.5, 0.5, 1.0, 2.0]


@given(
    name=st.sampled_from(COERCIVE_CATALOG),
    a=st.sampled_from(EXPONENTS),
    b=st.sampled_from(EXPONENTS),
)
def test_spectral_calculus_is_additive(name, a, b):
    op = make_named(name, 16)
    lhs = frac_power(op, a) @ frac_power(op, b)
    rhs = frac_power(op, a + b)
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_op_norm_examples():
    sp = DiscreteHilbert(4, 0.2)
    assert op_norm(np.eye(4), sp, sp) == pytest.approx(1.0)
    assert op_norm(np.diag([3.0, 1.0]), DiscreteHilbert(2), DiscreteHilbert(2)) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        op_norm(np.eye(3), sp, sp)


def test_op_norm_between_spaces_of_different_weight():
    # the inclusion R^2 (weight 1) -> R^2 (weight 4) doubles norms
    assert op_norm(np.eye(2), DiscreteHilbert(2, 1.0), DiscreteHilbert(2, 4.0)) == pytest.approx(2.0)


def test_half_power_compatibility_norm_matches_power_iteration():
    A1 = make_named("robin_laplacian", 64)
    A2 = make_named("dirichlet_laplacian", 64)
    M = frac_power(A1, 0.5) @ frac_power(A2, -1)
    sp = A1.space
    val = op_norm(M, sp, sp)
    assert np.isfinite(val) and val > 0
    assert power_iteration_norm(M, sp, sp, iters=20000) == pytest.approx(val, rel=1e-8)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_op_norm_submultiplicative(seed, n):
    rng = np.random.default_rng(seed)
    sp = DiscreteHilbert(n, float(rng.uniform(0.1, 2)))
    X, Y = rng.standard_normal((2, n, n))
    assert op_norm(X @ Y, sp, sp) <= op_norm(X, sp, sp) * op_norm(Y, sp, sp) * (1 + 1e-12)


def test_solve_examples():
    sp = DiscreteHilbert(5, 0.25)
    op = eig_sym(2 * np.eye(5), sp)
    b = np.arange(5.0)
    np.testing.assert_allclose(solve(op, b), b / 2)
    np.testing.assert_array_equal(solve(op, np.zeros(5)), np.zeros(5))


def test_solve_on_first_eigenvector():
    M, sp = dirichlet_fd(32)
    op = eig_sym(M, sp)
    e1 = op.eigenvectors[:, 0]
    np.testing.assert_allclose(solve(op, e1), e1 / op.omega, rtol=1e-10, atol=1e-14)


def test_solve_residual(rng):
    op = make_named("clamped_bilaplacian", 48)
    b = rng.standard_normal(48)
    x = solve(op, b)
    assert np.linalg.norm(op.matrix @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_rejects_singular():
    op = eig_sym(np.diag([0.0, 1.0]), DiscreteHilbert(2))
    with pytest.raises(SingularOperatorError):
        solve(op, np.ones(2))

"""Linear algebra on a uniformly weighted discrete L2 space.

Vectors live in R^dim with the product <x, y> = h * sum(x_i * y_i).  Because
the weight is a constant, a matrix is self-adjoint for the weighted product
exactly when it is symmetric in the Euclidean sense, so every spectral routine
below works with plain ``numpy.linalg.eigh`` output rescaled by ``1/sqrt(h)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg

Array = npt.NDArray[np.float64]

SYMMETRY_RTOL = 1e-12
EIGEN_RTOL = 1e-9
SINGULAR_RTOL = 1e-12


class SymmetryError(ValueError):
    """Raised when a matrix that must be self-adjoint is not."""


class SpectralDomainError(ValueError):
    """Raised when a spectral function is undefined on the operator's spectrum."""


class SingularOperatorError(ValueError):
    """Raised when a solve is requested for a (numerically) singular operator."""


@dataclass(frozen=True)
class DiscreteHilbert:
    dim: int
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")

    def inner(self, x: Array, y: Array) -> float:
        return float(self.weight * np.dot(x, y))

    def norm(self, x: Array) -> float:
        return float(np.sqrt(self.weight) * np.linalg.norm(x))


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Symmetric matrix together with its weighted eigendecomposition.

    ``eigenvectors[:, k]`` has unit weighted norm, so
    ``matrix == eigenvectors @ diag(eigenvalues) @ eigenvectors.T * weight``.
    """

    space: DiscreteHilbert
    matrix: Array
    eigenvalues: Array
    eigenvectors: Array

    @property
    def omega(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def dim(self) -> int:
        return self.space.dim

    def apply(self, x: Array) -> Array:
        return self.matrix @ x

    def coefficients(self, x: Array) -> Array:
        """Weighted expansion coefficients <x, e_k> in the eigenbasis."""
        return self.space.weight * (self.eigenvectors.T @ x)

    def spectral_function(self, values: Array) -> Array:
        """Matrix of f(A) given f evaluated on the ascending eigenvalues."""
        V = self.eigenvectors
        return self.space.weight * (V * values) @ V.T


def symmetry_defect(matrix: Array) -> float:
    scale = np.linalg.norm(matrix)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(matrix - matrix.T) / scale)


def eig_sym(matrix: Array, space: DiscreteHilbert) -> SelfAdjointOperator:
    """Eigendecomposition of a symmetric matrix in the weighted product.

    Raises
    ------
    SymmetryError
        If ``||M - M^T|| > 1e-12 ||M||``; the defect is included in the message.
    """
    M = np.array(matrix, dtype=float)
    if M.shape != (space.dim, space.dim):
        raise ValueError(f"matrix shape {M.shape} does not match dim {space.dim}")
    defect = symmetry_defect(M)
    if defect > SYMMETRY_RTOL:
        raise SymmetryError(f"matrix is not symmetric: relative defect {defect:.3e}")
    M = 0.5 * (M + M.T)
    lam, Q = np.linalg.eigh(M)
    V = Q / np.sqrt(space.weight)
    M.setflags(write=False)
    lam.setflags(write=False)
    V.setflags(write=False)
    return SelfAdjointOperator(space=space, matrix=M, eigenvalues=lam, eigenvectors=V)


def frac_power(op: SelfAdjointOperator, s: float) -> Array:
    """A**s through the spectral calculus.

    Integer ``s >= 0`` is allowed for semidefinite operators; every other
    exponent needs a strictly positive spectrum.
    """
    lam = op.eigenvalues
    if s == 0:
        return np.eye(op.dim)
    integer_nonneg = float(s).is_integer() and s > 0
    if not integer_nonneg and lam[0] <= 0:
        raise SpectralDomainError(
            f"A**{s} undefined: smallest eigenvalue {lam[0]:.3e} is not positive"
        )
    if integer_nonneg:
        values = lam ** int(s)
    else:
        values = lam**s
    out = op.spectral_function(values)
    return 0.5 * (out + out.T)


def op_norm(M: Array, source: DiscreteHilbert, target: DiscreteHilbert) -> float:
    """Operator norm of ``M`` from ``source`` to ``target`` (weighted spaces)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (target.dim, source.dim):
        raise ValueError(
            f"matrix shape {M.shape} incompatible with {source.dim} -> {target.dim}"
        )
    sigma = np.linalg.norm(M, 2)
    return float(np.sqrt(target.weight / source.weight) * sigma)


def solve(op: SelfAdjointOperator, rhs: Array) -> Array:
    """Solve ``A x = rhs`` for a coercive operator."""
    scale = np.abs(op.eigenvalues).max()
    if op.omega <= SINGULAR_RTOL * scale:
        raise SingularOperatorError(
            f"operator is singular or indefinite (omega = {op.omega:.3e})"
        )
    rhs = np.asarray(rhs, dtype=float)
    return scipy.linalg.solve(op.matrix, rhs, assume_a="pos")


def power_iteration_norm(
    M: Array,
    source: DiscreteHilbert,
    target: DiscreteHilbert,
    iters: int = 2000,
    seed: int = 0,
) -> float:
    """Largest singular value by power iteration on M^T M (independent check)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = M.T @ (M @ x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        new = np.sqrt(ny)
        if abs(new - est) <= 1e-15 * new:
            est = new
            break
        est = new
    return float(np.sqrt(target.weight / source.weight) * est)

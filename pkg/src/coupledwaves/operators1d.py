"""Finite-difference realizations of the 1D elliptic operators on (0, 1).

All operators of a given ``n`` share one grid: the interior nodes
``x_i = i h``, ``i = 1..n``, ``h = 1/(n+1)``.  Boundary values are eliminated
so that every matrix is symmetric:

* Dirichlet: ``u_0 = 0``.
* Neumann: ``u_0 = u_1`` (one-sided difference).
* Robin (``du/dnu + u = 0``): ``(u_1 - u_0)/h = u_0``, i.e. ``u_0 = u_1/(1+h)``.

Fourth-order operators: the square of the Dirichlet matrix (hinged ends), a
five-point stencil with a reflected ghost node (clamped ends), and the
unconstrained second-difference form (free ends).

Sharing the grid keeps the coupled unknowns in one discrete L2 space.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .linalg_spectral import Array, DiscreteHilbert, SelfAdjointOperator, eig_sym


class BC(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"
    NAVIER = "navier"
    CLAMPED = "clamped"
    FREE = "free"


class UnsupportedOperatorError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryCondition:
    left: BC
    right: BC


@dataclass(frozen=True)
class OperatorSpec:
    symbol: str
    bc: BoundaryCondition
    shift: float = 0.0
    n: int = 64

    def with_n(self, n: int) -> "OperatorSpec":
        return replace(self, n=n)


_LAPLACIAN_BCS = {BC.DIRICHLET, BC.NEUMANN, BC.ROBIN}
_BILAPLACIAN_BCS = {
    (BC.NAVIER, BC.NAVIER),
    (BC.CLAMPED, BC.CLAMPED),
    (BC.FREE, BC.FREE),
}

# name -> (symbol, left, right, default shift)
CATALOG: dict[str, tuple[str, BC, BC, float]] = {
    "dirichlet_laplacian": ("laplacian", BC.DIRICHLET, BC.DIRICHLET, 0.0),
    "neumann_laplacian": ("laplacian", BC.NEUMANN, BC.NEUMANN, 0.0),
    "neumann_shift_laplacian": ("laplacian", BC.NEUMANN, BC.NEUMANN, 1.0),
    "robin_laplacian": ("laplacian", BC.ROBIN, BC.ROBIN, 0.0),
    "mixed_dirichlet_neumann_laplacian": ("laplacian", BC.DIRICHLET, BC.NEUMANN, 0.0),
    "navier_bilaplacian": ("bilaplacian", BC.NAVIER, BC.NAVIER, 0.0),
    "clamped_bilaplacian": ("bilaplacian", BC.CLAMPED, BC.CLAMPED, 0.0),
    "free_shift_bilaplacian": ("bilaplacian", BC.FREE, BC.FREE, 1.0),
}

# coercive catalog entries (the unshifted Neumann Laplacian is kept only as a building block)
COERCIVE_CATALOG = [name for name in CATALOG if name != "neumann_laplacian"]

APPROXIMATE = {"free_shift_bilaplacian"}


def catalog_spec(name: str, n: int = 64, shift: float | None = None) -> OperatorSpec:
    try:
        symbol, left, right, default_shift = CATALOG[name]
    except KeyError:
        raise UnsupportedOperatorError(
            f"unknown operator {name!r}; choose from {sorted(CATALOG)}"
        ) from None
    return OperatorSpec(
        symbol=symbol,
        bc=BoundaryCondition(left, right),
        shift=default_shift if shift is None else float(shift),
        n=n,
    )


def grid(n: int) -> tuple[Array, float]:
    h = 1.0 / (n + 1)
    return h * np.arange(1, n + 1), h


def _boundary_diagonal(kind: BC, h: float) -> float:
    # coefficient of u_1 (resp. u_n) picked up from the eliminated boundary value
    if kind is BC.DIRICHLET:
        return 0.0
    if kind is BC.NEUMANN:
        return 1.0
    if kind is BC.ROBIN:
        return 1.0 / (1.0 + h)
    raise UnsupportedOperatorError(f"{kind.value} is not a Laplacian boundary condition")


def laplacian_matrix(n: int, left: BC, right: BC) -> Array:
    """Matrix of -u'' with the given endpoint conditions (no shift)."""
    _, h = grid(n)
    inv_h2 = (n + 1) ** 2  # exact 1/h**2
    T = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    T[0, 0] -= _boundary_diagonal(left, h)
    T[-1, -1] -= _boundary_diagonal(right, h)
    return inv_h2 * T


def clamped_bilaplacian_matrix(n: int) -> Array:
    # [1, -4, 6, -4, 1] / h^4 with u_0 = 0 and ghost u_{-1} = u_1
    inv_h4 = float((n + 1) ** 4)
    T = (
        6.0 * np.eye(n)
        - 4.0 * (np.eye(n, k=1) + np.eye(n, k=-1))
        + (np.eye(n, k=2) + np.eye(n, k=-2))
    )
    T[0, 0] += 1.0
    T[-1, -1] += 1.0
    return inv_h4 * T


def free_bilaplacian_matrix(n: int) -> Array:
    """``S^T S`` with ``S`` the (n-2) x n matrix of second differences.

    ``h |S u|^2`` discretizes the integral of the squared second derivative
    with no constraint at the ends, so the free boundary conditions arise
    naturally and the kernel is the affine grid functions.  A free end lies
    half a cell beyond the last node, so the nodes are read as cell centres
    of spacing ``1/n``; with ``1/(n+1)`` the beam would be too short by one
    cell and the spectrum only first-order accurate.
    """
    inv_H2 = float(n**2)
    S = np.zeros((n - 2, n))
    idx = np.arange(n - 2)
    S[idx, idx] = inv_H2
    S[idx, idx + 1] = -2.0 * inv_H2
    S[idx, idx + 2] = inv_H2
    return S.T @ S


def operator_matrix(spec: OperatorSpec) -> Array:
    if spec.n < 4:
        raise UnsupportedOperatorError(f"n must be at least 4, got {spec.n}")
    if spec.shift < 0:
        raise UnsupportedOperatorError(f"shift must be nonnegative, got {spec.shift}")
    left, right = spec.bc.left, spec.bc.right
    n = spec.n
    if spec.symbol == "laplacian":
        if left not in _LAPLACIAN_BCS or right not in _LAPLACIAN_BCS:
            raise UnsupportedOperatorError(
                f"unsupported Laplacian boundary pair ({left.value}, {right.value})"
            )
        if left is BC.NEUMANN and right is BC.NEUMANN and spec.shift == 0:
            raise UnsupportedOperatorError(
                "pure Neumann Laplacian without shift is not coercive"
            )
        M = laplacian_matrix(n, left, right)
    elif spec.symbol == "bilaplacian":
        if (left, right) not in _BILAPLACIAN_BCS:
            raise UnsupportedOperatorError(
                f"unsupported bi-Laplacian boundary pair ({left.value}, {right.value})"
            )
        if left is BC.NAVIER:
            D = laplacian_matrix(n, BC.DIRICHLET, BC.DIRICHLET)
            M = D @ D
        elif left is BC.CLAMPED:
            M = clamped_bilaplacian_matrix(n)
        else:
            if spec.shift == 0:
                raise UnsupportedOperatorError(
                    "free bi-Laplacian needs a positive shift to be coercive"
                )
            M = free_bilaplacian_matrix(n)
    else:
        raise UnsupportedOperatorError(f"unknown symbol {spec.symbol!r}")
    if spec.shift:
        M = M + spec.shift * np.eye(n)
    return M


def make_operator(spec: OperatorSpec) -> SelfAdjointOperator:
    _, h = grid(spec.n)
    return eig_sym(operator_matrix(spec), DiscreteHilbert(spec.n, h))


def make_named(name: str, n: int, shift: float | None = None) -> SelfAdjointOperator:
    return make_operator(catalog_spec(name, n, shift))


def poincare_constant(spec: OperatorSpec) -> float:
    """Best constant C in C|u|^2 <= <Au, u>, i.e. the smallest eigenvalue."""
    return make_operator(spec).omega


def alpha_range(spec1: OperatorSpec, spec2: OperatorSpec) -> tuple[float, float]:
    """Open interval (0, sqrt(omega1 * omega2)) of admissible coupling sizes."""
    w1 = poincare_constant(spec1)
    w2 = poincare_constant(spec2)
    if w1 <= 0 or w2 <= 0:
        raise UnsupportedOperatorError("both operators must be coercive")
    return 0.0, float(np.sqrt(w1 * w2))

"""Coupled damped system u'' + A1 u + B u' + a1 v = 0, v'' + A2 v + a2 u = 0.

The phase-space state is ``U = (u, p, v, q)`` with ``p = u'`` and ``q = v'``.
For the symmetric coupling ``a1 == a2 == alpha`` the energy is

    E(U) = E1(u, p) + E2(v, q) + alpha <u, v>,

and for ``a1 != a2`` (same sign) it is ``|a2| E1 + |a1| E2 + |a2| a1 <u, v>``,
which reduces to ``a2 E1 + a1 E2 + a1 a2 <u, v>`` for positive couplings.
Either way the first-order generator is dissipative in the product whose
quadratic form is ``2 E``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .linalg_spectral import (
    Array,
    DiscreteHilbert,
    SelfAdjointOperator,
    eig_sym,
    frac_power,
    op_norm,
)
from .operators1d import OperatorSpec, make_operator

HALF_BOUNDED_FACTOR = 1.5
POWER_GROWTH_FACTOR = 2.0
KAPPA_POWERS = (2, 3, 4)


class HypothesisError(ValueError):
    """The data violate one of the standing assumptions on A1, A2, B, alpha."""


class GeneratorInverseError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class DampingOperator:
    matrix: Array
    beta: float

    @classmethod
    def scalar(cls, beta: float, dim: int) -> "DampingOperator":
        return cls(matrix=beta * np.eye(dim), beta=float(beta))

    @classmethod
    def from_matrix(cls, matrix: Array) -> "DampingOperator":
        M = np.asarray(matrix, dtype=float)
        if not np.allclose(M, M.T, rtol=1e-12, atol=0):
            raise HypothesisError("damping operator B must be symmetric")
        return cls(matrix=M, beta=float(np.linalg.eigvalsh(M)[0]))


@dataclass(frozen=True, eq=False)
class State:
    u: Array
    p: Array
    v: Array
    q: Array

    @classmethod
    def zeros(cls, n: int) -> "State":
        return cls(*(np.zeros(n) for _ in range(4)))

    @classmethod
    def from_vector(cls, vec: Array) -> "State":
        vec = np.asarray(vec)
        n = vec.shape[0] // 4
        return cls(vec[:n], vec[n : 2 * n], vec[2 * n : 3 * n], vec[3 * n :])

    def as_vector(self) -> Array:
        return np.concatenate([self.u, self.p, self.v, self.q])

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    def __add__(self, other: "State") -> "State":
        return State.from_vector(self.as_vector() + other.as_vector())

    def __sub__(self, other: "State") -> "State":
        return State.from_vector(self.as_vector() - other.as_vector())

    def __mul__(self, c: float) -> "State":
        return State.from_vector(c * self.as_vector())

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


@dataclass
class HypothesesReport:
    omega1: float
    omega2: float
    beta: float
    alpha1: float
    alpha2: float
    alpha_ok: bool
    alpha_margin: float
    nu_alpha: float
    kappa_half: float
    kappa_j: dict[int, float]
    kappa_table: dict[int, dict[str, float]] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    classification: str = ""

    def to_dict(self) -> dict:
        return {
            "omega1": self.omega1,
            "omega2": self.omega2,
            "beta": self.beta,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "alpha_ok": self.alpha_ok,
            "alpha_margin": self.alpha_margin,
            "nu_alpha": self.nu_alpha,
            "kappa_half": self.kappa_half,
            "kappa_j": {str(j): k for j, k in self.kappa_j.items()},
            "kappa_table": {str(n): row for n, row in self.kappa_table.items()},
            "flags": list(self.flags),
            "classification": self.classification,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    A1: SelfAdjointOperator
    A2: SelfAdjointOperator
    B: DampingOperator
    alpha1: float
    alpha2: float
    diagnostic: bool = False
    specs: tuple[OperatorSpec, OperatorSpec] | None = None

    @property
    def n(self) -> int:
        return self.A1.dim

    @property
    def space(self) -> DiscreteHilbert:
        return self.A1.space

    @property
    def symmetric(self) -> bool:
        return self.alpha1 == self.alpha2

    @property
    def energy_weights(self) -> tuple[float, float, float]:
        """(weight of E1, weight of E2, coefficient of <u, v>) in the energy."""
        if self.symmetric:
            return 1.0, 1.0, self.alpha1
        if self.alpha1 == 0 or self.alpha2 == 0:
            # one-way coupling: no conserved cross term, report E1 + E2
            return 1.0, 1.0, 0.0
        return abs(self.alpha2), abs(self.alpha1), abs(self.alpha2) * self.alpha1

    @property
    def dissipation_weight(self) -> float:
        return self.energy_weights[0]

    @property
    def nu(self) -> float:
        w1, w2 = self.A1.omega, self.A2.omega
        return float(1.0 - np.sqrt(abs(self.alpha1 * self.alpha2) / (w1 * w2)))

    @cached_property
    def report(self) -> HypothesesReport:
        return hypotheses_report(self)

    @cached_property
    def _A2_inv(self) -> Array:
        return frac_power(self.A2, -1)

    @cached_property
    def _schur_factor(self):
        S = self.A1.matrix - self.alpha1 * self.alpha2 * self._A2_inv
        S = 0.5 * (S + S.T)
        try:
            return scipy.linalg.cho_factor(S)
        except np.linalg.LinAlgError as exc:
            raise GeneratorInverseError(
                "Schur complement A1 - a1*a2*A2^-1 is not positive definite; "
                f"a1*a2 = {self.alpha1 * self.alpha2:.6g}, "
                f"omega1*omega2 = {self.A1.omega * self.A2.omega:.6g}"
            ) from exc

    @cached_property
    def gram_matrix(self) -> Array:
        """Matrix G with (U|V) = U.G.V for stacked state vectors."""
        n, h = self.n, self.space.weight
        w1, w2, c = self.energy_weights
        eye = np.eye(n)
        G = np.zeros((4 * n, 4 * n))
        G[:n, :n] = w1 * self.A1.matrix
        G[n : 2 * n, n : 2 * n] = w1 * eye
        G[2 * n : 3 * n, 2 * n : 3 * n] = w2 * self.A2.matrix
        G[3 * n :, 3 * n :] = w2 * eye
        G[:n, 2 * n : 3 * n] = c * eye
        G[2 * n : 3 * n, :n] = c * eye
        return h * G

    @cached_property
    def generator_matrix(self) -> Array:
        n = self.n
        eye = np.eye(n)
        M = np.zeros((4 * n, 4 * n))
        M[:n, n : 2 * n] = eye
        M[n : 2 * n, :n] = -self.A1.matrix
        M[n : 2 * n, n : 2 * n] = -self.B.matrix
        M[n : 2 * n, 2 * n : 3 * n] = -self.alpha1 * eye
        M[2 * n : 3 * n, 3 * n :] = eye
        M[3 * n :, :n] = -self.alpha2 * eye
        M[3 * n :, 2 * n : 3 * n] = -self.A2.matrix
        return M


def assemble(
    A1: SelfAdjointOperator,
    A2: SelfAdjointOperator,
    B: DampingOperator | float,
    alpha1: float,
    alpha2: float | None = None,
    *,
    diagnostic: bool = False,
    specs: tuple[OperatorSpec, OperatorSpec] | None = None,
) -> CoupledSystem:
    """Validate the data and build a :class:`CoupledSystem`.

    ``diagnostic=True`` admits the two deliberately degenerate set-ups used
    for probes: an undamped system (``beta = 0``) and one-way coupling
    (``alpha1 = 0``).
    """
    if A1.space != A2.space:
        raise HypothesisError(
            f"A1 and A2 act on different spaces: {A1.space} vs {A2.space}"
        )
    if alpha2 is None:
        alpha2 = alpha1
    alpha1, alpha2 = float(alpha1), float(alpha2)
    if not isinstance(B, DampingOperator):
        B = DampingOperator.scalar(float(B), A1.dim)
    if B.matrix.shape != (A1.dim, A1.dim):
        raise HypothesisError("B has the wrong dimension")
    for name, op in (("A1", A1), ("A2", A2)):
        if op.omega <= 0:
            raise HypothesisError(f"{name} is not coercive (omega = {op.omega:.3e})")
    if B.beta < 0 or (B.beta == 0 and not diagnostic):
        raise HypothesisError(f"B must be positive definite (beta = {B.beta:.3e})")
    bound = A1.omega * A2.omega
    if alpha1 == alpha2:
        if alpha1 == 0:
            raise HypothesisError("coupling must be nonzero: need 0 < |alpha|")
        if abs(alpha1) >= np.sqrt(bound):
            raise HypothesisError(
                f"|alpha| = {abs(alpha1):.6g} violates |alpha| < sqrt(omega1*omega2)"
                f" = {np.sqrt(bound):.6g}"
            )
    else:
        product = alpha1 * alpha2
        if product == 0 and not diagnostic:
            raise HypothesisError(
                "one-way coupling (alpha1*alpha2 = 0) needs diagnostic=True"
            )
        if product < 0:
            raise HypothesisError("couplings of opposite sign: need alpha1*alpha2 > 0")
        if product >= bound:
            raise HypothesisError(
                f"alpha1*alpha2 = {product:.6g} violates alpha1*alpha2 < "
                f"omega1*omega2 = {bound:.6g}"
            )
    return CoupledSystem(A1, A2, B, alpha1, alpha2, diagnostic, specs)


def assemble_from_specs(
    spec1: OperatorSpec,
    spec2: OperatorSpec,
    beta: float,
    alpha1: float,
    alpha2: float | None = None,
    *,
    diagnostic: bool = False,
) -> CoupledSystem:
    A1, A2 = make_operator(spec1), make_operator(spec2)
    return assemble(
        A1, A2, beta, alpha1, alpha2, diagnostic=diagnostic, specs=(spec1, spec2)
    )


# --------------------------------------------------------------------------
# energies and products


def component_energy(A: SelfAdjointOperator, x: Array, y: Array) -> float:
    h = A.space.weight
    return 0.5 * h * (float(x @ (A.matrix @ x)) + float(y @ y))


def total_energy(sys: CoupledSystem, U: State) -> tuple[float, float, float]:
    """Return ``(E, E1, E2)``."""
    E1 = component_energy(sys.A1, U.u, U.p)
    E2 = component_energy(sys.A2, U.v, U.q)
    w1, w2, c = sys.energy_weights
    E = w1 * E1 + w2 * E2 + c * sys.space.inner(U.u, U.v)
    return E, E1, E2


def energy_product(sys: CoupledSystem, U: State, V: State) -> float:
    return float(U.as_vector() @ (sys.gram_matrix @ V.as_vector()))


def energy_norm(sys: CoupledSystem, U: State) -> float:
    return float(np.sqrt(max(energy_product(sys, U, U), 0.0)))


# --------------------------------------------------------------------------
# generator


def generator_apply(sys: CoupledSystem, U: State) -> State:
    return State(
        U.p.copy(),
        -sys.A1.matrix @ U.u - sys.B.matrix @ U.p - sys.alpha1 * U.v,
        U.q.copy(),
        -sys.A2.matrix @ U.v - sys.alpha2 * U.u,
    )


def generator_inverse(sys: CoupledSystem, W: State) -> State:
    """Solve ``A U = W`` by eliminating ``v`` through a Schur complement."""
    p, q = W.u.copy(), W.v.copy()
    F = -W.p - sys.B.matrix @ W.u
    G = -W.q
    A2_inv = sys._A2_inv
    u = scipy.linalg.cho_solve(sys._schur_factor, F - sys.alpha1 * (A2_inv @ G))
    v = A2_inv @ (G - sys.alpha2 * u)
    return State(u, p, v, q)


def _oriented_modes(op: SelfAdjointOperator, count: int) -> Array:
    V = np.array(op.eigenvectors[:, :count])
    for k in range(V.shape[1]):
        col = V[:, k]
        ref = col[0]
        if abs(ref) < 1e-8 * np.abs(col).max():
            ref = col[np.argmax(np.abs(col))]
        if ref < 0:
            V[:, k] = -col
    return V


PREPARED_MODES = 12


def random_state(sys: CoupledSystem, seed: int, modes: int = PREPARED_MODES) -> State:
    """Pseudo-random state with unit energy norm, spread over the lowest modes.

    Each component is expanded in the eigenbasis of its own operator with
    Gaussian coefficients damped like ``1/k``; displacements are further scaled
    by ``mu_k**-1/2`` so every mode carries comparable energy.  The same seed
    gives the same continuum profile on every grid.
    """
    rng = np.random.default_rng(seed)
    K = min(modes, sys.n)
    g = rng.standard_normal((4, modes))[:, :K]
    decay = 1.0 / np.arange(1, K + 1)
    V1 = _oriented_modes(sys.A1, K)
    V2 = _oriented_modes(sys.A2, K)
    mu1 = sys.A1.eigenvalues[:K]
    mu2 = sys.A2.eigenvalues[:K]
    R = State(
        V1 @ (g[0] * decay / np.sqrt(mu1)),
        V1 @ (g[1] * decay),
        V2 @ (g[2] * decay / np.sqrt(mu2)),
        V2 @ (g[3] * decay),
    )
    return (1.0 / energy_norm(sys, R)) * R


def prepared_state(sys: CoupledSystem, m: int, seed: int) -> State:
    """``A^-m R`` for a random unit state ``R``, rescaled to unit energy."""
    if m < 0:
        raise ValueError(f"smoothness m must be nonnegative, got {m}")
    U = random_state(sys, seed)
    for _ in range(m):
        U = generator_inverse(sys, U)
    E = total_energy(sys, U)[0]
    return (1.0 / np.sqrt(E)) * U


def generic_state(sys: CoupledSystem, rng: np.random.Generator) -> State:
    """Unstructured random state: iid Gaussian nodal values in every component."""
    n = sys.n
    return State(*(rng.standard_normal(n) for _ in range(4)))


# --------------------------------------------------------------------------
# graph and interpolation norms


def _power_norm_sq(op: SelfAdjointOperator, x: Array, s: float) -> float:
    c = op.coefficients(x)
    return float(np.sum(op.eigenvalues ** (2 * s) * c**2))


def graph_norms(sys: CoupledSystem, U: State, k: int, theta: float) -> tuple[float, float]:
    """Squared norms of ``U`` in D(A^k) and in the product space H_{k,theta}.

    The first value is ``sum_{i<=k} 2 E(A^i U)``; the second is
    ``|A1^{(1+k theta)/2} u|^2 + |A1^{k theta/2} p|^2`` plus the same for
    ``(v, q)`` with ``A2``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    graph = 0.0
    W = U
    for i in range(k + 1):
        if i:
            W = generator_apply(sys, W)
        graph += 2.0 * total_energy(sys, W)[0]
    s = k * theta / 2.0
    comp = (
        _power_norm_sq(sys.A1, U.u, 0.5 + s)
        + _power_norm_sq(sys.A1, U.p, s)
        + _power_norm_sq(sys.A2, U.v, 0.5 + s)
        + _power_norm_sq(sys.A2, U.q, s)
    )
    return graph, comp


def derivative_energies(sys: CoupledSystem, U: State, kmax: int) -> list[float]:
    """``[E(U), E(A U), ..., E(A^kmax U)]``."""
    out = []
    W = U
    for k in range(kmax + 1):
        if k:
            W = generator_apply(sys, W)
        out.append(total_energy(sys, W)[0])
    return out


# --------------------------------------------------------------------------
# compatibility constants


def compat_constants(A1: SelfAdjointOperator, A2: SelfAdjointOperator) -> dict[str, float]:
    """Norms of A1^{1/2} A2^{-1} and A1 A2^{-j/2} for j = 2, 3, 4.

    For even ``j`` with ``A1`` close to ``A2^{j/2}`` the product is evaluated
    as ``I + (A1 - A2^{j/2}) A2^{-j/2}``. That is the same operator, free of
    cancellation, and exact when ``A1`` is a matrix power of ``A2``.
    """
    space = A1.space
    out = {"kappa_half": op_norm(frac_power(A1, 0.5) @ frac_power(A2, -1), space, space)}
    eye = np.eye(A1.dim)
    for j in KAPPA_POWERS:
        inv = frac_power(A2, -j / 2)
        M = A1.matrix @ inv
        if j % 2 == 0:
            defect = A1.matrix - np.linalg.matrix_power(A2.matrix, j // 2)
            if np.linalg.norm(defect) < np.linalg.norm(A1.matrix):
                M = eye + defect @ inv
        out[f"kappa_{j}"] = op_norm(M, space, space)
    return out


def coupling_quotient(A1: SelfAdjointOperator, A2: SelfAdjointOperator, u: Array, v: Array) -> float:
    """|<A1 u, v>| / (|A2 v| <A1 u, u>^{1/2})."""
    sp = A1.space
    num = abs(sp.inner(A1.matrix @ u, v))
    den = sp.norm(A2.matrix @ v) * np.sqrt(sp.inner(A1.matrix @ u, u))
    return float(num / den)


def classify_kappa(table: dict[int, dict[str, float]]) -> tuple[list[str], str]:
    ns = sorted(table)
    flags: list[str] = []
    halves = [table[n]["kappa_half"] for n in ns]
    half_bounded = max(halves) / min(halves) <= HALF_BOUNDED_FACTOR
    if half_bounded:
        flags.append("half-power-bounded")
    violated, bounded = [], []
    for j in KAPPA_POWERS:
        vals = [table[n][f"kappa_{j}"] for n in ns]
        monotone = all(b > a for a, b in zip(vals, vals[1:]))
        if len(vals) > 1 and monotone and vals[-1] / vals[0] >= POWER_GROWTH_FACTOR:
            violated.append(j)
            flags.append(f"integer-power-violated({j})")
        elif max(vals) / min(vals) <= HALF_BOUNDED_FACTOR:
            bounded.append(j)
    if half_bounded and bounded:
        label = f"both(j={min(bounded)})"
    elif half_bounded:
        label = "hybrid"
    elif bounded:
        label = f"integer-power-only(j={min(bounded)})"
    else:
        label = "neither"
    return flags, label


def hypotheses_report(sys: CoupledSystem) -> HypothesesReport:
    w1, w2 = sys.A1.omega, sys.A2.omega
    bound = np.sqrt(w1 * w2)
    size = np.sqrt(abs(sys.alpha1 * sys.alpha2))
    kap = compat_constants(sys.A1, sys.A2)
    alpha_ok = 0 < size < bound and (sys.symmetric or sys.alpha1 * sys.alpha2 > 0)
    return HypothesesReport(
        omega1=float(w1),
        omega2=float(w2),
        beta=float(sys.B.beta),
        alpha1=sys.alpha1,
        alpha2=sys.alpha2,
        alpha_ok=bool(alpha_ok),
        alpha_margin=float(bound - size),
        nu_alpha=float(1.0 - size / bound),
        kappa_half=kap["kappa_half"],
        kappa_j={j: kap[f"kappa_{j}"] for j in KAPPA_POWERS},
        kappa_table={sys.n: kap},
    )


def kappa_ladder(spec1: OperatorSpec, spec2: OperatorSpec, ns: Sequence[int]) -> dict[int, dict[str, float]]:
    table = {}
    for n in ns:
        A1 = make_operator(spec1.with_n(n))
        A2 = make_operator(spec2.with_n(n))
        table[int(n)] = compat_constants(A1, A2)
    return table


def check_hypotheses(sys: CoupledSystem, ns: Sequence[int] = ()) -> HypothesesReport:
    """Hypotheses report with a kappa scaling table over the grid ladder ``ns``.

    Without catalog specs on the system only its own grid size is tabulated.
    """
    rep = hypotheses_report(sys)
    if sys.specs is not None and ns:
        table = kappa_ladder(sys.specs[0], sys.specs[1], ns)
    else:
        table = dict(rep.kappa_table)
    rep.kappa_table = table
    rep.flags, rep.classification = classify_kappa(table) if len(table) > 1 else ([], "")
    return rep

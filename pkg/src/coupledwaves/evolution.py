"""Time evolution of U' = A U and energy bookkeeping along trajectories."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg

from .coupled_system import CoupledSystem, State, assemble, total_energy
from .linalg_spectral import Array, SelfAdjointOperator

CONDITION_LIMIT = 1e12
TRACE_HEADER = "t,E_total,E1,E2,dissipated,residual"


class DefectiveSpectrumWarning(RuntimeWarning):
    pass


class ProbeDataError(ValueError):
    pass


def _phi(z: Array, t: float) -> Array:
    """(exp(z t) - 1) / z, continuous at z = 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z * t) < 1e-8
    out[small] = t * (1.0 + 0.5 * z[small] * t)
    zs = z[~small]
    out[~small] = np.expm1(zs * t) / zs
    return out


class Propagator:
    """Exact semigroup ``exp(t A)`` from one eigendecomposition.

    The generator is diagonalized in energy-orthonormal coordinates
    ``y = R U`` (``R^T R`` the Gram matrix), where it is a skew matrix minus
    a positive semidefinite damping block; this keeps the eigenvector basis
    close to unitary.
    """

    def __init__(self, sys: CoupledSystem):
        self.sys = sys
        G = sys.gram_matrix
        R = scipy.linalg.cholesky(0.5 * (G + G.T), lower=False)
        RM = R @ sys.generator_matrix
        K = scipy.linalg.solve_triangular(R, RM.T, trans="T", lower=False).T
        lam, Y = scipy.linalg.eig(K)
        self.R = R
        self.eigenvalues = lam
        self.modes = Y
        self.condition = float(np.linalg.cond(Y))
        self._Z = scipy.linalg.solve_triangular(R, Y, lower=False)
        self._lu = scipy.linalg.lu_factor(Y)

    @property
    def defective(self) -> bool:
        return not np.isfinite(self.condition) or self.condition > CONDITION_LIMIT

    def coefficients(self, U0: State) -> Array:
        return scipy.linalg.lu_solve(self._lu, (self.R @ U0.as_vector()).astype(complex))

    def states(self, c: Array, times: Array, rows: slice = slice(None)) -> Array:
        """Rows of the state vectors at ``times`` (shape ``len(times) x rows``)."""
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, self._Z[rows].shape[0]))
        step = 4096
        for start in range(0, times.size, step):
            chunk = times[start : start + step]
            E = np.exp(np.outer(self.eigenvalues, chunk)) * c[:, None]
            out[start : start + step] = (self._Z[rows] @ E).real.T
        return out

    def quadratic_integral(self, c: Array, Q: Array, T: float, rows: slice = slice(None)) -> float:
        """Exact value of int_0^T x(t)^T Q x(t) dt for x = selected rows of U(t)."""
        Z = self._Z[rows]
        P = Z.conj().T @ (Q @ Z)
        z = self.eigenvalues.conj()[:, None] + self.eigenvalues[None, :]
        val = np.sum(c.conj()[:, None] * P * c[None, :] * _phi(z, T))
        return float(val.real)


@lru_cache(maxsize=16)
def propagator(sys: CoupledSystem) -> Propagator:
    return Propagator(sys)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: Array
    states: Array
    integrator: str
    step: float | None = None
    coefficients: Array | None = None

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int) -> State:
        return State.from_vector(self.states[i])


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    times: Array
    E_total: Array
    E1: Array
    E2: Array
    dissipated: Array
    identity_residual: Array

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        cols = (self.times, self.E_total, self.E1, self.E2, self.dissipated, self.identity_residual)
        for row in zip(*cols):
            buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
        return buf.getvalue()


def _check_times(times: Sequence[float]) -> Array:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a nonempty 1D sequence")
    if t[0] < 0:
        raise ValueError("times must be nonnegative")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly ascending")
    return t


def evolve_exact(sys: CoupledSystem, U0: State, times: Sequence[float]) -> Trajectory:
    t = _check_times(times)
    prop = propagator(sys)
    if prop.defective:
        warnings.warn(
            f"eigenvector condition number {prop.condition:.2e} exceeds "
            f"{CONDITION_LIMIT:.0e}; falling back to implicit midpoint",
            DefectiveSpectrumWarning,
            stacklevel=2,
        )
        return _midpoint_at(sys, U0, t)
    c = prop.coefficients(U0)
    X = prop.states(c, t)
    if t[0] == 0.0:
        X[0] = U0.as_vector()
    return Trajectory(t, X, "exact", None, c)


def _midpoint_factor(sys: CoupledSystem, dt: float):
    M = sys.generator_matrix
    eye = np.eye(M.shape[0])
    try:
        lu = scipy.linalg.lu_factor(eye - 0.5 * dt * M, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ArithmeticError(f"implicit midpoint factorization failed: {exc}") from exc
    return lu, eye + 0.5 * dt * M


def evolve_midpoint(sys: CoupledSystem, U0: State, dt: float, T: float) -> Trajectory:
    """Implicit midpoint (Crank-Nicolson) steps of size ``dt`` up to ``T``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T = {T} is not an integer multiple of dt = {dt}")
    lu, P = _midpoint_factor(sys, dt)
    X = np.empty((steps + 1, 4 * sys.n))
    X[0] = U0.as_vector()
    for k in range(steps):
        X[k + 1] = scipy.linalg.lu_solve(lu, P @ X[k])
    return Trajectory(dt * np.arange(steps + 1), X, "implicit-midpoint", dt)


def _midpoint_at(sys: CoupledSystem, U0: State, t: Array, max_dt: float = 0.01) -> Trajectory:
    out = np.empty((t.size, 4 * sys.n))
    x = U0.as_vector()
    prev = 0.0
    cache: dict[float, tuple] = {}
    for i, ti in enumerate(t):
        span = ti - prev
        if span > 0:
            k = int(np.ceil(span / max_dt))
            dt = span / k
            key = round(dt, 15)
            if key not in cache:
                cache[key] = _midpoint_factor(sys, dt)
            lu, P = cache[key]
            for _ in range(k):
                x = scipy.linalg.lu_solve(lu, P @ x)
        out[i] = x
        prev = ti
    return Trajectory(t, out, "implicit-midpoint", max_dt)


# --------------------------------------------------------------------------
# energy traces


def energy_arrays(sys: CoupledSystem, X: Array) -> tuple[Array, Array, Array]:
    """Vectorized ``total_energy`` over the rows of ``X``."""
    n, h = sys.n, sys.space.weight
    u, p, v, q = X[:, :n], X[:, n : 2 * n], X[:, 2 * n : 3 * n], X[:, 3 * n :]
    E1 = 0.5 * h * (np.einsum("ti,ti->t", u @ sys.A1.matrix, u) + np.einsum("ti,ti->t", p, p))
    E2 = 0.5 * h * (np.einsum("ti,ti->t", v @ sys.A2.matrix, v) + np.einsum("ti,ti->t", q, q))
    w1, w2, c = sys.energy_weights
    E = w1 * E1 + w2 * E2 + c * h * np.einsum("ti,ti->t", u, v)
    return E, E1, E2


def dissipation_rate(sys: CoupledSystem, P: Array) -> Array:
    """``w |B^{1/2} p|^2`` for each row of velocities ``P`` (w: energy weight of E1)."""
    h = sys.space.weight
    return sys.dissipation_weight * h * np.einsum("ti,ti->t", P @ sys.B.matrix, P)


def _adaptive_trapezoid(
    sys: CoupledSystem,
    traj: Trajectory,
    rates: Array,
    tol: float,
    max_level: int,
) -> Array:
    """Per-interval integrals of the dissipation rate.

    Each sample interval starts from its two-point trapezoid; panels are
    halved with intermediate states from the exact propagator and the
    trapezoid sequence is Richardson-extrapolated (Romberg).  An interval is
    frozen once its extrapolated value has moved by less than its share of
    ``tol`` on two consecutive refinements.
    """
    prop = propagator(sys)
    n = sys.n
    rows = slice(n, 2 * n)
    t = traj.times
    dt = np.diff(t)
    trap = 0.5 * dt * (rates[:-1] + rates[1:])
    table = [trap.copy()]
    est = trap.copy()
    quiet = np.zeros(dt.size, dtype=int)
    active = np.arange(dt.size)
    span = t[-1] - t[0]
    for level in range(max_level):
        if not active.size:
            break
        panels = 2**level
        h_new = dt[active] / (2 * panels)
        offsets = (2 * np.arange(panels) + 1)[None, :] * h_new[:, None]
        pts = (t[active][:, None] + offsets).ravel()
        P = prop.states(traj.coefficients, pts, rows)
        vals = dissipation_rate(sys, P).reshape(active.size, panels)
        trap[active] = 0.5 * trap[active] + h_new * vals.sum(axis=1)
        row = [trap.copy()]
        for k, prev in enumerate(table, start=1):
            row.append(row[k - 1] + (row[k - 1] - prev) / (4**k - 1))
        table = row
        change = np.abs(table[-1][active] - est[active])
        est[active] = table[-1][active]
        local_tol = tol * dt[active] / span
        quiet[active] = np.where(change <= local_tol, quiet[active] + 1, 0)
        active = active[quiet[active] < 2]
    return est


def energy_trace(
    sys: CoupledSystem,
    traj: Trajectory,
    *,
    rtol: float = 1e-9,
    max_level: int = 10,
) -> EnergyTrace:
    """Energies along ``traj`` and the running balance of the dissipation law.

    ``dissipated`` is the running integral of ``|B^{1/2} p|^2``.  For exact
    trajectories it is computed by trapezoidal sums refined adaptively with
    Romberg extrapolation (the exact propagator supplies intermediate states)
    until every sample interval has settled to ``rtol * E(0)``.  For implicit-midpoint trajectories the
    rate is evaluated at step midpoints, which is the integrator's own exact
    discrete energy balance.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    X = traj.states
    E, E1, E2 = energy_arrays(sys, X)
    n = sys.n
    w = sys.dissipation_weight
    if len(traj) == 1:
        zero = np.zeros(1)
        return EnergyTrace(traj.times, E, E1, E2, zero, zero.copy())
    P = X[:, n : 2 * n]
    if traj.integrator == "exact" and traj.coefficients is not None:
        rates = dissipation_rate(sys, P)
        pieces = _adaptive_trapezoid(sys, traj, rates, rtol * max(E[0], 1e-300), max_level)
    else:
        mids = 0.5 * (P[:-1] + P[1:])
        pieces = np.diff(traj.times) * dissipation_rate(sys, mids)
    weighted = np.concatenate([[0.0], np.cumsum(pieces)])
    dissipated = weighted / w if w else weighted
    residual = np.abs(E - E[0] + weighted)
    return EnergyTrace(traj.times, E, E1, E2, dissipated, residual)


def energy_integral(sys: CoupledSystem, U0: State, T: float) -> float:
    """Exact ``int_0^T E(U(t)) dt`` from the modal expansion."""
    prop = propagator(sys)
    c = prop.coefficients(U0)
    return 0.5 * prop.quadratic_integral(c, sys.gram_matrix, T)


def dissipated_exact(sys: CoupledSystem, U0: State, T: float) -> float:
    """Exact ``int_0^T |B^{1/2} p|^2 dt`` (unweighted) from the modal expansion."""
    prop = propagator(sys)
    c = prop.coefficients(U0)
    n = sys.n
    Q = sys.space.weight * sys.B.matrix
    return prop.quadratic_integral(c, Q, T, rows=slice(n, 2 * n))


def default_sample_times(T: float, samples: int = 400, tail: int = 200) -> Array:
    """Uniform grid of ``samples`` points on [0, T] merged with a log-spaced tail."""
    uniform = np.linspace(0.0, T, samples)
    geo = np.geomspace(min(1.0, T / 10), T, tail)
    return np.unique(np.concatenate([uniform, geo]))


# --------------------------------------------------------------------------
# one-way coupling probe


@dataclass(frozen=True, eq=False)
class ProbeResult:
    times: Array
    E_v2: Array
    E_total: Array

    @property
    def drift(self) -> float:
        E0 = self.E_v2[0]
        if E0 == 0:
            return float(np.abs(self.E_v2).max())
        return float(np.abs(self.E_v2 - E0).max() / E0)


def conservation_probe(
    A: SelfAdjointOperator,
    beta: float,
    alpha2: float,
    U0: State,
    times: Sequence[float],
    tol: float = 1e-10,
) -> ProbeResult:
    """Evolve the one-way coupled system and track the energy of v off the first eigenspace.

    The damped equation ``u'' + A u + 2 beta u' = 0`` does not feel ``v``;
    ``v'' + A v + alpha2 u = 0`` is forced only inside the first eigenspace
    when the ``u`` data lie there, so the part of ``v`` orthogonal to it keeps
    its energy.
    """
    e1 = A.eigenvectors[:, 0]
    sp = A.space

    def off(x: Array) -> float:
        return sp.norm(x - sp.inner(x, e1) * e1)

    def along(x: Array) -> float:
        return abs(sp.inner(x, e1))

    scale = max(1.0, *(sp.norm(x) for x in (U0.u, U0.p, U0.v, U0.q)))
    if max(along(U0.v), along(U0.q)) > tol * scale:
        raise ProbeDataError("v-data must be orthogonal to the first eigenspace")
    if max(off(U0.u), off(U0.p)) > tol * scale:
        raise ProbeDataError("u-data must lie in the first eigenspace")
    sys = assemble(A, A, 2.0 * beta, 0.0, alpha2, diagnostic=True)
    traj = evolve_exact(sys, U0, times)
    n = sys.n
    V = traj.states[:, 2 * n : 3 * n]
    Q = traj.states[:, 3 * n :]
    h = sp.weight
    V2 = V - np.outer(h * (V @ e1), e1)
    Q2 = Q - np.outer(h * (Q @ e1), e1)
    Ev2 = 0.5 * h * (np.einsum("ti,ti->t", V2 @ A.matrix, V2) + np.einsum("ti,ti->t", Q2, Q2))
    E, _, _ = energy_arrays(sys, traj.states)
    return ProbeResult(traj.times, Ev2, E)


def trace_is_monotone(trace: EnergyTrace, rtol: float = 1e-10) -> bool:
    E = trace.E_total
    return bool(np.all(np.diff(E) <= rtol * E[0]))


def state_energy(sys: CoupledSystem, U: State) -> float:
    return total_energy(sys, U)[0]


def probe_state(A: SelfAdjointOperator, seed: int = 0) -> State:
    """Admissible data for :func:`conservation_probe`.

    ``u`` and ``u'`` are random multiples of the first eigenvector, ``v``
    is the second eigenvector and ``v' = 0``.
    """
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(2)
    e1, e2 = A.eigenvectors[:, 0], A.eigenvectors[:, 1]
    return State(a * e1, b * e1, e2.copy(), np.zeros(A.dim))

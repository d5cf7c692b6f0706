"""Decay-rate fits, decay-bound constants and interpolation norms."""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.integrate
import scipy.optimize
from scipy.special import expit

from .coupled_system import (
    CoupledSystem,
    State,
    classify_kappa,
    derivative_energies,
    graph_norms,
    kappa_ladder,
)
from .evolution import EnergyTrace, energy_integral
from .linalg_spectral import Array, SelfAdjointOperator, frac_power
from .operators1d import OperatorSpec

MIN_FIT_SAMPLES = 8
KAPPA_CSV_HEADER = "n,kappa_half,kappa_2,kappa_3,kappa_4"
C1_CSV_HEADER = "T,c1"


class InsufficientDataError(ValueError):
    pass


class DegenerateNormError(ValueError):
    pass


# --------------------------------------------------------------------------
# decay fits and constants


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    residual: float  # RMS of the log-log residuals
    samples: int
    window: tuple[float, float]


def default_window(trace: EnergyTrace) -> tuple[float, float]:
    T = float(trace.times[-1])
    return (T / 10.0, T)


def fit_decay_rate(trace: EnergyTrace, window: Sequence[float] | None = None) -> DecayFit:
    """Least-squares slope of ``log E`` against ``log t`` on ``window``."""
    lo, hi = default_window(trace) if window is None else (float(window[0]), float(window[1]))
    t = trace.times
    if lo <= 0 or hi <= lo:
        raise ValueError(f"invalid window [{lo}, {hi}]")
    if lo < t[0] or hi > t[-1] * (1 + 1e-12):
        raise ValueError(f"window [{lo}, {hi}] is outside the trace [{t[0]}, {t[-1]}]")
    mask = (t >= lo) & (t <= hi)
    count = int(mask.sum())
    if count < MIN_FIT_SAMPLES:
        raise InsufficientDataError(
            f"{count} samples in window, at least {MIN_FIT_SAMPLES} required"
        )
    E = trace.E_total[mask]
    if np.any(E <= 0):
        raise ValueError("energy must be positive on the fit window")
    x, y = np.log(t[mask]), np.log(E)
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DecayFit(float(slope), float(intercept), rms, count, (lo, hi))


NORMS = ("graph", "component", "interp")


def initial_norm_sq(sys: CoupledSystem, U0: State, norm: str = "graph", k: int = 1,
                    theta: float = 1.0) -> float:
    """Squared norm of the data.

    ``graph`` is the graph norm of D(A^k). ``component`` is the product norm
    of ``H_{k,theta}`` built from fractional powers of ``A1`` and ``A2``;
    ``interp`` is an alias for it, used as the computable stand-in for the
    interpolation space between the energy space and D(A^k).
    """
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}; choose from {NORMS}")
    graph, comp = graph_norms(sys, U0, k, theta)
    return graph if norm == "graph" else comp


def decay_bound_constant(
    sys: CoupledSystem,
    trace: EnergyTrace,
    U0: State,
    r: float,
    norm: str = "graph",
    *,
    k: int = 1,
    theta: float = 1.0,
) -> float:
    """``sup t^r E(t) / |U0|^2`` over the sampled ``t`` in [1, T]."""
    nsq = initial_norm_sq(sys, U0, norm, k, theta)
    if not nsq > 0:
        raise DegenerateNormError("initial data has zero norm")
    t = trace.times
    mask = t >= 1.0
    if not mask.any():
        raise InsufficientDataError("trace has no samples with t >= 1")
    vals = t[mask] ** r * trace.E_total[mask] / nsq
    return float(vals.max())


@dataclass
class C1Curve:
    T: Array
    c1: Array
    denominator: float
    saturation: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(C1_CSV_HEADER + "\n")
        for T, c in zip(self.T, self.c1):
            buf.write(f"{T:.17g},{c:.17g}\n")
        return buf.getvalue()


def derivative_energy_sum(sys: CoupledSystem, U0: State, kmax: int = 4) -> float:
    return float(sum(derivative_energies(sys, U0, kmax)))


def integral_inequality_constant(
    sys: CoupledSystem, U0: State, T_grid: Iterable[float], K: int = 4
) -> C1Curve:
    """Ratio of the exact energy integral over [0, T] to the sum of ``E(A^k U0)``, k <= K."""
    T = np.unique(np.asarray(list(T_grid), dtype=float))
    if T.size == 0 or T[0] <= 0:
        raise ValueError("T grid must contain positive times")
    Tmax = T[-1]
    T = np.unique(np.concatenate([T, [0.5 * Tmax]]))
    denom = derivative_energy_sum(sys, U0, K)
    if not denom > 0:
        raise DegenerateNormError("initial data has zero energy in every derivative")
    c1 = np.array([energy_integral(sys, U0, float(s)) for s in T]) / denom
    half = c1[np.searchsorted(T, 0.5 * Tmax)]
    return C1Curve(T, c1, denom, float(c1[-1] / half))


@dataclass(frozen=True)
class DecayCheck:
    holds: bool
    min_slack: float  # min over t of (bound - E) / bound
    worst_time: float
    n: int
    c: float


def abstract_decay_check(
    trace: EnergyTrace,
    c: float,
    energies: Sequence[float],
    K: int = 4,
    n: int = 1,
    t_range: Sequence[float] | None = None,
) -> DecayCheck:
    """Test ``E(t) <= c^n (1+K)^(n-1) n! t^-n sum_{k<=nK} E(A^k U0)`` on the trace.

    ``energies`` lists ``E(A^k U0)`` for ``k = 0, 1, ...`` and must reach
    ``k = nK``.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if len(energies) < n * K + 1:
        raise InsufficientDataError(
            f"need E(A^k U0) up to k = {n * K}, got {len(energies) - 1}"
        )
    total = float(sum(energies[: n * K + 1]))
    t = trace.times
    lo, hi = (0.0, np.inf) if t_range is None else t_range
    mask = (t > 0) & (t >= lo) & (t <= hi)
    if not mask.any():
        raise InsufficientDataError("no samples in the requested range")
    ts = t[mask]
    bound = c**n * (1 + K) ** (n - 1) * math.factorial(n) * total / ts**n
    slack = (bound - trace.E_total[mask]) / bound
    i = int(np.argmin(slack))
    return DecayCheck(bool(slack[i] >= 0), float(slack[i]), float(ts[i]), n, float(c))


@dataclass
class DecayReport:
    preset: str
    n: int
    fitted_exponent: float | None = None
    fit_residual: float | None = None
    fit_window: tuple[float, float] | None = None
    norm: str = "graph"
    bound_constant: dict[float, float] = field(default_factory=dict)
    c1_curve: C1Curve | None = None
    n_ladder: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "preset": self.preset,
            "n": self.n,
            "fitted_exponent": self.fitted_exponent,
            "fit_residual": self.fit_residual,
            "fit_window": list(self.fit_window) if self.fit_window else None,
            "norm": self.norm,
            "bound_constant": {repr(r): v for r, v in self.bound_constant.items()},
            "n_ladder": {str(k): v for k, v in self.n_ladder.items()},
        }
        if self.c1_curve is not None:
            out["c1_curve"] = {
                "T": self.c1_curve.T.tolist(),
                "c1": self.c1_curve.c1.tolist(),
                "saturation": self.c1_curve.saturation,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# K-functionals and interpolation norms


def _modal(op: SelfAdjointOperator, beta: float, x: Array) -> tuple[Array, Array]:
    if beta <= 0:
        raise ValueError("beta must be positive")
    if op.omega <= 0:
        raise ValueError("operator must be coercive")
    return op.coefficients(np.asarray(x, dtype=float)), op.eigenvalues**beta


def k_functional_quadratic(op: SelfAdjointOperator, beta: float, x: Array, t: float) -> float:
    """``inf_{x=a+b} (|a|^2 + t^2 |A^beta b|^2)^(1/2)``, solved mode by mode."""
    if t <= 0:
        raise ValueError("t must be positive")
    c, d = _modal(op, beta, x)
    return float(np.sqrt(np.sum(c**2 * expit(2.0 * np.log(t * d)))))


def k_functional_exact(op: SelfAdjointOperator, beta: float, x: Array, t: float) -> float:
    """``inf_{x=a+b} |a| + t |A^beta b|``.

    Away from the two endpoints (``b = 0``, ``b = x``) the first-order
    conditions put the minimizer on the curve ``b = (I + g D^2)^{-1} x`` with
    ``D = A^beta``; the scalar ``g`` is found by a 1D search in ``log g``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    c, d = _modal(op, beta, x)
    norm_x = float(np.linalg.norm(c))
    if norm_x == 0:
        return 0.0

    def f(log_g: float) -> float:
        b = c / (1.0 + np.exp(log_g) * d**2)
        return float(np.linalg.norm(c - b) + t * np.linalg.norm(d * b))

    centre = -2.0 * np.log(d).mean()
    grid = np.linspace(centre - 60.0, centre + 60.0, 481)
    vals = np.array([f(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = scipy.optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-12})
    best = min(vals[i], float(res.fun))
    return min(norm_x, t * float(np.linalg.norm(d * c)), best)


@dataclass(frozen=True)
class InterpNorm:
    theta: float
    beta: float
    value_quadrature: float
    value_closed_form: float
    value_fracpower: float
    quadrature_error: float = 0.0

    @property
    def constant(self) -> float:
        return interp_constant(self.theta)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def interp_constant(theta: float) -> float:
    """``sqrt(int_0^inf t^(1-2 theta) / (1 + t^2) dt) = sqrt(pi / (2 sin(pi theta)))``."""
    return math.sqrt(math.pi / (2.0 * math.sin(math.pi * theta)))


def _interp_quadrature(c: Array, d: Array, theta: float) -> tuple[float, float]:
    # substitute t = e^s; each mode contributes exp(-2 theta s) expit(2 (s + log d))
    w = c**2
    keep = w > 0
    if not keep.any():
        return 0.0, 0.0
    w, logd = w[keep], np.log(d[keep])

    def g(s: float) -> float:
        # log-space product so the infinite tails evaluate to 0 instead of inf * 0
        return float(np.dot(w, np.exp(-2.0 * theta * s - np.logaddexp(0.0, -2.0 * (s + logd)))))

    # the integrand of every mode peaks near s = -log d
    lo, hi = float(-logd.max()) - 2.0, float(-logd.min()) + 2.0
    cuts = np.linspace(lo, hi, max(2, int(np.ceil(hi - lo)) + 1))
    total, err = 0.0, 0.0
    pieces = [(-np.inf, cuts[0])] + list(zip(cuts[:-1], cuts[1:])) + [(cuts[-1], np.inf)]
    for a, b in pieces:
        val, e = scipy.integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
        err += e
    return total, err


def interp_norm(op: SelfAdjointOperator, beta: float, theta: float, x: Array) -> InterpNorm:
    """Real-interpolation norm of ``x`` between H and D(A^beta), via the quadratic K-functional."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie strictly between 0 and 1")
    c, d = _modal(op, beta, x)
    sq, err = _interp_quadrature(c, d, theta)
    closed = interp_constant(theta) * math.sqrt(float(np.sum(c**2 * d ** (2.0 * theta))))
    y = frac_power(op, beta * theta) @ np.asarray(x, dtype=float)
    frac = op.space.norm(y)
    q = math.sqrt(sq)
    qerr = err / (2.0 * q) if q > 0 else 0.0
    return InterpNorm(theta, beta, q, closed, frac, qerr)


# --------------------------------------------------------------------------
# compatibility studies


@dataclass
class CompatStudy:
    label: str
    table: dict[int, dict[str, float]]
    classification: str
    flags: list[str]

    def to_csv(self) -> str:
        return kappa_table_csv(self.table)


def kappa_table_csv(table: dict[int, dict[str, float]]) -> str:
    buf = io.StringIO()
    buf.write(KAPPA_CSV_HEADER + "\n")
    cols = KAPPA_CSV_HEADER.split(",")[1:]
    for n in sorted(table):
        buf.write(",".join([str(n)] + [f"{table[n][k]:.17g}" for k in cols]) + "\n")
    return buf.getvalue()


def spec_label(spec: OperatorSpec) -> str:
    bc = spec.bc.left.value if spec.bc.left == spec.bc.right else f"{spec.bc.left.value}-{spec.bc.right.value}"
    shift = f"+{spec.shift:g}" if spec.shift else ""
    return f"{spec.symbol}[{bc}]{shift}"


def compat_scaling_study(
    pairs: Iterable[tuple[OperatorSpec, OperatorSpec]], ns: Sequence[int]
) -> list[CompatStudy]:
    """Kappa tables over the grid ladder ``ns`` and their classification, per pair."""
    out = []
    for s1, s2 in pairs:
        table = kappa_ladder(s1, s2, ns)
        flags, label = classify_kappa(table) if len(table) > 1 else ([], "")
        out.append(CompatStudy(f"{spec_label(s1)}/{spec_label(s2)}", table, label, flags))
    return out

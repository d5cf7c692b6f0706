"""Acceptance suite: one test per numbered criterion, each reporting PASS or FAIL.

The verdict lines are printed live and again in the terminal summary.
"""

import math

import cvxpy as cp
import numpy as np
import pytest

from coupledwaves import cli
from coupledwaves.analysis import (
    abstract_decay_check,
    decay_bound_constant,
    fit_decay_rate,
    integral_inequality_constant,
    interp_constant,
    interp_norm,
    k_functional_exact,
    k_functional_quadratic,
)
from coupledwaves.coupled_system import (
    derivative_energies,
    energy_norm,
    energy_product,
    generator_apply,
    generator_inverse,
    generic_state,
    kappa_ladder,
    prepared_state,
    random_state,
    total_energy,
)
from coupledwaves.evolution import (
    conservation_probe,
    default_sample_times,
    energy_trace,
    evolve_exact,
    evolve_midpoint,
    probe_state,
    trace_is_monotone,
)
from coupledwaves.linalg_spectral import frac_power
from coupledwaves.operators1d import COERCIVE_CATALOG, make_named
from coupledwaves.presets import PRESETS

from conftest import DAMPED_PRESETS, preset_system

VERDICTS: dict[int, str] = {}

UNIFORM_400 = np.linspace(0.0, 100.0, 400)
LADDER = (32, 64, 128)


@pytest.fixture
def verdict(capsys):
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS[number] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


_traces = {}


def uniform_trace(pid):
    if pid not in _traces:
        sys = preset_system(pid)
        U0 = random_state(sys, PRESETS[pid].seed)
        _traces[pid] = energy_trace(sys, evolve_exact(sys, U0, UNIFORM_400))
    return _traces[pid]


def test_criterion_01_dissipation_identity(verdict):
    worst = {pid: float(uniform_trace(pid).identity_residual.max() / uniform_trace(pid).E_total[0])
             for pid in DAMPED_PRESETS}
    pid = max(worst, key=worst.get)
    verdict(1, worst[pid] <= 1e-6, f"max residual/E0 = {worst[pid]:.2e} ({pid}), bound 1e-6")


def test_criterion_02_coercivity(verdict):
    worst, where = math.inf, ""
    for pid in PRESETS:
        sys = preset_system(pid)
        w1, w2, _ = sys.energy_weights
        rng = np.random.default_rng(2)
        for _ in range(1000):
            E, E1, E2 = total_energy(sys, generic_state(sys, rng))
            margin = (E - sys.nu * (w1 * E1 + w2 * E2)) / E
            if margin < worst:
                worst, where = margin, pid
    verdict(2, worst >= -1e-12, f"min (E - nu(E1+E2))/E = {worst:.3e} ({where}), bound -1e-12")


def test_criterion_03_scalar_product(verdict):
    worst, where = 0.0, ""
    for pid in PRESETS:
        sys = preset_system(pid)
        rng = np.random.default_rng(3)
        for _ in range(1000):
            U = generic_state(sys, rng)
            E = total_energy(sys, U)[0]
            err = abs(energy_product(sys, U, U) - 2 * E) / (2 * E)
            if err > worst:
                worst, where = err, pid
    verdict(3, worst <= 1e-12, f"max |(U|U) - 2E|/2E = {worst:.2e} ({where}), bound 1e-12")


def test_criterion_04_generator_inverse(verdict):
    worst, where = 0.0, ""
    for pid in PRESETS:
        sys = preset_system(pid)
        rng = np.random.default_rng(4)
        for _ in range(100):
            W = generic_state(sys, rng)
            err = energy_norm(sys, generator_apply(sys, generator_inverse(sys, W)) - W) / energy_norm(sys, W)
            if err > worst:
                worst, where = err, pid
    verdict(4, worst <= 1e-10, f"max round-trip error = {worst:.2e} ({where}), bound 1e-10")


def test_criterion_05_contraction(verdict):
    traces = {pid: uniform_trace(pid) for pid in PRESETS}
    for pid in DAMPED_PRESETS:
        sys = preset_system(pid)
        U0 = prepared_state(sys, 1, 0)
        traces[f"{pid}/m=1"] = energy_trace(sys, evolve_exact(sys, U0, default_sample_times(400.0)))
    rise = {k: float(np.diff(tr.E_total).max() / tr.E_total[0]) for k, tr in traces.items()}
    bad = {k: v for k, v in rise.items() if not trace_is_monotone(traces[k], rtol=1e-10)}
    detail = ", ".join(f"{k} rises {v:.1e} E0" for k, v in bad.items()) or "none"
    verdict(5, not bad, f"{len(traces)} trajectories, tolerance 1e-10 E0; nonmonotone: {detail}")


def test_criterion_06_compat_classification(verdict):
    from coupledwaves.presets import get_preset

    hybrid = kappa_ladder(*get_preset("ex53").specs(), (32, 64, 128, 256))
    halves = [hybrid[n]["kappa_half"] for n in sorted(hybrid)]
    var_half = max(halves) / min(halves)
    growth_2 = hybrid[256]["kappa_2"] / hybrid[32]["kappa_2"]
    ww = preset_system("ww").report.kappa_j[2]
    ww2 = preset_system("ww2").report.kappa_j[4]
    ok = var_half <= 1.5 and growth_2 >= 2 and abs(ww - 1) <= 1e-8 and abs(ww2 - 1) <= 1e-8
    verdict(6, ok, f"ex53 kappa_half var {var_half:.3f}, kappa_2 growth {growth_2:.2f}; "
                   f"ww kappa_2-1 = {ww - 1:.1e}; ww2 kappa_4-1 = {ww2 - 1:.1e}")


_c1 = {}


def c1_measurement(pid):
    if pid not in _c1:
        sys = preset_system(pid)
        U0 = prepared_state(sys, 4, PRESETS[pid].seed)
        curve = integral_inequality_constant(sys, U0, np.linspace(10.0, 400.0, 40))
        _c1[pid] = (sys, U0, curve)
    return _c1[pid]


def test_criterion_07_integral_inequality(verdict):
    sat = {pid: c1_measurement(pid)[2].saturation for pid in ("ex51a", "ex53", "ww2")}
    pid = max(sat, key=sat.get)
    verdict(7, sat[pid] <= 1.1, "c1(400)/c1(200): " + ", ".join(f"{k} {v:.4f}" for k, v in sat.items()))


def test_criterion_08_decay_bound(verdict):
    rows, failures = [], []
    for pid in DAMPED_PRESETS:
        p = PRESETS[pid]
        r = p.rate
        consts = []
        for n in LADDER:
            sys = preset_system(pid, n)
            U0 = prepared_state(sys, 1, p.seed)
            tr = energy_trace(sys, evolve_exact(sys, U0, default_sample_times(p.T)))
            consts.append(decay_bound_constant(sys, tr, U0, r))
            if n == p.n:
                fit = fit_decay_rate(tr, (10.0, 100.0)).exponent
        spread = max(consts) / min(consts)
        good = all(map(math.isfinite, consts)) and spread <= 2 and fit <= -r
        rows.append(f"{pid} r={r:g} spread {spread:.3f} fit {fit:.2f}")
        if not good:
            failures.append(pid)
    verdict(8, not failures, f"failing: {failures or 'none'} [" + "; ".join(rows) + "]")


def test_criterion_09_abstract_decay(verdict):
    slacks = {}
    for pid in ("ex51a", "ex53", "ww2"):
        sys, U0, curve = c1_measurement(pid)
        tr = energy_trace(sys, evolve_exact(sys, U0, default_sample_times(400.0)))
        res = abstract_decay_check(tr, curve.c1[-1], derivative_energies(sys, U0, 4), K=4, n=1,
                                   t_range=(1.0, 400.0))
        slacks[pid] = res.min_slack
    verdict(9, min(slacks.values()) >= 0, "min slack: " + ", ".join(f"{k} {v:.3f}" for k, v in slacks.items()))


def _k_exact_oracle(op, beta, x, t):
    D = frac_power(op, beta)
    w = math.sqrt(op.space.weight)
    b = cp.Variable(op.dim)
    prob = cp.Problem(cp.Minimize(w * cp.norm(x - b) + t * w * cp.norm(D @ b)))
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def test_criterion_10_interpolation(verdict):
    worst = 0.0
    for name in COERCIVE_CATALOG:
        op = make_named(name, 64)
        rng = np.random.default_rng(10)
        for _ in range(20):
            x = rng.standard_normal(64)
            for beta in (0.5, 1.0):
                for theta in (0.25, 0.5, 0.75):
                    res = interp_norm(op, beta, theta, x)
                    ratio = res.value_quadrature / res.value_fracpower
                    worst = max(worst, abs(ratio / interp_constant(theta) - 1))
    rng = np.random.default_rng(11)
    sandwich_bad, oracle_gap = 0, 0.0
    for k in range(200):
        name = COERCIVE_CATALOG[k % len(COERCIVE_CATALOG)]
        op = make_named(name, 4 + k % 3)
        beta = (0.5, 1.0)[k % 2]
        x = rng.standard_normal(op.dim)
        t = float(10 ** rng.uniform(-3, 1))
        k2 = k_functional_quadratic(op, beta, x, t)
        kx = k_functional_exact(op, beta, x, t)
        oracle = _k_exact_oracle(op, beta, x, t)
        oracle_gap = max(oracle_gap, abs(kx - oracle) / oracle)
        if not (k2 <= kx * (1 + 1e-12) and kx <= math.sqrt(2) * k2 + 1e-8):
            sandwich_bad += 1
    ok = worst <= 1e-6 and sandwich_bad == 0 and oracle_gap <= 1e-5
    verdict(10, ok, f"max ratio error {worst:.1e}; sandwich violations {sandwich_bad}/200; "
                    f"K_exact vs convex solver {oracle_gap:.1e}")


def test_criterion_11_non_stabilizability(verdict):
    sys = preset_system("remark-ii")
    A = sys.A1
    res = conservation_probe(A, PRESETS["remark-ii"].beta / 2, sys.alpha2, probe_state(A, 0),
                             np.linspace(0.0, 100.0, 401))
    ratio = res.E_total[-1] / res.E_v2[0]
    verdict(11, res.drift <= 1e-8 and ratio >= 0.9, f"drift {res.drift:.1e}, E(T)/E_v2(0) = {ratio:.4f}")


def test_criterion_12_asymmetric_dissipation(verdict):
    tr = uniform_trace("asym")
    rel = float(tr.identity_residual.max() / tr.E_total[0])
    verdict(12, rel <= 1e-6, f"max residual/E0 = {rel:.2e} with weight |alpha2| = {abs(preset_system('asym').alpha2):.3f}")


def test_criterion_13_integrator_cross_validation(verdict):
    ratios = {}
    for pid in PRESETS:
        sys = preset_system(pid)
        U0 = prepared_state(sys, 4, 0)
        exact = evolve_exact(sys, U0, [1.0]).state(0)
        e = [energy_norm(sys, evolve_midpoint(sys, U0, dt, 1.0).state(-1) - exact) for dt in (0.02, 0.01)]
        ratios[pid] = e[0] / e[1]
    lo, hi = min(ratios.values()), max(ratios.values())
    verdict(13, 3.5 <= lo and hi <= 4.5, f"error ratio range [{lo:.3f}, {hi:.3f}] over {len(ratios)} presets")


def test_criterion_14_determinism(verdict, tmp_path):
    runs = [
        ["simulate", "--preset", "is1", "--seed", "7"],
        ["decay", "--preset", "ex53", "--n", "32", "--T", "50", "--ladder", "16,32"],
        ["nostab", "--n", "32"],
    ]
    mismatched = []
    for args in runs:
        blobs = []
        for k in range(2):
            out = tmp_path / f"{args[0]}{k}"
            assert cli.main([*args, "--out", str(out)]) == 0
            blobs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        if blobs[0] != blobs[1] or not blobs[0]:
            mismatched.append(args[0])
    verdict(14, not mismatched, f"byte-identical CSV outputs; mismatches: {mismatched or 'none'}")

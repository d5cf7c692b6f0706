"""Command-line front end: run presets, write CSV traces and JSON reports."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis
from .coupled_system import (
    GeneratorInverseError,
    HypothesisError,
    check_hypotheses,
    derivative_energies,
    prepared_state,
)
from .evolution import (
    ProbeDataError,
    conservation_probe,
    default_sample_times,
    energy_trace,
    evolve_exact,
    probe_state,
    trace_is_monotone,
)
from .linalg_spectral import SingularOperatorError, SpectralDomainError, SymmetryError
from .operators1d import UnsupportedOperatorError, make_operator
from .presets import PRESETS, Preset, UnknownPresetError, get_preset

log = logging.getLogger("coupledwaves")

SUBCOMMANDS = ("simulate", "check", "decay", "interp", "compat", "gallery", "nostab")
SUMMARY_HEADER = ["preset", "n", "alpha", "kappa_class", "residual", "fit_r", "bound_c"]
N_RANGE = (8, 512)
T_MAX = 1e4
DEFAULT_LADDER = (32, 64, 128)
COMPAT_LADDER = (32, 64, 128, 256)
C1_SMOOTHNESS = 4

_INT_KEYS = ("n", "m", "seed")
_FLOAT_KEYS = ("T", "alpha_frac")
_STR_KEYS = ("preset", "out", "ladder")
CONFIG_KEYS = _INT_KEYS + _FLOAT_KEYS + _STR_KEYS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    preset: str = "ex53"
    n: int | None = None
    T: float | None = None
    alpha_frac: float | None = None
    m: int | None = None
    seed: int | None = None
    out: str = "out"
    ladder: tuple[int, ...] | None = None

    def resolve(self, p: Preset) -> "RunConfig":
        """Fill unset values from the preset defaults."""
        return replace(
            self,
            n=p.n if self.n is None else self.n,
            T=p.T if self.T is None else self.T,
            alpha_frac=p.alpha_frac if self.alpha_frac is None else self.alpha_frac,
            m=p.m if self.m is None else self.m,
            seed=p.seed if self.seed is None else self.seed,
        )


def _parse_ladder(text: str) -> tuple[int, ...]:
    try:
        ns = tuple(int(s) for s in text.replace(" ", "").split(",") if s)
    except ValueError:
        raise ConfigError(f"ladder must be a comma-separated list of integers, got {text!r}")
    if not ns:
        raise ConfigError("ladder is empty")
    for n in ns:
        _check_n(n, "ladder")
    return ns


def _check_n(n: int, where: str = "n") -> None:
    if not N_RANGE[0] <= n <= N_RANGE[1]:
        raise ConfigError(f"{where}: n = {n} outside [{N_RANGE[0]}, {N_RANGE[1]}]")


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {cfg.subcommand!r}")
    if cfg.preset not in PRESETS:
        raise ConfigError(f"unknown preset {cfg.preset!r}; known: {', '.join(PRESETS)}")
    if cfg.n is not None:
        _check_n(cfg.n)
    if cfg.T is not None and not 0 < cfg.T <= T_MAX:
        raise ConfigError(f"T = {cfg.T} outside (0, {T_MAX:g}]")
    if cfg.alpha_frac is not None and not 0 < cfg.alpha_frac < 1:
        raise ConfigError(
            f"alpha-frac = {cfg.alpha_frac} outside (0, 1): the coupling bound would fail"
        )
    if cfg.m is not None and cfg.m < 0:
        raise ConfigError(f"m = {cfg.m} must be nonnegative")
    if cfg.seed is not None and cfg.seed < 0:
        raise ConfigError(f"seed = {cfg.seed} must be nonnegative")
    return cfg


def read_config_file(path: str | os.PathLike, subcommand: str) -> dict:
    """Values from a ``key = value`` file.

    Keys before any header or under ``[run]`` apply to every subcommand; a
    section named after the subcommand overrides them.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    # keys before the first header belong to [run]
    first = next((ln.strip() for ln in lines if ln.strip() and ln.strip()[0] not in "#;"), "")
    offset = 0 if first.startswith("[") else 1
    if offset:
        lines.insert(0, "[run]")
    try:
        parser.read_string("\n".join(lines), source=str(path))
    except configparser.ParsingError as exc:
        where = ", ".join(f"line {ln - offset}: {text}" for ln, text in exc.errors)
        raise ConfigError(f"{path}: cannot parse {where}") from exc
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        at = f" (line {lineno - offset})" if lineno else ""
        raise ConfigError(f"{path}{at}: {exc.message}") from exc
    values: dict[str, str] = {}
    for section in ("run", subcommand):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                key = key.replace("-", "_")
                if key not in CONFIG_KEYS:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                values[key] = raw
    return _convert(values, str(path))


def _convert(raw: dict, origin: str) -> dict:
    out = {}
    for key, val in raw.items():
        if val is None:
            continue
        try:
            if key in _INT_KEYS:
                out[key] = int(val)
            elif key in _FLOAT_KEYS:
                out[key] = float(val)
            elif key == "ladder":
                out[key] = val if isinstance(val, tuple) else _parse_ladder(str(val))
            else:
                out[key] = str(val)
        except ValueError as exc:
            raise ConfigError(f"{origin}: invalid value for {key}: {val!r}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coupledwaves",
        description="Energy decay of coupled wave/plate systems with damping on one component.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "simulate": "evolve prepared data and write the energy trace",
        "check": "coercivity, coupling bound and compatibility constants",
        "decay": "fitted decay exponent, bound constants and integral-inequality curve",
        "interp": "interpolation norms of random vectors for both operators",
        "compat": "compatibility constants over a grid ladder",
        "gallery": "run every preset and write summary.csv",
        "nostab": "one-way coupling probe: energy of v off the first mode",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--preset", default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--T", type=float, default=None)
        sp.add_argument("--alpha-frac", dest="alpha_frac", type=float, default=None)
        sp.add_argument("--m", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--config", default=None)
        if name in ("decay", "compat", "gallery", "check"):
            sp.add_argument("--ladder", default=None, help="comma-separated grid sizes")
    return parser


def parse_config(argv: list[str] | None = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(read_config_file(args.config, args.subcommand))
    flags = {k: getattr(args, k, None) for k in CONFIG_KEYS}
    values.update(_convert({k: v for k, v in flags.items() if v is not None}, "command line"))
    if args.subcommand == "nostab":
        values.setdefault("preset", "remark-ii")
    return validate(RunConfig(subcommand=args.subcommand, **values))


# --------------------------------------------------------------------------
# output


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


# --------------------------------------------------------------------------
# subcommands


def _system(cfg: RunConfig, p: Preset):
    return p.build(cfg.n, cfg.alpha_frac)


def _trace(cfg: RunConfig, sys_):
    U0 = prepared_state(sys_, cfg.m, cfg.seed)
    trace = energy_trace(sys_, evolve_exact(sys_, U0, default_sample_times(cfg.T)))
    return U0, trace


def _safe_fit(trace):
    try:
        return analysis.fit_decay_rate(trace)
    except ValueError as exc:
        log.warning("decay fit skipped: %s", exc)
        return None


def run_simulate(cfg: RunConfig, p: Preset, out: Path) -> dict:
    sys_ = _system(cfg, p)
    _, trace = _trace(cfg, sys_)
    atomic_write(out / "trace.csv", trace.to_csv())
    E0 = float(trace.E_total[0])
    report = {
        "preset": p.id,
        "n": cfg.n,
        "T": cfg.T,
        "m": cfg.m,
        "seed": cfg.seed,
        "alpha1": sys_.alpha1,
        "alpha2": sys_.alpha2,
        "E0": E0,
        "E_final": float(trace.E_total[-1]),
        "max_identity_residual": float(trace.identity_residual.max()),
        "relative_residual": float(trace.identity_residual.max() / E0),
        "monotone": trace_is_monotone(trace),
    }
    atomic_write(out / "report.json", _json(report))
    return report


def run_check(cfg: RunConfig, p: Preset, out: Path) -> dict:
    sys_ = _system(cfg, p)
    rep = check_hypotheses(sys_, cfg.ladder or ())
    data = rep.to_dict()
    data["preset"] = p.id
    data["reference_bounds"] = p.reference_bound(cfg.n)
    data["approximate_realization"] = p.approximate
    atomic_write(out / "report.json", _json(data))
    return data


def run_decay(cfg: RunConfig, p: Preset, out: Path) -> dict:
    sys_ = _system(cfg, p)
    U0, trace = _trace(cfg, sys_)
    fit = _safe_fit(trace)
    report = analysis.DecayReport(p.id, cfg.n)
    if fit is not None:
        report.fitted_exponent, report.fit_residual, report.fit_window = (
            fit.exponent, fit.residual, fit.window,
        )
    report.bound_constant[p.rate] = analysis.decay_bound_constant(sys_, trace, U0, p.rate)
    smooth = prepared_state(sys_, max(cfg.m, C1_SMOOTHNESS), cfg.seed)
    T_grid = np.linspace(cfg.T / 40, cfg.T, 40)
    report.c1_curve = analysis.integral_inequality_constant(sys_, smooth, T_grid)
    for n in cfg.ladder or DEFAULT_LADDER:
        s = p.build(n, cfg.alpha_frac)
        V0, tr = _trace(replace(cfg, n=n), s)
        report.n_ladder[n] = analysis.decay_bound_constant(s, tr, V0, p.rate)
    atomic_write(out / "trace.csv", trace.to_csv())
    atomic_write(out / "c1.csv", report.c1_curve.to_csv())
    data = report.to_dict()
    data["rate"] = p.rate
    atomic_write(out / "report.json", _json(data))
    return data


INTERP_THETAS = (0.25, 0.5, 0.75)
INTERP_BETAS = (0.5, 1.0)


def run_interp(cfg: RunConfig, p: Preset, out: Path) -> dict:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for which, spec in zip(("A1", "A2"), p.specs(cfg.n)):
        op = make_operator(spec)
        x = rng.standard_normal(op.dim)
        for beta in INTERP_BETAS:
            for theta in INTERP_THETAS:
                val = analysis.interp_norm(op, beta, theta, x)
                rows.append({"operator": which, **asdict(val)})
    buf = io.StringIO()
    cols = ["operator", "theta", "beta", "value_quadrature", "value_closed_form", "value_fracpower"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else f"{r[c]:.17g}" for c in cols])
    atomic_write(out / "interp.csv", buf.getvalue())
    data = {"preset": p.id, "n": cfg.n, "norms": rows}
    atomic_write(out / "report.json", _json(data))
    return data


def run_compat(cfg: RunConfig, p: Preset, out: Path) -> dict:
    (study,) = analysis.compat_scaling_study([p.specs(cfg.n)], cfg.ladder or COMPAT_LADDER)
    atomic_write(out / "kappa.csv", study.to_csv())
    data = {
        "preset": p.id,
        "pair": study.label,
        "classification": study.classification,
        "flags": study.flags,
        "kappa_table": {str(n): row for n, row in study.table.items()},
    }
    atomic_write(out / "report.json", _json(data))
    return data


def run_nostab(cfg: RunConfig, p: Preset, out: Path) -> dict:
    if not p.one_way:
        raise ConfigError(f"preset {p.id!r} is not a one-way coupling preset")
    sys_ = _system(cfg, p)
    U0 = probe_state(sys_.A1, cfg.seed)
    times = np.linspace(0.0, cfg.T, 401)
    res = conservation_probe(sys_.A1, p.beta / 2.0, sys_.alpha2, U0, times)
    buf = io.StringIO()
    buf.write("t,E_v2,E_total\n")
    for row in zip(res.times, res.E_v2, res.E_total):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    atomic_write(out / "trace.csv", buf.getvalue())
    data = {
        "preset": p.id,
        "n": cfg.n,
        "T": cfg.T,
        "E_v2_initial": float(res.E_v2[0]),
        "E_v2_drift": res.drift,
        "E_total_final": float(res.E_total[-1]),
        "final_over_E_v2_initial": float(res.E_total[-1] / res.E_v2[0]),
    }
    atomic_write(out / "report.json", _json(data))
    return data


def gallery_row(cfg: RunConfig, p: Preset) -> tuple[list[str], dict]:
    """One summary row for preset ``p`` on grid ``cfg.n``."""
    cfg = cfg.resolve(p)
    sys_ = _system(cfg, p)
    ns = cfg.ladder or tuple(sorted({max(N_RANGE[0], cfg.n // 2), cfg.n, min(N_RANGE[1], 2 * cfg.n)}))
    rep = check_hypotheses(sys_, ns)
    U0, trace = _trace(cfg, sys_)
    fit = _safe_fit(trace)
    residual = float(trace.identity_residual.max() / trace.E_total[0])
    bound = analysis.decay_bound_constant(sys_, trace, U0, p.rate)
    row = [
        p.id,
        str(cfg.n),
        f"{abs(sys_.alpha1 * sys_.alpha2) ** 0.5:.17g}",
        rep.classification,
        f"{residual:.17g}",
        "" if fit is None else f"{fit.exponent:.17g}",
        f"{bound:.17g}",
    ]
    report = rep.to_dict()
    report.update(
        preset=p.id,
        relative_residual=residual,
        fitted_exponent=None if fit is None else fit.exponent,
        bound_constant=bound,
        rate=p.rate,
        diagnostic=p.diagnostic or p.one_way,
    )
    return row, {"trace": trace.to_csv(), "report": _json(report)}


def run_gallery(cfg: RunConfig, out: Path) -> list[list[str]]:
    rows = []
    for pid, p in PRESETS.items():
        log.info("gallery: %s", pid)
        row, files = gallery_row(cfg, p)
        atomic_write(out / pid / "trace.csv", files["trace"])
        atomic_write(out / pid / "report.json", files["report"])
        rows.append(row)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    w.writerows(rows)
    atomic_write(out / "summary.csv", buf.getvalue())
    return rows


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if cfg.subcommand == "gallery":
        run_gallery(cfg, out)
        return 0
    p = get_preset(cfg.preset)
    cfg = cfg.resolve(p)
    handler = {
        "simulate": run_simulate,
        "check": run_check,
        "decay": run_decay,
        "interp": run_interp,
        "compat": run_compat,
        "nostab": run_nostab,
    }[cfg.subcommand]
    handler(cfg, p, out)
    return 0


NUMERICAL_ERRORS = (
    HypothesisError,
    GeneratorInverseError,
    SymmetryError,
    SpectralDomainError,
    SingularOperatorError,
    UnsupportedOperatorError,
    ProbeDataError,
    np.linalg.LinAlgError,
)


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args = sys.argv[1:] if argv is None else argv
    verbose = "-v" in args or "--verbose" in args
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(cfg)
    except (ConfigError, UnknownPresetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

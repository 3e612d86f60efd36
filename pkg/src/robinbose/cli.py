"""Command-line harness: one subcommand per experiment, CSV tables plus a JSON manifest.

Configuration is plain ``key = value`` text (an ``[experiment]`` header is
optional), overridden by ``--set key=value`` flags.  Every run writes
``<command>.csv`` and ``<command>.manifest.json``; ``replay`` re-runs a
manifest and checks the CSV digests.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from robinbose import __version__
from robinbose import correlation, kac, localization
from robinbose.quadrature import QuadratureError
from robinbose.spectral import BoxGeometry, SpectrumError, build_spectrum_1d, spectrum_for
from robinbose.testfunctions import bump, shift
from robinbose.thermo import (
    MODE_TOL,
    ThermoError,
    limit_state,
    mu_asymptotic,
    solve_mu,
)

SCHEMA_VERSION = 1
WORKERS_ENV = "ROBINBOSE_WORKERS"

EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_NUMERIC = 4
EXIT_MISMATCH = 5


class ConfigError(ValueError):
    pass


class ReplayMismatch(RuntimeError):
    pass


# -- parameter schema -------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(v) for v in text.split(",")) if text else ()


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(v) for v in text.split(",")) if text else ()


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any
    help: str = ""


COMMON = {
    "nu": Param(int, 1, "spatial dimension"),
    "sigma": Param(float, -1.0, "boundary parameter, must be negative"),
    "beta": Param(float, 1.0, "inverse temperature"),
    "rho": Param(float, 0.5, "mean density"),
    "mode_tol": Param(float, MODE_TOL, "occupation cutoff for mode enumeration"),
    "spectrum_tol": Param(float, 1e-30, "Boltzmann-factor cutoff for k_max"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "spectrum": {
        "L": Param(float, 10.0),
        "sigma": COMMON["sigma"],
        "k_max": Param(int, 10, "largest one-dimensional mode index"),
    },
    "thermo": {**COMMON, "L_list": Param(_floats, (50.0, 100.0, 200.0, 400.0))},
    "kac": {
        **COMMON,
        "L": Param(float, 40.0),
        "t_max": Param(float, 800.0, "edge of the characteristic-function grid"),
        "n_t": Param(int, 4096),
        "xi_min": Param(float, math.nan, "nan selects rho_c - 1"),
        "xi_max": Param(float, math.nan, "nan selects rho + 8 (rho - rho_c)"),
        "n_xi": Param(int, 2048),
    },
    "genfunc": {
        **COMMON,
        "L_list": Param(_floats, (20.0, 40.0, 80.0)),
        "half_width": Param(float, 1.0, "bump half-width"),
        "shift_a": Param(_floats, (), "homothety scales per axis; empty for no shift"),
        "shift_signs": Param(_ints, (), "+1/-1 per axis; empty means all +1"),
    },
    "localize": {
        **COMMON,
        "L": Param(float, 200.0),
        "n_points": Param(int, 201, "points on the diagonal from the center to the corner"),
    },
    "converge": {
        **COMMON,
        "L_list": Param(_floats, (20.0, 40.0, 80.0)),
        "quantity": Param(str, "gf", "gap_ratio, gf, local_condensate or charfun"),
        "half_width": Param(float, 1.0),
        "t_max": Param(float, 20.0),
        "n_t": Param(int, 161),
    },
}

QUANTITIES = ("gap_ratio", "gf", "local_condensate", "charfun")


@dataclass
class ExperimentConfig:
    command: str
    params: dict[str, Any]
    out_dir: Path = field(default_factory=lambda: Path("."))

    def tolerances(self) -> dict[str, float]:
        return {k: self.params[k] for k in ("mode_tol", "spectrum_tol") if k in self.params}


def _read_config_text(path: Path) -> dict[str, str]:
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        data = data.get("params", data)
        return {k: _unparse(v) for k, v in data.items()}
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    parser.read_string(text)
    out: dict[str, str] = {}
    for section in parser.sections():
        out.update(parser[section])
    return out


def _unparse(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def build_config(command: str, raw: dict[str, str], out_dir: Path | str = ".") -> ExperimentConfig:
    """Type-check ``raw`` against the command schema and enforce physical invariants."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    raw = {k: v for k, v in raw.items() if k != "command"}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(unknown)}")
    params = {}
    for name, p in schema.items():
        if name in raw:
            try:
                params[name] = p.parse(raw[name])
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {raw[name]!r}") from exc
        else:
            params[name] = p.default
    _validate(command, params)
    return ExperimentConfig(command, params, Path(out_dir))


def _validate(command: str, p: dict[str, Any]):
    # geometry first so sigma >= 0 reports the boundary condition, not a size issue
    Ls = p.get("L_list") or (p["L"],)
    nu = p.get("nu", 1)
    if not 1 <= nu <= 3:
        raise ConfigError("nu must be 1, 2 or 3")
    for L in Ls:
        BoxGeometry(nu, L, p["sigma"])
    if "beta" in p and not p["beta"] > 0:
        raise ValueError("beta must be positive")
    if "rho" in p and not p["rho"] > 0:
        raise ValueError("rho must be positive")
    if command == "spectrum" and p["k_max"] < 2:
        raise ConfigError("k_max must be at least 2")
    if command == "converge" and p["quantity"] not in QUANTITIES:
        raise ConfigError(f"quantity must be one of {', '.join(QUANTITIES)}")
    if command == "genfunc" and p["shift_a"]:
        if len(p["shift_a"]) != nu:
            raise ConfigError("shift_a needs one entry per axis")
        if p["shift_signs"] and len(p["shift_signs"]) != nu:
            raise ConfigError("shift_signs needs one entry per axis")
    if command == "kac" and (p["n_t"] < 3 or p["n_xi"] < 1):
        raise ConfigError("grids need at least three t points and one xi point")


# -- experiments ------------------------------------------------------------

Table = tuple[list[str], list[list[Any]]]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


def _map_over_L(fn, p: dict[str, Any], Ls) -> list:
    n = _workers()
    args = [(p, L) for L in Ls]
    if n == 1 or len(args) == 1:
        return [fn(a) for a in args]
    # map keeps config order regardless of completion order
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, args))


def _state(p, L):
    spec = spectrum_for(BoxGeometry(p["nu"], L, p["sigma"]), p["beta"], p["spectrum_tol"])
    return spec, solve_mu(spec, p["nu"], p["beta"], p["rho"], p["mode_tol"])


def run_spectrum(p) -> Table:
    spec = build_spectrum_1d(BoxGeometry(1, p["L"], p["sigma"]), p["k_max"])
    rows = [[k, spec.kinds[k].value, spec.eigenvalues[k], spec.excitations[k],
             spec.wavenumbers[k], spec.norm_constants[k], spec.residuals[k]]
            for k in range(spec.k_max + 1)]
    return ["k", "kind", "eigenvalue", "excitation", "wavenumber", "norm_constant",
            "residual"], rows


def _thermo_row(args):
    p, L = args
    spec, th = _state(p, L)
    rc = th.rho_c
    if p["rho"] > rc:
        mu_as = mu_asymptotic(L, p["beta"], p["rho"], rc, p["nu"], p["sigma"])
        ratio = th.gap * p["beta"] * (p["rho"] - rc) * L ** p["nu"] / 2.0 ** p["nu"]
    else:
        mu_as, ratio = math.nan, math.nan
    return [L, th.mu_bar, th.gap, rc, th.rho_0, th.rho_0_finite, mu_as, ratio, th.residual]


def run_thermo(p) -> Table:
    rows = _map_over_L(_thermo_row, p, p["L_list"])
    return ["L", "mu_bar", "gap", "rho_c", "rho_0", "rho_0_finite", "mu_asymptotic",
            "gap_ratio", "residual"], rows


def run_kac(p) -> Table:
    spec, th = _state(p, p["L"])
    rc = th.rho_c
    law = kac.KacLimitLaw(p["nu"], p["rho"], rc)
    lo = p["xi_min"] if not math.isnan(p["xi_min"]) else rc - 1.0
    excess = max(p["rho"] - rc, 0.1)
    hi = p["xi_max"] if not math.isnan(p["xi_max"]) else p["rho"] + 8.0 * excess
    xi = np.linspace(lo, hi, p["n_xi"])
    sample = kac.sample_charfun(spec, p["nu"], th, p["t_max"], p["n_t"])
    finite = kac.invert_charfun(sample, xi)
    width = kac.taper_width(sample)
    limit_s = kac.invert_charfun(kac.sample_charfun_limit(p["rho"], rc, p["nu"], p["t_max"],
                                                          p["n_t"]), xi)
    if law.is_point_mass:
        closed = np.full(xi.shape, math.nan)
    else:
        closed = law.density(xi)
    rows = [[x, a, b, c, width] for x, a, b, c in zip(xi, finite, closed, limit_s)]
    return ["xi", "finite_density", "limit_density", "limit_density_smoothed",
            "smoothing_width"], rows


def _test_function(p):
    return bump(p["nu"], half_width=p["half_width"])


def _genfunc_row(args):
    p, L = args
    spec, th = _state(p, L)
    f = _test_function(p)
    lim = limit_state(p["beta"], p["rho"], p["sigma"], p["nu"])
    if p["shift_a"]:
        signs = p["shift_signs"] or (1,) * p["nu"]
        fs = shift(f, L, signs, p["shift_a"], p["sigma"])
    else:
        fs = f
    g = correlation.gf_finite(fs, spec, p["nu"], th)
    gv = correlation.gf_value(fs, lim)
    tp = correlation.two_point_finite(fs, spec, p["nu"], th)
    cp = correlation.condensate_part_finite(fs, spec, th)
    chi = "" if gv.chi is None else gv.chi.name.lower()
    return [L, g, gv.value, abs(g - gv.value), tp, cp, gv.quadratic_form,
            gv.condensate_term, chi]


def run_genfunc(p) -> Table:
    rows = _map_over_L(_genfunc_row, p, p["L_list"])
    return ["L", "gf_finite", "gf_limit", "abs_error", "two_point", "condensate_part",
            "quadratic_form_limit", "condensate_term_limit", "chi"], rows


def run_localize(p) -> Table:
    spec, th = _state(p, p["L"])
    r = np.linspace(0.0, 0.5 * p["L"], p["n_points"])
    pts = np.repeat(r[:, None], p["nu"], axis=1)
    prof = localization.density_profile(spec, p["nu"], th, pts)
    header = [f"x_{i + 1}" for i in range(p["nu"])] + ["local_density", "local_condensate"]
    rows = [[*x, d, c] for x, d, c in zip(prof.points, prof.local_density,
                                          prof.local_condensate)]
    return header, rows


def _converge_row(args):
    p, L = args
    spec, th = _state(p, L)
    q, nu = p["quantity"], p["nu"]
    rc = th.rho_c
    if q == "gap_ratio":
        if not p["rho"] > rc:
            raise ValueError("gap_ratio needs rho > rho_c")
        value = th.gap * p["beta"] * (p["rho"] - rc) * L ** nu / 2.0 ** nu
        limit = 1.0
    elif q == "gf":
        f = _test_function(p)
        value = correlation.gf_finite(f, spec, nu, th)
        limit = correlation.gf_value(f, limit_state(p["beta"], p["rho"], p["sigma"], nu)).value
    elif q == "local_condensate":
        x = localization.homothety_point(L, p["sigma"], (1.0,) * nu)
        value = localization.local_condensate_finite(spec, nu, th, x[None, :])[0]
        limit = th.rho_0 * (-p["sigma"]) ** nu
    else:
        t = np.linspace(-p["t_max"], p["t_max"], p["n_t"])
        diff = kac.charfun_finite(spec, nu, th, t) - kac.charfun_limit(t, p["rho"], rc, nu)
        value = float(np.max(np.abs(diff)))
        limit = 0.0
    return [L, value, limit, abs(value - limit)]


def run_converge(p) -> Table:
    rows = _map_over_L(_converge_row, p, p["L_list"])
    return ["L", p["quantity"], "limit", "abs_error"], rows


RUNNERS = {
    "spectrum": run_spectrum,
    "thermo": run_thermo,
    "kac": run_kac,
    "genfunc": run_genfunc,
    "localize": run_localize,
    "converge": run_converge,
}


# -- emission ---------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def format_csv(header: list[str], rows: list[list[Any]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def versions() -> dict[str, str]:
    return {"robinbose": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(config: ExperimentConfig) -> dict[str, Any]:
    """Execute ``config``, write the CSV and manifest, return the manifest."""
    t0 = time.perf_counter()
    header, rows = RUNNERS[config.command](config.params)
    text = format_csv(header, rows)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    csv_name = f"{config.command}.csv"
    (config.out_dir / csv_name).write_text(text)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": config.command,
        "params": {k: _jsonable(v) for k, v in config.params.items()},
        "tolerances": config.tolerances(),
        "outputs": {csv_name: hashlib.sha256(text.encode()).hexdigest()},
        "versions": versions(),
        "wall_time": time.perf_counter() - t0,
    }
    (config.out_dir / f"{config.command}.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def replay(manifest_path: Path, out_dir: Path) -> dict[str, Any]:
    old = json.loads(Path(manifest_path).read_text())
    if old.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported manifest schema {old.get('schema_version')!r}")
    raw = {k: _unparse(v) for k, v in old["params"].items()}
    new = run(build_config(old["command"], raw, out_dir))
    if new["outputs"] != old["outputs"]:
        raise ReplayMismatch("replayed outputs differ from the manifest digests")
    return new


# -- entry point ------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robinbose", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment",
                            epilog="keys: " + ", ".join(schema))
        sp.add_argument("--config", type=Path, help="key = value file or JSON manifest")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one configuration key")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
    rp = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    rp.add_argument("manifest", type=Path)
    rp.add_argument("--out", type=Path, default=Path("."))
    return ap


def _fail(code: int, kind: str, exc: BaseException) -> int:
    json.dump({"error": kind, "exit_code": code, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "replay":
            manifest = replay(args.manifest, args.out)
        else:
            raw = _read_config_text(args.config) if args.config else {}
            for item in args.overrides:
                key, sep, value = item.partition("=")
                if not sep:
                    raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
                raw[key.strip()] = value.strip()
            manifest = run(build_config(args.command, raw, args.out))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except ReplayMismatch as exc:
        return _fail(EXIT_MISMATCH, "replay_mismatch", exc)
    except (ThermoError, SpectrumError, QuadratureError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", exc)
    except (OSError, configparser.Error, json.JSONDecodeError) as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except ValueError as exc:
        return _fail(EXIT_PHYSICS, "precondition", exc)
    print(json.dumps({"command": manifest["command"], "outputs": manifest["outputs"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

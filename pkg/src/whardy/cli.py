"""Command-line front end.

Exit codes: 0 pass, 1 numerical tolerance failure (a table goes to stderr),
2 precondition or usage error. Every JSON output is written with sorted keys
and no timestamps, so identical configurations give identical bytes.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from importlib import resources
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import BACKEND_NAME, __version__
from ._parallel import thread_count
from .analysis import energy_table_csv
from .atomic import PreconditionError, Tolerances, decompose, load_decomposition, save_decomposition, verify
from .calderon import CalibrationError, ConvergenceError, ReproducingOperator, calibrate_N
from .dyadic import DyadicLattice, LevelError
from .families import calibration_family, molecule, parse_family
from .filters import FilterBankError, build_filter_bank
from .grid import Grid, GridMismatchError, SampledFunction, lp_norm
from .operators import KernelConditionError, Space, boundedness_experiment
from .weights import (
    BracketingError,
    ap_constant,
    critical_index,
    parse_weight,
    reverse_holder_index,
    rh_constant,
)

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2

SCHEMAS = ("calibration", "certificate", "decomposition", "filters", "opbench", "weights")


def load_schema(name: str) -> dict:
    """Published JSON schema of a command output."""
    if name not in SCHEMAS:
        raise KeyError(f"no schema named {name!r}; choose from {SCHEMAS}")
    return json.loads(resources.files("whardy").joinpath("schemas", f"{name}.schema.json").read_text())


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    n: int = 1
    Ng: int = 1024
    L: float = 1.0
    jmax: int | None = None
    N: str = "auto"
    p: float = 1.0
    q: float = 2.0
    s: int = 1
    weight: str = "constant"
    seed: int = 0
    tol: float = 1e-12
    moment_tol: float = 1e-10
    support_tol: float = 1e-3
    size_tol: float = 1e-9
    mom_tol: float = 1e-6
    rec_tol: float = 1e-6
    inversion_tol: float = 1e-10
    out: str | None = None

    def grid(self) -> Grid:
        return Grid(self.n, self.Ng, self.L)

    def tolerances(self) -> Tolerances:
        return Tolerances(self.support_tol, self.size_tol, self.mom_tol, self.rec_tol)


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _coerce(name: str, value):
    if value is None:
        return None
    kind = {"n": int, "Ng": int, "jmax": int, "s": int, "seed": int, "N": str, "weight": str, "out": str}.get(name, float)
    if name == "jmax" and str(value).lower() in ("auto", "none", ""):
        return None
    return kind(value)


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Parsed with configparser."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from None
    out = {}
    for k, v in cp["run"].items():
        key = k.strip()
        if key not in _CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r} in {path}")
        out[key] = _coerce(key, v.strip().strip('"').strip("'"))
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    for k, v in values.items():
        setattr(cfg, k, v)
    if cfg.Ng <= 0 or cfg.Ng & (cfg.Ng - 1):
        raise UsageError(f"Ng must be a power of two, got {cfg.Ng}")
    if cfg.n not in (1, 2):
        raise UsageError(f"n must be 1 or 2, got {cfg.n}")
    return cfg


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _emit(cfg: RunConfig, payload: dict, name: str | None = None) -> None:
    text = _dump(payload)
    if cfg.out:
        out = Path(cfg.out)
        if name is not None and (out.is_dir() or cfg.out.endswith("/")):
            out.mkdir(parents=True, exist_ok=True)
            out = out / name
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    else:
        sys.stdout.write(text)


def _load_input(path: str) -> SampledFunction:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input file {path} not found")
    if p.suffix == ".json":
        return SampledFunction.from_json(p.read_text())
    return SampledFunction.load(p)


def _operator(cfg: RunConfig, grid: Grid) -> ReproducingOperator:
    bank = build_filter_bank(grid, cfg.jmax)
    lat = DyadicLattice(grid)
    if str(cfg.N).lower() == "auto":
        return calibrate_N(bank, lat, calibration_family(grid, cfg.seed), description=f"calibration(seed={cfg.seed})")
    return ReproducingOperator(bank, lat, int(cfg.N))


# commands


def cmd_filters(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    bank = build_filter_bank(grid, cfg.jmax)
    if cfg.out:
        man = bank.export(cfg.out)
    else:
        man = bank.manifest()
    rng = np.random.default_rng(cfg.seed)
    rec = 0.0
    for _ in range(20):
        f = SampledFunction(grid, rng.standard_normal(grid.shape))
        rec = max(rec, lp_norm(bank.reconstruct(f) - f, 2) / lp_norm(f, 2))
    rows = [
        ("calderon_residual", man["calderon_residual"], cfg.tol),
        ("lowpass_integral_error", abs(man["lowpass_integral"] - 1.0), cfg.tol),
        ("reconstruction_error", rec, cfg.tol),
    ] + [(f"moment_error_j{j + 1}", e, cfg.moment_tol) for j, e in enumerate(man["moment_errors"])]
    failed = [r for r in rows if not r[1] <= r[2]]
    man = {**man, "seed": cfg.seed, "reconstruction_error": rec, "checks": [{"name": a, "value": b, "tolerance": c, "passed": b <= c} for a, b, c in rows]}
    man["passed"] = not failed
    if cfg.out:
        (Path(cfg.out) / "manifest.json").write_text(_dump(man))
    else:
        sys.stdout.write(_dump(man))
    if failed:
        _table(["check", "value", "tolerance"], [(a, f"{b:.3e}", f"{c:.1e}") for a, b, c in failed])
        return EXIT_TOLERANCE
    return EXIT_OK


def _table(header, rows) -> None:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    for row in [header, *rows]:
        sys.stderr.write("  ".join(str(x).ljust(w) for x, w in zip(row, widths)) + "\n")


def cmd_decompose(cfg: RunConfig, args) -> int:
    f = _load_input(args.input)
    cfg.n, cfg.Ng, cfg.L = f.grid.n, f.grid.size, f.grid.length
    op = _operator(cfg, f.grid)
    w = parse_weight(cfg.weight, f.grid)
    dec = decompose(f, cfg.p, cfg.q, cfg.s, w, op, tol=cfg.inversion_tol, tolerances=cfg.tolerances())
    dec = dec.replace(params={**dec.params, "seed": cfg.seed})
    out = Path(cfg.out or "decomposition.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_decomposition(dec, out)
    cert = dec.certificate
    if not cert.valid:
        sys.stderr.write(cert.table() + "\n")
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    path = Path(args.decomposition)
    if not path.exists():
        raise UsageError(f"decomposition file {path} not found")
    dec = load_decomposition(path)
    f = _load_input(args.input)
    if f.grid != dec.grid:
        raise UsageError(f"input grid {f.grid} does not match decomposition grid {dec.grid}")
    w = parse_weight(args.weight, dec.grid) if args.weight else dec.weight()
    cert = verify(dec, f, w=w, tolerances=cfg.tolerances())
    _emit(cfg, cert.to_dict(), "certificate.json")
    if not cert.valid:
        sys.stderr.write(cert.table() + "\n")
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_opbench(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    family = parse_family(args.family, n=cfg.n, seed=cfg.seed)
    N = 4 if str(cfg.N).lower() == "auto" else int(cfg.N)
    rep = boundedness_experiment(
        args.op, family, Space.parse(args.source), Space.parse(args.target), grid, args.refine, N, args.family
    )
    out = Path(cfg.out or "opbench")
    rep.write(out)
    summary = out / "opbench.json"
    summary.write_text(_dump({**json.loads(summary.read_text()), "seed": cfg.seed}))
    bad = not rep.finite or rep.drift >= args.max_drift
    if bad:
        _table(["max", "drift", "limit", "finite"], [(f"{rep.max_ratio:.4g}", f"{rep.drift:.4f}", args.max_drift, rep.finite)])
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_weights(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    w = parse_weight(cfg.weight, grid)
    lat = DyadicLattice(grid)
    ps = [float(t) for t in args.p_values.split(",")]
    rs = [float(t) for t in args.r_values.split(",")]
    report = {
        "weight": w.label,
        "grid": grid.to_dict(),
        "ap": {f"{p:g}": ap_constant(w, p, lat) for p in ps},
        "rh": {f"{r:g}": rh_constant(w, r, lat) for r in rs},
        "critical_index": critical_index(w, lat),
        "reverse_holder_index": reverse_holder_index(w, lat),
        "seed": cfg.seed,
    }
    _emit(cfg, report, "weights.json")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    bank = build_filter_bank(grid, cfg.jmax)
    lat = DyadicLattice(grid)
    try:
        op = calibrate_N(bank, lat, calibration_family(grid, cfg.seed), args.target, f"calibration(seed={cfg.seed})")
    except CalibrationError as exc:
        _emit(cfg, {"error": str(exc), "ratios": {str(k): v for k, v in exc.table.items()}, "seed": cfg.seed}, "calibration.json")
        sys.stderr.write(str(exc) + "\n")
        return EXIT_TOLERANCE
    _emit(cfg, {**op.report(), "seed": cfg.seed}, "calibration.json")
    return EXIT_OK


def cmd_energy(cfg: RunConfig, args) -> int:
    f = _load_input(args.input)
    bank = build_filter_bank(f.grid, cfg.jmax)
    text = energy_table_csv(f, bank)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_fixture(cfg: RunConfig, args) -> int:
    grid = cfg.grid()
    rng = np.random.default_rng(cfg.seed)
    kind = args.kind
    if kind == "zero":
        f = SampledFunction.zeros(grid)
    elif kind == "constant":
        f = SampledFunction.constant(grid, 1.0)
    elif kind == "molecule":
        f = molecule(args.scale, tuple(rng.random(grid.n))).sample(grid)
    elif kind == "noise":
        f = SampledFunction(grid, rng.standard_normal(grid.shape))
    else:
        f = parse_family(kind, n=grid.n, seed=cfg.seed)[0].sample(grid)
    out = Path(cfg.out or f"{kind.split(':')[0]}.hlgf")
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".json":
        out.write_text(f.to_json())
    else:
        f.save(out)
    return EXIT_OK


COMMANDS = {
    "filters": cmd_filters,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
    "opbench": cmd_opbench,
    "weights": cmd_weights,
    "calibrate": cmd_calibrate,
    "fixture": cmd_fixture,
    "energy": cmd_energy,
}


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="key=value configuration file")
    g.add_argument("--n", type=int)
    g.add_argument("--Ng", "--N-g", dest="Ng", type=int)
    g.add_argument("--L", type=float)
    g.add_argument("--jmax", "--j-max", dest="jmax")
    g.add_argument("--N", help="sampling offset, or 'auto' to calibrate")
    g.add_argument("--p", type=float)
    g.add_argument("--q", type=float)
    g.add_argument("--s", type=int)
    g.add_argument("--weight")
    g.add_argument("--seed", type=int)
    g.add_argument("--tol", type=float, help="filter residual tolerance")
    g.add_argument("--moment-tol", dest="moment_tol", type=float)
    g.add_argument("--support-tol", dest="support_tol", type=float)
    g.add_argument("--size-tol", dest="size_tol", type=float)
    g.add_argument("--mom-tol", dest="mom_tol", type=float)
    g.add_argument("--rec-tol", dest="rec_tol", type=float)
    g.add_argument("--inversion-tol", dest="inversion_tol", type=float)
    g.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whardy", description="Weighted local Hardy space toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND_NAME} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filters", help="build the filter bank and report residuals")
    _common(p)

    p = sub.add_parser("decompose", help="atomic decomposition of an input file")
    _common(p)
    p.add_argument("--input", required=True)

    p = sub.add_parser("verify", help="re-check a stored decomposition")
    _common(p)
    p.add_argument("--decomposition", "--dec", dest="decomposition", required=True)
    p.add_argument("--input", required=True)

    p = sub.add_parser("opbench", help="operator boundedness experiment")
    _common(p)
    p.add_argument("--op", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--family", default="molecules:20")
    p.add_argument("--refine", type=int, default=2, help="number of grid levels (at least 2)")
    p.add_argument("--max-drift", dest="max_drift", type=float, default=0.25)

    p = sub.add_parser("weights", help="weight constant report")
    _common(p)
    p.add_argument("--p-values", dest="p_values", default="1,1.5,2,3,4")
    p.add_argument("--r-values", dest="r_values", default="1.5,2,4")

    p = sub.add_parser("calibrate", help="sweep the sampling offset N")
    _common(p)
    p.add_argument("--target", type=float, default=0.5)

    p = sub.add_parser("energy", help="per-scale energy table as CSV")
    _common(p)
    p.add_argument("--input", required=True)

    p = sub.add_parser("fixture", help="write an input fixture")
    _common(p)
    p.add_argument("--kind", default="molecule", help="zero, constant, molecule, noise, or a family spec")
    p.add_argument("--scale", type=int, default=3)
    return parser


USAGE_ERRORS = (
    UsageError,
    PreconditionError,
    FilterBankError,
    LevelError,
    GridMismatchError,
    ValueError,
    FileNotFoundError,
    KeyError,
)
NUMERICAL_ERRORS = (ConvergenceError, CalibrationError, BracketingError, KernelConditionError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        thread_count()
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except NUMERICAL_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_TOLERANCE
    except USAGE_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

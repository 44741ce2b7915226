"""Command-line front end.

    tdmr --mode mi-mc --rows 3 --cols 3 --alpha 1.0 --beta 0.5 \\
         --sigma-j 0.8 --sigma-s 0.3 --t-max 1000 --seed 7

Every run writes one CSV plus ``<csv>.manifest.json``. Values given in a JSON
``--config`` file are overridden by flags.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from tdmr import __version__
from tdmr.channel import ChannelParams, checkerboard, parse_bits, pattern_bits, sample_readback
from tdmr.density import NotPositiveDefiniteError, build_pattern_table
from tdmr.detector import decision_raster, write_raster_csv
from tdmr.infotheory import (
    QuadratureNotConverged,
    conditional_entropy,
    fmt,
    quad_symmetric_mi,
    sweep,
    write_sweep_csv,
)
from tdmr.lattice import MAX_CELLS, build_grid

MODES = ("mi-mc", "mi-quad", "regions", "sample", "covariance")
OUTPUT_DIR_ENV = "TDMR_OUTPUT_DIR"
# system noise for decision-region plots when none is given
REGIONS_SIGMA_S = "0.5"

EXIT_OK = 0
EXIT_USAGE = 2  # unknown flag / malformed command line
EXIT_MISSING = 3
EXIT_VALUE = 4
EXIT_CAP = 5
EXIT_IO = 6
EXIT_NUMERIC = 7


class ConfigError(Exception):
    def __init__(self, message: str, field: str | None = None, code: int = EXIT_VALUE):
        super().__init__(message)
        self.field = field
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    mode: str
    rows: int = 1
    cols: int = 2
    alpha: float = 1.5
    beta: float = 0.5
    sigma_s: tuple[float, ...] = ()
    sigma_j: tuple[float, ...] = ()
    t_max: int | None = None
    seed: int = 0
    window: float = 6.0
    resolution: int = 601
    pattern: str | None = None
    threads: int = 1
    output: str | None = None


_FIELDS = {f.name for f in fields(RunConfig)}
_REQUIRED = {
    "mi-mc": ("sigma_s", "sigma_j", "t_max"),
    "mi-quad": ("sigma_s", "sigma_j"),
    "regions": ("sigma_j",),
    "sample": ("sigma_s", "sigma_j", "t_max"),
    "covariance": ("sigma_s", "sigma_j"),
}
_SINGLE_POINT = ("regions", "sample", "covariance")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, code=EXIT_USAGE)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tdmr", description="Simplified TDMR channel experiments.")
    p.add_argument("--config", help="JSON file of defaults; flags take precedence")
    p.add_argument("--mode", choices=MODES)
    # numerics stay strings here so conversion errors get their own exit code
    for name in ("rows", "cols", "alpha", "beta", "sigma-s", "sigma-j", "t-max", "seed",
                 "window", "resolution", "threads"):
        p.add_argument(f"--{name}")
    p.add_argument("--pattern", help="write pattern as a string of +/- (row-major)")
    p.add_argument("--output", help=f"CSV path (default: ${OUTPUT_DIR_ENV}/<mode>.csv)")
    return p


def _num(field: str, value, kind):
    try:
        if kind is int:
            if isinstance(value, float) or isinstance(value, bool):
                raise ValueError
            return int(str(value), 10)
        v = float(value)
        if not math.isfinite(v):
            raise ValueError
        return v
    except (TypeError, ValueError):
        raise ConfigError(f"{field}: expected {kind.__name__}, got {value!r}", field) from None


def _num_list(field: str, value) -> tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [s for s in str(value).split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{field}: empty list", field)
    return tuple(_num(field, s, float) for s in items)


def _load_file(path: str) -> dict:
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", "config") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object", "config")
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {k!r}", key, EXIT_USAGE)
        out[key] = v
    return out


def _take_pattern(argv: list[str]) -> tuple[list[str], str | None]:
    # argparse drops a bare "--" value, which is a valid all-minus pattern
    rest, pattern = [], None
    it = iter(argv)
    for arg in it:
        if arg == "--pattern":
            pattern = next(it, None)
            if pattern is None:
                raise ConfigError("argument --pattern: expected one argument", "pattern", EXIT_USAGE)
        elif arg.startswith("--pattern="):
            pattern = arg[len("--pattern="):]
        else:
            rest.append(arg)
    return rest, pattern


def parse_config(argv=None) -> RunConfig:
    """Validated RunConfig from command-line arguments (and an optional file)."""
    argv, pattern = _take_pattern(list(sys.argv[1:] if argv is None else argv))
    ns = _parser().parse_args(argv)
    raw = _load_file(ns.config) if ns.config else {}
    for key, val in vars(ns).items():
        if key != "config" and val is not None:
            raw[key] = val
    if pattern is not None:
        raw["pattern"] = pattern

    mode = raw.get("mode")
    if mode == "regions" and raw.get("sigma_s") is None:
        raw["sigma_s"] = REGIONS_SIGMA_S
    if mode is None:
        raise ConfigError("missing required field mode", "mode", EXIT_MISSING)
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {', '.join(MODES)}", "mode")
    for name in _REQUIRED[mode]:
        if raw.get(name) is None:
            raise ConfigError(f"missing required field {name} for mode {mode}", name, EXIT_MISSING)

    vals: dict = {"mode": mode}
    for name in ("rows", "cols", "t_max", "seed", "resolution", "threads"):
        if raw.get(name) is not None:
            vals[name] = _num(name, raw[name], int)
    for name in ("alpha", "beta", "window"):
        if raw.get(name) is not None:
            vals[name] = _num(name, raw[name], float)
    for name in ("sigma_s", "sigma_j"):
        if raw.get(name) is not None:
            vals[name] = _num_list(name, raw[name])
    for name in ("pattern", "output"):
        if raw.get(name) is not None:
            vals[name] = str(raw[name])
    cfg = RunConfig(**vals)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.rows < 1 or cfg.cols < 1:
        raise ConfigError("rows and cols must be positive", "rows" if cfg.rows < 1 else "cols")
    n = cfg.rows * cfg.cols
    if n > MAX_CELLS:
        raise ConfigError(f"rows/cols: n = {n} cells exceeds the limit {MAX_CELLS}", "rows", EXIT_CAP)
    for name in ("sigma_s", "sigma_j"):
        if any(v < 0 for v in getattr(cfg, name)):
            raise ConfigError(f"{name}: deviations must be non-negative", name)
    if cfg.t_max is not None and cfg.t_max < 1:
        raise ConfigError("t_max must be >= 1", "t_max")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits", "seed")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1", "threads")
    if cfg.mode in _SINGLE_POINT:
        for name in ("sigma_s", "sigma_j"):
            if len(getattr(cfg, name)) != 1:
                raise ConfigError(f"{name}: mode {cfg.mode} takes a single value", name)
    if cfg.mode in ("mi-quad", "regions") and n != 2 and not (cfg.mode == "mi-quad" and n == 1):
        raise ConfigError(f"rows/cols: mode {cfg.mode} needs a two-cell grid, got n={n}", "rows")
    if cfg.mode == "regions":
        if cfg.window <= 0:
            raise ConfigError("window must be positive", "window")
        if cfg.resolution < 2:
            raise ConfigError("resolution must be >= 2", "resolution")
    if cfg.pattern is not None:
        try:
            x = parse_bits(cfg.pattern)
        except ValueError as exc:
            raise ConfigError(f"pattern: {exc}", "pattern") from None
        if len(x) != n:
            raise ConfigError(f"pattern: length {len(x)} does not match n={n}", "pattern")


def render(cfg: RunConfig) -> list[str]:
    """Command line that parses back to ``cfg``."""
    argv = [f"--mode={cfg.mode}"]
    for f in fields(RunConfig):
        if f.name == "mode":
            continue
        v = getattr(cfg, f.name)
        if v is None or v == ():
            continue
        if isinstance(v, tuple):
            v = ",".join(repr(float(s)) for s in v)
        elif isinstance(v, float):
            v = repr(v)
        # "=" form so values such as "-+" are not taken for flags
        argv.append(f"--{f.name.replace('_', '-')}={v}")
    return argv


def output_path(cfg: RunConfig) -> Path:
    if cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{cfg.mode}.csv"


def _single_params(cfg: RunConfig) -> ChannelParams:
    return ChannelParams(cfg.alpha, cfg.beta, cfg.sigma_s[0], cfg.sigma_j[0])


def _write_mi_mc(cfg, topo, f):
    rows = sweep(topo, cfg.alpha, cfg.beta, cfg.sigma_s, cfg.sigma_j, cfg.t_max, cfg.seed,
                 cfg.threads)
    write_sweep_csv(rows, topo.n, f)


def _write_mi_quad(cfg, topo, f):
    f.write("sigma_s,sigma_j,mi_bits,mi_rate,h_y_bits,h_ygx_bits\n")
    for sj in cfg.sigma_j:
        for ss in cfg.sigma_s:
            table = build_pattern_table(topo, ChannelParams(cfg.alpha, cfg.beta, ss, sj))
            mi = quad_symmetric_mi(table)
            hygx = conditional_entropy(table)
            f.write(",".join(fmt(v) for v in (ss, sj, mi, mi / topo.n, mi + hygx, hygx)) + "\n")


def _write_regions(cfg, topo, f):
    table = build_pattern_table(topo, _single_params(cfg))
    raster = decision_raster(table, cfg.window, cfg.resolution)
    write_raster_csv(raster, table, f)


def _write_sample(cfg, topo, f):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    if cfg.pattern is not None:
        x = np.tile(parse_bits(cfg.pattern), (cfg.t_max, 1))
    else:
        x = 1.0 - 2.0 * rng.integers(0, 2, size=(cfg.t_max, topo.n))
    y = sample_readback(rng, topo, _single_params(cfg), x)
    f.write(",".join(["trial", "x_bits"] + [f"y{k + 1}" for k in range(topo.n)]) + "\n")
    for t in range(cfg.t_max):
        f.write(",".join([str(t), pattern_bits(x[t])] + [fmt(v) for v in y[t]]) + "\n")


def _write_covariance(cfg, topo, f):
    from tdmr.channel import covariance_matrix

    x = parse_bits(cfg.pattern) if cfg.pattern is not None else checkerboard(topo)
    s = covariance_matrix(topo, _single_params(cfg), x)
    f.write(",".join(["cell"] + [str(k + 1) for k in range(topo.n)]) + "\n")
    for i in range(topo.n):
        f.write(",".join([str(i + 1)] + [fmt(v) for v in s[i]]) + "\n")


_WRITERS = {
    "mi-mc": _write_mi_mc,
    "mi-quad": _write_mi_quad,
    "regions": _write_regions,
    "sample": _write_sample,
    "covariance": _write_covariance,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; returns the process exit status."""
    topo = build_grid(cfg.rows, cfg.cols)
    path = output_path(cfg)
    start = time.perf_counter()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            _WRITERS[cfg.mode](cfg, topo, f)
    except OSError as exc:
        print(f"tdmr: cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NotPositiveDefiniteError, QuadratureNotConverged, ValueError) as exc:
        print(f"tdmr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest = {
        "config": asdict(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "output": str(path),
    }
    mpath = path.with_name(path.name + ".manifest.json")
    try:
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"tdmr: cannot write {mpath}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"tdmr: {exc}", file=sys.stderr)
        return exc.code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front door: ``deltavar <subcommand> [flags]``.

Parameters come from built-in defaults, then an optional key=value file given
with --config, then explicit flags.  The merged configuration is echoed into
every JSON artifact together with its hash; CSV ledgers are append-only.

Exit codes: 0 ok, 2 usage, 3 capacity, 4 numeric validity, 5 output/IO.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .cache import ENV_VAR, default_cache_dir, load_or_build, table_path
from .constants import DEFAULT_CUTOFF, DEFAULT_PRIME_LIMIT, constants_bundle
from .errors import DeltaVarError
from .sampling import SamplingPlan
from .sieve import DEFAULT_SEGMENT
from .trig import mvt_diagonal, mvt_quadrature
from .variance import (
    CSV_COLUMNS,
    covariance_report,
    residual_prop,
    variance_ivic,
    variance_longH,
    variance_short,
)

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5

# keys that never change results and stay out of the config hash
_RUNTIME_KEYS = {"output", "ledger", "workers", "cache_dir", "config", "command"}


class UsageError(Exception):
    pass


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _integer(text: str) -> int:
    v = _number(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


DEFAULTS = {
    "sieve-cache": {"k": 2, "N": 10**6},
    "constants": {"k": 2, "prime_limit": DEFAULT_PRIME_LIMIT, "cutoff": DEFAULT_CUTOFF},
    "mvt-check": {"k": 2, "N": 8, "X": 1e4, "alpha": None, "sets": 20, "seed": 0, "node_budget": 1 << 16},
    "residual": {"k": 3, "X": 1e6, "theta": 0.3, "samples": 10000, "seed": 1, "mode": "stratified", "bound": None},
    "variance": {
        "k": 2, "X": 1e6, "regime": None, "L": None, "H": None, "theta": None,
        "samples": 10000, "seed": 1, "mode": "stratified",
    },
    "covariance": {"k": 2, "X": 1e6, "H": None, "theta": 0.1, "samples": 10000, "seed": 1, "mode": "stratified"},
    "report": {"ledger": "results.csv", "json": False},
}
COMMON = {"workers": 1, "segment_size": DEFAULT_SEGMENT, "cache_dir": None, "output": None, "ledger": None}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltavar", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"deltavar {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(sp, ledger=True):
        sp.add_argument("--config", default=S, help="key=value file; flags override it")
        sp.add_argument("--workers", type=_integer, default=S)
        sp.add_argument("--segment-size", dest="segment_size", type=_integer, default=S)
        sp.add_argument("--cache-dir", dest="cache_dir", default=S, help=f"overrides ${ENV_VAR}")
        sp.add_argument("--output", "-o", default=S, help="JSON output path (default stdout)")
        if ledger:
            sp.add_argument("--ledger", default=S, help="append one CSV row to this file")

    sp = sub.add_parser("sieve-cache", help="build and cache a d_k table")
    common(sp, ledger=False)
    sp.add_argument("--k", type=_integer, default=S)
    sp.add_argument("--N", type=_integer, default=S)

    sp = sub.add_parser("constants", help="a_k, C_k, B_k, b_top as JSON")
    common(sp, ledger=False)
    sp.add_argument("--k", type=_integer, default=S)
    sp.add_argument("--prime-limit", dest="prime_limit", type=_integer, default=S)
    sp.add_argument("--cutoff", type=_integer, default=S)

    sp = sub.add_parser("mvt-check", help="quadrature vs diagonal mean value on random coefficients")
    common(sp, ledger=False)
    sp.add_argument("--k", type=_integer, default=S)
    sp.add_argument("--N", type=_integer, default=S, help="maximum number of terms")
    sp.add_argument("--X", type=_number, default=S)
    sp.add_argument("--alpha", type=_number, default=S)
    sp.add_argument("--sets", type=_integer, default=S)
    sp.add_argument("--seed", type=_integer, default=S)
    sp.add_argument("--node-budget", dest="node_budget", type=_integer, default=S)

    def plan_flags(sp):
        sp.add_argument("--samples", type=_integer, default=S)
        sp.add_argument("--seed", type=_integer, default=S)
        sp.add_argument("--mode", choices=["stratified", "grid"], default=S)

    sp = sub.add_parser("residual", help="mean square of Delta_k - P_k")
    common(sp)
    sp.add_argument("--k", type=_integer, default=S)
    sp.add_argument("--X", type=_number, default=S)
    sp.add_argument("--theta", type=_number, default=S)
    sp.add_argument("--bound", choices=["unconditional", "lindelof"], default=S)
    plan_flags(sp)

    sp = sub.add_parser("variance", help="short-interval variance experiment")
    common(sp)
    sp.add_argument("--regime", choices=["short", "longH", "ivic"], default=S)
    sp.add_argument("--k", type=_integer, default=S)
    sp.add_argument("--X", type=_number, default=S)
    sp.add_argument("--L", type=_number, default=S)
    sp.add_argument("--H", type=_number, default=S)
    sp.add_argument("--theta", type=_number, default=S)
    plan_flags(sp)

    sp = sub.add_parser("covariance", help="covariance of P_k(x+H) and P_k(x)")
    common(sp)
    sp.add_argument("--k", type=_integer, default=S)
    sp.add_argument("--X", type=_number, default=S)
    sp.add_argument("--H", type=_number, default=S)
    sp.add_argument("--theta", type=_number, default=S)
    plan_flags(sp)

    sp = sub.add_parser("report", help="aggregate a results ledger")
    sp.add_argument("--ledger", default=S)
    sp.add_argument("--json", action="store_true", default=S)
    sp.add_argument("--output", "-o", default=S)
    return p


# -- configuration -------------------------------------------------------------

def read_config_file(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_config_file(config: dict, path) -> None:
    lines = [f"{k}={v}" for k, v in config.items() if v is not None and k not in _RUNTIME_KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def _coerce(key: str, value, default):
    if not isinstance(value, str):
        return value
    if value.lower() in ("none", "null", ""):
        return None
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if key in ("k", "N", "samples", "seed", "sets", "prime_limit", "cutoff", "node_budget", "workers", "segment_size"):
        return _integer(value)
    if key in ("X", "L", "H", "theta", "alpha"):
        return _number(value)
    return value


def resolve_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    base = {**COMMON, **DEFAULTS[cmd]} if cmd != "report" else dict(DEFAULTS[cmd])
    given = vars(args)
    if "config" in given:
        try:
            filed = read_config_file(given["config"])
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}")
        unknown = set(filed) - set(base)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        base.update({k: _coerce(k, v, base[k]) for k, v in filed.items()})
    base.update({k: v for k, v in given.items() if k not in ("command", "config")})
    base["command"] = cmd
    return base


def config_hash(config: dict) -> str:
    payload = {k: v for k, v in sorted(config.items()) if k not in _RUNTIME_KEYS}
    payload["command"] = config.get("command")
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


# -- output --------------------------------------------------------------------

def _check_writable(path) -> None:
    if path is None:
        return
    p = Path(path)
    try:
        with open(p, "a"):
            pass
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc.strerror}") from exc


def emit_json(obj: dict, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False, default=_json_default)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def append_ledger(row: dict, path) -> None:
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with open(p, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        w.writerow({k: ("" if v is None else v) for k, v in row.items()})


def _stamp(obj: dict, config: dict) -> dict:
    obj["version"] = __version__
    obj["config_hash"] = config_hash(config)
    obj["config"] = config
    return obj


# -- subcommands ---------------------------------------------------------------

def cmd_sieve_cache(cfg):
    cache_dir = Path(cfg["cache_dir"]) if cfg["cache_dir"] else default_cache_dir()
    table = load_or_build(cfg["k"], cfg["N"], cache_dir)
    return _stamp(
        {"path": str(table_path(cache_dir, cfg["k"], cfg["N"])), "k": table.k, "start": table.start,
         "end": table.end, "max_value": int(table.values.max())},
        cfg,
    )


def cmd_constants(cfg):
    b = constants_bundle(cfg["k"], cfg["prime_limit"], cfg["cutoff"], cfg["segment_size"])
    out = b.as_json()
    out["tail_model"] = b.provenance["tail_model"]
    return _stamp(out, cfg)


def cmd_mvt_check(cfg):
    k = cfg["k"]
    alpha = cfg["alpha"] if cfg["alpha"] is not None else 1 - 1 / k
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for _ in range(cfg["sets"]):
        n = int(rng.integers(1, cfg["N"] + 1))
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        quad = mvt_quadrature(a, alpha, cfg["X"], k, cfg["node_budget"])
        diag = mvt_diagonal(a, alpha, cfg["X"], k)
        rows.append({"N": n, "quadrature": quad, "diagonal": diag, "rel_err": abs(quad - diag) / diag})
    return _stamp({"alpha": alpha, "sets": rows, "max_rel_err": max(r["rel_err"] for r in rows)}, cfg)


def _plan(cfg, interval_mode):
    return SamplingPlan(cfg["X"], cfg["samples"], cfg["seed"], cfg["mode"], interval_mode)


def default_theta(k: int) -> float:
    return min(0.5, 1.0 / (k - 1))


def cmd_variance(cfg):
    regime = cfg["regime"] or ("longH" if cfg["H"] is not None else "short")
    kw = {"segment_size": cfg["segment_size"], "workers": cfg["workers"]}
    k, X = cfg["k"], cfg["X"]
    if regime == "short":
        if cfg["L"] is None:
            raise UsageError("--L is required for the short regime")
        theta = cfg["theta"] if cfg["theta"] is not None else default_theta(k)
        return variance_short(k, X, cfg["L"], theta, _plan(cfg, "x-dependent"), **kw)
    if regime == "longH":
        if cfg["H"] is None:
            raise UsageError("--H is required for the longH regime")
        return variance_longH(k, X, cfg["H"], _plan(cfg, "fixed"), **kw)
    if cfg["L"] is None:
        raise UsageError("--L is required for the ivic regime")
    if k != 2:
        raise UsageError("the ivic regime is defined for k = 2 only")
    return variance_ivic(X, cfg["L"], _plan(cfg, "fixed"), **kw)


def cmd_residual(cfg):
    return residual_prop(
        cfg["k"], cfg["theta"], cfg["X"], _plan(cfg, "x-dependent"), cfg["bound"],
        segment_size=cfg["segment_size"], workers=cfg["workers"],
    )


def cmd_covariance(cfg):
    H = cfg["H"] if cfg["H"] is not None else cfg["X"] ** 0.7
    return covariance_report(cfg["k"], cfg["X"], H, cfg["theta"], _plan(cfg, "fixed"))


def _read_ledger(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _f(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return None


def aggregate(rows: list[dict]) -> list[dict]:
    """Group ledger rows by (k, regime); mean ratios per X and trend across X."""
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[(int(float(r["k"])), r.get("regime") or "?")][float(r["X"])].append(r)
    out = []
    for (k, regime), by_x in sorted(groups.items()):
        points = []
        for X in sorted(by_x):
            rs = by_x[X]

            def mean(col):
                vals = [v for v in (_f(r.get(col)) for r in rs) if v is not None]
                return sum(vals) / len(vals) if vals else None

            points.append({"X": X, "runs": len(rs), "ratio_leading": mean("ratio_leading"),
                           "ratio_proxy": mean("ratio_proxy"), "empirical_variance": mean("empirical_variance")})
        lead = [p["ratio_leading"] for p in points if p["ratio_leading"] is not None]
        trend = None
        if len(lead) >= 2:
            trend = abs(lead[-1] - 1) - abs(lead[0] - 1)
        out.append({"k": k, "regime": regime, "points": points, "trend_abs_dev": trend})
    return out


def format_table(groups: list[dict]) -> str:
    def fmt(v):
        return "-" if v is None else f"{v:.4g}"

    lines = [f"{'k':>2} {'regime':<10} {'X':>10} {'runs':>4} {'ratio_lead':>10} {'ratio_proxy':>11} {'trend':>8}"]
    for g in groups:
        for i, p in enumerate(g["points"]):
            trend = fmt(g["trend_abs_dev"]) if i == len(g["points"]) - 1 else ""
            lines.append(
                f"{g['k']:>2} {g['regime']:<10} {p['X']:>10.3g} {p['runs']:>4} "
                f"{fmt(p['ratio_leading']):>10} {fmt(p['ratio_proxy']):>11} {trend:>8}"
            )
    return "\n".join(lines)


def cmd_report(cfg):
    try:
        rows = _read_ledger(cfg["ledger"])
    except OSError as exc:
        raise UsageError(f"cannot read ledger: {exc}")
    groups = aggregate(rows)
    if cfg["json"]:
        return {"version": __version__, "groups": groups}
    text = format_table(groups)
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text + "\n")
    else:
        print(text)
    return None


COMMANDS = {
    "sieve-cache": cmd_sieve_cache,
    "constants": cmd_constants,
    "mvt-check": cmd_mvt_check,
    "residual": cmd_residual,
    "variance": cmd_variance,
    "covariance": cmd_covariance,
    "report": cmd_report,
}
_REPORT_COMMANDS = {"residual", "variance", "covariance"}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if cfg.get("cache_dir") is None and args.command != "report":
            env = os.environ.get(ENV_VAR)
            cfg["cache_dir"] = env if env else None
        _check_writable(cfg.get("output"))
        if args.command in _REPORT_COMMANDS:
            _check_writable(cfg.get("ledger"))
        result = COMMANDS[args.command](cfg)
        if args.command in _REPORT_COMMANDS:
            result.config = cfg
            result.config_hash = config_hash(cfg)
            if cfg.get("ledger"):
                append_ledger(result.csv_row(), cfg["ledger"])
            result = result.as_json()
        if result is not None:
            emit_json(result, cfg.get("output"))
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DeltaVarError as exc:
        category = {EXIT_CAPACITY: "capacity", EXIT_NUMERIC: "numeric-validity", EXIT_IO: "io"}.get(
            exc.exit_code, "usage"
        )
        print(f"error[{category}]: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (EXIT_USAGE, EXIT_CAPACITY, EXIT_NUMERIC, EXIT_IO) else EXIT_USAGE
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

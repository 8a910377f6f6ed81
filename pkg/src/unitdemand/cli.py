"""Command-line entry point.

Every subcommand prints its results as JSON on stdout; with ``--out DIR``
(or ``output_dir`` in the config) it also writes a report bundle.  Errors
go to stderr as a JSON object and set the exit code: 2 for bad input, 3
for numerical failures, 4 for broken internal invariants.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from typing import Optional

import numpy as np

from . import distributions as D
from .amd import (
    MenuOptimizerParams,
    allocation_heatmap,
    build_grid,
    evaluate_mechanism,
    sale_boundary,
    solve_lp_exact,
    solve_menu,
)
from .config import SCHEMA_VERSION, load_config, merge_flags
from .dual import certify
from .errors import (
    ConfigError,
    DomainError,
    InternalInvariantError,
    InvalidDistributionError,
    NumericalError,
    UnitDemandError,
)
from .figures import FIGURES, reproduce_figures
from .pricing import bundle_price, revenue_by_quadrature, threshold_c_star, threshold_table
from .report import ReportBundle, dumps, heatmap_svg, provenance

THREADS_ENV = "UNITDEMAND_THREADS"

EXIT_CODES = (
    (ConfigError, 2),
    (InvalidDistributionError, 2),
    (DomainError, 2),
    (NumericalError, 3),
    (InternalInvariantError, 4),
)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def _distributions(cfg: dict, n_default: Optional[int] = None) -> list:
    if "distributions" in cfg:
        dists = [D.from_spec(s) for s in cfg["distributions"]]
        if "n" in cfg and cfg["n"] != len(dists):
            raise ConfigError("n does not match the number of distributions")
        return dists
    n = cfg.get("n", n_default)
    if n is None:
        raise ConfigError("give n together with c or a distribution, or a distributions list")
    if "distribution" in cfg:
        base = D.from_spec(cfg["distribution"])
    elif "c" in cfg:
        base = D.uniform_shift(float(cfg["c"]))
    else:
        raise ConfigError("no distribution given: use c, distribution or distributions")
    return [base] * n


def _optimizer(cfg: dict) -> MenuOptimizerParams:
    return replace(MenuOptimizerParams(**cfg.get("optimizer", {})), seed=cfg.get("seed", 0))


def _heatmaps(solution, n, cfg, axes, prefix):
    tables, figures, maps = {}, {}, []
    if n == 2:
        sl = None
    else:
        if "slice" not in cfg:
            return tables, figures, maps
        sl = {int(k) - 1: v for k, v in cfg["slice"].items()}
    for item in range(n):
        hm = allocation_heatmap(solution, item, sl, axes)
        maps.append(hm)
        tables[f"{prefix}_item{item + 1}"] = hm.to_csv()
        figures[f"{prefix}_item{item + 1}"] = heatmap_svg(hm.matrix, hm.xs, hm.ys, title=f"item {item + 1}")
    return tables, figures, maps


def cmd_price(cfg):
    if "distributions" in cfg:
        res = bundle_price(_distributions(cfg))
        out = res.to_dict()
    else:
        dists = _distributions(cfg)
        res = bundle_price(dists[0], len(dists))
        out = res.to_dict()
        out["revenue_quadrature"] = revenue_by_quadrature(dists[0], len(dists), res.price)
    return {"result": out}, {}, {}


def cmd_threshold(cfg):
    if "n" not in cfg:
        raise ConfigError("threshold needs n")
    row = threshold_c_star(cfg["n"]).to_dict()
    row["ln_n_over_3"] = math.log(cfg["n"]) / 3
    return {"result": row}, {}, {}


def threshold_csv(rows) -> str:
    lines = ["n,c_star,residual,ln_n_over_3"]
    for r in rows:
        lines.append(f"{r.n},{r.c_star!r},{r.residual!r},{math.log(r.n) / 3!r}")
    return "\n".join(lines) + "\n"


def cmd_threshold_table(cfg):
    if "to" not in cfg:
        raise ConfigError("threshold-table needs to")
    rows = threshold_table(cfg["to"], workers=thread_count())
    return {"result": [r.to_dict() for r in rows]}, {"thresholds": threshold_csv(rows)}, {}


def cmd_check_cdf(cfg):
    if "distribution" not in cfg:
        raise ConfigError("check-cdf needs a distribution")
    dist = D.from_spec(cfg["distribution"])
    dist.validate()
    grid = cfg.get("grid", D.DEFAULT_GRID)
    tol = cfg.get("tol", D.DEFAULT_TOL)
    reports = [
        D.scale_monotone_check(dist, grid, grid, tol),
        D.quantile_scaled_check(dist, grid, grid, tol),
        D.monotone_elasticity_check(dist, grid, tol),
    ]
    if "alphas" in cfg:
        family = D.PowerScaledProduct(dist, tuple(cfg["alphas"]))
        reports.append(D.stochastic_relative_values_check(family, tol=tol))
    return {"distribution": dist.to_spec(), "reports": [r.to_dict() for r in reports]}, {}, {}


def _solution_csv(sol) -> str:
    n = sol.n
    head = [f"t{j + 1}" for j in range(n)] + ["weight"] + [f"a{j + 1}" for j in range(n)] + ["payment", "utility"]
    lines = [",".join(head)]
    for t, w, a, p, u in zip(sol.types, sol.weights, sol.allocation, sol.payment, sol.utility):
        vals = list(t) + [w] + list(a) + [p, u]
        lines.append(",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def cmd_solve_lp(cfg):
    dists = _distributions(cfg)
    grid = build_grid(dists, cfg.get("resolution", 21), cfg.get("placement", "left"))
    sol = solve_lp_exact(grid, method=cfg.get("lp_method", "cutting_plane"), max_types=cfg.get("max_types"))
    tables, figures, maps = _heatmaps(sol, len(dists), cfg, None, "allocation")
    tables["solution"] = _solution_csv(sol)
    result = {k: v for k, v in sol.to_dict().items() if k in ("objective", "status", "iterations", "ic_pairs",
                                                              "max_ic_violation", "max_ir_violation")}
    result["types"] = int(len(sol.types))
    result["menu"] = sol.to_menu().to_dict()
    if maps:
        result["sale_boundary"] = sale_boundary(maps[:1])
    return {"result": result}, tables, figures


def cmd_solve_menu(cfg):
    dists = _distributions(cfg)
    menu = solve_menu(dists, cfg.get("menu_size", 8), _optimizer(cfg))
    meta = dict(menu.meta)
    seconds = meta.pop("train_seconds", None)
    lo = min(d.support_lo for d in dists)
    hi = max(d.support_hi for d in dists)
    axis = np.linspace(lo, hi, cfg.get("heatmap_resolution", 51))
    tables, figures, maps = _heatmaps(menu, len(dists), cfg, (axis, axis), "allocation")
    body = menu.to_dict()
    body["meta"] = meta
    result = {"menu": body, "revenue_estimate": meta["revenue_estimate"]}
    if "resolution" in cfg:
        grid = build_grid(dists, cfg["resolution"], cfg.get("placement", "left"))
        result["grid_revenue"] = evaluate_mechanism(menu, grid)[0]
    if maps:
        result["sale_boundary"] = sale_boundary(maps[:1])
    return {"result": result, "_timing": {"train_seconds": seconds}}, tables, figures


def cmd_verify(cfg):
    if "n" not in cfg or "c" not in cfg:
        raise ConfigError("verify needs n and c")
    rep = certify(cfg["n"], cfg["c"], cfg.get("samples", 500), cfg.get("seed", 0), trace=cfg.get("trace", False))
    tables = {}
    if rep.trace:
        lines = ["index,name,integral"]
        lines += [f"{r['index']},{r['name']},{r['integral']!r}" for r in rep.trace]
        tables["upper_sets"] = "\n".join(lines) + "\n"
    return {"result": rep.to_dict()}, tables, {}


COMMANDS = {
    "price": cmd_price,
    "threshold": cmd_threshold,
    "threshold-table": cmd_threshold_table,
    "check-cdf": cmd_check_cdf,
    "solve-lp": cmd_solve_lp,
    "solve-menu": cmd_solve_menu,
    "verify": cmd_verify,
}


def _echo(config: dict) -> dict:
    # the output location is not an input of the computation
    return {k: v for k, v in config.items() if k != "output_dir"}


def run(config: dict) -> ReportBundle:
    """Dispatch a validated config (with ``command``) and return its report bundle."""
    command = config.get("command")
    started = time.perf_counter()
    if command == "reproduce-figures":
        opt = MenuOptimizerParams(**config["optimizer"]) if "optimizer" in config else None
        bundle = reproduce_figures(config.get("which", list(FIGURES)), config.get("solver", "menu"),
                                   config.get("menu_size", 4), config.get("seed", 0),
                                   config.get("heatmap_resolution", 51), config.get("resolution", 21), opt)
        bundle.inputs = _echo(config)
        bundle.timing["total_seconds"] = time.perf_counter() - started
        return bundle
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    results, tables, figures = COMMANDS[command](config)
    timing = results.pop("_timing", {})
    timing["total_seconds"] = time.perf_counter() - started
    seeds = {"seed": config["seed"]} if "seed" in config else {}
    return ReportBundle(command, _echo(config), results, tables, figures, provenance(seeds), timing)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="unitdemand", description="Bundle pricing for unit-demand buyers.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration; flags override its fields")
        p.add_argument("--out", dest="output_dir", help="directory for the report bundle")
        return p

    p = common(sub.add_parser("price", help="optimal grand-bundle price"))
    p.add_argument("--c", type=float)
    p.add_argument("--n", type=int)

    p = common(sub.add_parser("threshold", help="largest shift with uniform pricing optimal"))
    p.add_argument("--n", type=int)

    p = common(sub.add_parser("threshold-table", help="thresholds for n = 2..N"))
    p.add_argument("--to", type=int)
    p.add_argument("--csv", action="store_true", default=None, help="print CSV instead of JSON")

    p = common(sub.add_parser("check-cdf", help="monotonicity checks of a value distribution"))
    p.add_argument("--dist", dest="distribution", type=json.loads, help='e.g. \'{"kind": "power", "alpha": 2}\'')
    p.add_argument("--alphas", type=float, nargs="+")
    p.add_argument("--grid", type=int)
    p.add_argument("--tol", type=float)

    for name in ("solve-lp", "solve-menu"):
        p = common(sub.add_parser(name, help="numerical optimal mechanism"))
        p.add_argument("--c", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--resolution", type=int)
        p.add_argument("--placement", choices=["center", "left"])
        p.add_argument("--seed", type=int)
        if name == "solve-menu":
            p.add_argument("--menu-size", dest="menu_size", type=int)
        else:
            p.add_argument("--method", dest="lp_method", choices=["cutting_plane", "full"])

    p = common(sub.add_parser("verify", help="dual certificate checks for U[c, c+1]^n"))
    p.add_argument("--n", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trace", action="store_true", default=None)

    p = common(sub.add_parser("reproduce-figures", help="allocation heatmaps of the worked examples"))
    p.add_argument("--which", nargs="+", choices=list(FIGURES))
    p.add_argument("--solver", choices=["menu", "lp"])
    p.add_argument("--menu-size", dest="menu_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", type=int, help="LP grid points per axis")
    p.add_argument("--heatmap-resolution", dest="heatmap_resolution", type=int, help="menu heatmap points per axis")
    p.add_argument("--outdir", dest="outdir")
    return ap


def _error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    diagnostics = getattr(exc, "diagnostics", None)
    if diagnostics:
        payload["diagnostics"] = diagnostics
    sys.stderr.write(dumps(payload))
    return code


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except ConfigError as exc:
        return _error(exc, 2)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    flags = vars(args)
    command = flags.pop("command")
    config_path = flags.pop("config", None)
    outdir = flags.pop("outdir", None)
    if outdir is not None:
        flags["output_dir"] = outdir
    try:
        config = load_config(config_path)
        if config.get("command") not in (None, command):
            raise ConfigError(f"config is for {config['command']!r}, not {command!r}")
        config = merge_flags(config, {**flags, "command": command})
        config.setdefault("schema_version", SCHEMA_VERSION)
        bundle = run(config)
        if config.get("output_dir"):
            bundle.write(config["output_dir"])
        if command == "threshold-table" and config.get("csv"):
            sys.stdout.write(bundle.tables["thresholds"])
        else:
            sys.stdout.write(dumps(bundle.results))
        return 0
    except UnitDemandError as exc:
        for cls, code in EXIT_CODES:
            if isinstance(exc, cls):
                return _error(exc, code)
        return _error(exc, 4)


if __name__ == "__main__":
    sys.exit(main())

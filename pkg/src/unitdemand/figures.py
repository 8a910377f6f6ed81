"""Allocation-map recipes for the three two- and three-item examples.

``fig2``: two i.i.d. ``U[0, 1]`` items.  ``fig3``: ``F_1(x) = x**0.5`` and
``F_2(x) = x**2`` on ``[0, 1]``.  ``fig4``: three i.i.d. ``U[1, 2]`` items,
sliced at ``x_3`` in {1.2, 1.5, 1.8}.  In each case uniform pricing is
optimal, so the sale region should be ``max(t) >= p`` with ``p`` the bundle
price; the recipe reports the fitted boundary next to that oracle.
"""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Iterable, Optional

import numpy as np

from . import distributions as D
from .amd import MenuOptimizerParams, allocation_heatmap, build_grid, sale_boundary, solve_lp_exact, solve_menu
from .errors import DomainError
from .pricing import bundle_price
from .report import ReportBundle, heatmap_svg, provenance

__all__ = ["FIGURES", "figure_config", "reproduce_figures"]

FIGURES = ("fig2", "fig3", "fig4")
FIGURE_MENU_SIZE = 4


def figure_config(which: str) -> dict:
    if which == "fig2":
        return {"distributions": [{"kind": "uniform_shift", "c": 0.0}] * 2, "slices": [None]}
    if which == "fig3":
        return {"distributions": [{"kind": "power", "alpha": 0.5}, {"kind": "power", "alpha": 2.0}],
                "slices": [None]}
    if which == "fig4":
        return {"distributions": [{"kind": "uniform_shift", "c": 1.0}] * 3,
                "slices": [{2: 1.2}, {2: 1.5}, {2: 1.8}]}
    raise DomainError(f"unknown figure {which!r}")


def _lp_slice_value(axis, v):
    return float(axis[np.argmin(np.abs(axis - v))])


def reproduce_figures(which: Iterable[str] = FIGURES, solver: str = "menu", menu_size: int = FIGURE_MENU_SIZE,
                      seed: int = 0, heatmap_resolution: int = 51, resolution: int = 21,
                      optimizer: Optional[MenuOptimizerParams] = None) -> ReportBundle:
    """Solve each figure's instance and collect per-item heatmaps and boundaries.

    With ``solver="menu"`` the heatmaps are evaluated on
    ``heatmap_resolution`` points per axis; with ``solver="lp"`` on the LP
    grid of ``resolution`` points per axis (left-anchored; at most 13 for
    three items), where slice values snap to the nearest grid value.  A boundary matches when it is
    within one heatmap cell of the bundle price.
    """
    which = list(which)
    results, tables, figures, timing = {}, {}, {}, {}
    for fig in which:
        started = time.perf_counter()
        cfg = figure_config(fig)
        dists = [D.from_spec(s) for s in cfg["distributions"]]
        n = len(dists)
        oracle = bundle_price(dists).price
        lo = min(d.support_lo for d in dists)
        hi = max(d.support_hi for d in dists)
        if solver == "menu":
            opt = replace(optimizer or MenuOptimizerParams(), seed=seed)
            solution = solve_menu(dists, menu_size, opt)
            axis = np.linspace(lo, hi, heatmap_resolution)
            cell = (hi - lo) / (heatmap_resolution - 1)
            summary = {"menu": {k: v for k, v in solution.to_dict().items() if k != "meta"},
                       "revenue_estimate": solution.meta["revenue_estimate"]}
        elif solver == "lp":
            # three items: 13 points per axis leave 12**3 priced types, the LP cap
            res = resolution if n == 2 else min(resolution, 13)
            solution = solve_lp_exact(build_grid(dists, res, "left"))
            axis = None
            cell = (hi - lo) / (res - 1)
            summary = {"objective": solution.objective, "status": solution.status}
        else:
            raise DomainError(f"unknown solver {solver!r}")
        maps = []
        for sl in cfg["slices"]:
            if sl is not None and solver == "lp":
                sl = {k: _lp_slice_value(solution.grid.axes[k], v) for k, v in sl.items()}
            tag = "" if sl is None else "_x" + "_".join(f"{k + 1}-{v:g}" for k, v in sl.items())
            for item in range(n):
                hm = allocation_heatmap(solution, item, sl, None if axis is None else (axis, axis))
                maps.append(hm)
                name = f"{fig}_item{item + 1}{tag}"
                tables[name] = hm.to_csv()
                figures[name] = heatmap_svg(hm.matrix, hm.xs, hm.ys, title=f"{fig}: item {item + 1}{tag}")
        boundary = sale_boundary(maps[::n])
        results[fig] = {
            "distributions": cfg["distributions"],
            "solver": solver,
            "boundary_price": boundary["price"],
            "boundary_mismatches": boundary["mismatches"],
            "oracle_price": oracle,
            "cell_width": cell,
            "within_one_cell": abs(boundary["price"] - oracle) <= cell,
            **summary,
        }
        timing[fig] = time.perf_counter() - started
    inputs = {"which": which, "solver": solver, "menu_size": menu_size, "seed": seed,
              "heatmap_resolution": heatmap_resolution, "resolution": resolution}
    return ReportBundle("reproduce-figures", inputs, results, tables, figures, provenance({"seed": seed}), timing)

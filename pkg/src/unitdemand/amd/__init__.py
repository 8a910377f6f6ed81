"""Numerical mechanism design on discretized type spaces."""

from .grid import GridProblem, build_grid
from .heatmap import Heatmap, allocation_heatmap, sale_boundary
from .lp import DEFAULT_CAPS, LpSolution, ic_violations, solve_lp_exact
from .menu import (
    MenuMechanism,
    MenuOptimizerParams,
    bundle_features,
    bundles,
    evaluate_mechanism,
    evaluate_mechanism_mc,
    solve_menu,
)

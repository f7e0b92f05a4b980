"""Inverse design: find features whose predicted output tracks a reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..predictor import predict, region_of
from .bnb import _LP, solve_branch_and_bound
from .encode import build_tracking_milp, default_box


@dataclass
class TrackingResult:
    x_star: np.ndarray
    epsilon: float
    region: int
    y_hat: np.ndarray
    categories: np.ndarray
    status: str
    solution: object
    milp: object


def _interior_point(milp, sol, slack_tol):
    """Move ``x`` away from region and class boundaries without losing optimality.

    With the binaries fixed at the optimum and ``eps`` capped at
    ``eps* + slack_tol``, maximize the smallest slack of the active region's
    separating rows (and the active class rows). Returns the new variable
    vector, or None when the LP fails.
    """
    work = milp.copy()
    s = work.add_var("__margin", "continuous", 0.0, 1e6)
    active_region = [n for n, v in zip(milp.names, sol.values) if n.startswith("d_") and v > 0.5]
    active_nu = {n[3:] for n, v in zip(milp.names, sol.values) if n.startswith("nu_") and v > 0.5}
    j = active_region[0][2:]
    touched = False
    for r, name in enumerate(work.row_names):
        parts = name.split("_")
        if parts[0] == "part" and parts[1] == j:
            work.rows[r][s] = 1.0
            touched = True
        elif parts[0] == "cls" and parts[2] == j and f"{parts[1]}_{parts[3]}" in active_nu:
            work.rows[r][s] = -1.0
            touched = True
    if not touched:
        return None
    for i in work.binaries():
        work.lower[i] = work.upper[i] = float(round(sol.values[i]))
    eps = work.index("eps")
    work.upper[eps] = sol.objective_value + slack_tol
    work.set_objective({s: -1.0})
    lp = _LP(work)
    fun, x = lp.solve(lp.lower, lp.upper)
    if fun is None:
        return None
    return x[:milp.n_vars]


def optimize_tracking(model, y_ref, box=None, categories=None, gap_tol=1e-9,
                      node_limit=10000, interior=True, slack_tol=1e-8):
    """Solve the tracking MILP and evaluate the predictor at the optimum.

    With ``interior`` the optimizer is pushed off shared facets of the
    partition (keeping ``eps`` within ``slack_tol`` of the optimum), so that
    the predictor's own region choice at ``x_star`` agrees with the MILP.
    """
    box = box or default_box(model)
    milp = build_tracking_milp(model, y_ref, box, categories)
    sol = solve_branch_and_bound(milp, gap_tol=gap_tol, node_limit=node_limit)
    if sol.values is None:
        return TrackingResult(None, np.inf, -1, None, None, sol.status, sol, milp)
    values = sol.values
    if interior and (model.n_regions > 1 or categories):
        moved = _interior_point(milp, sol, slack_tol)
        if moved is not None:
            values = moved
    x_star = values[[milp.index(f"x_{h + 1}") for h in range(model.n_features)]]
    x_star = np.clip(x_star, box.x_min, box.x_max)
    y_hat, yd = predict(model, x_star)
    return TrackingResult(x_star, sol.objective_value, region_of(model, x_star),
                          y_hat, yd, sol.status, sol, milp)


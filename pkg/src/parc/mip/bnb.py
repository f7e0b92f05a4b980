"""Best-first branch-and-bound over binary variables.

LP relaxations are solved with the HiGHS dual simplex shipped with scipy.
Meant for desk-scale models (a few dozen binaries).
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"


@dataclass
class MilpSolution:
    status: str
    objective_value: float = np.inf
    values: np.ndarray | None = None
    names: list = field(default_factory=list)
    nodes: int = 0
    incumbent_history: list = field(default_factory=list)

    def value(self, name):
        return float(self.values[self.names.index(name)])

    def _select(self, prefix):
        idx = [i for i, n in enumerate(self.names) if n.startswith(prefix)]
        return self.values[idx] if self.values is not None else None

    @property
    def x_star(self):
        return self._select("x_")

    @property
    def delta(self):
        return self._select("d_")


class _LP:
    """LP relaxation data in ``linprog`` form."""

    def __init__(self, milp):
        A = milp.matrix()
        senses = np.asarray(milp.senses)
        rhs = np.asarray(milp.rhs)
        ub = senses == "<="
        lb = senses == ">="
        eq = senses == "="
        self.A_ub = np.vstack([A[ub], -A[lb]])
        self.b_ub = np.concatenate([rhs[ub], -rhs[lb]])
        self.A_eq = A[eq]
        self.b_eq = rhs[eq]
        self.c = milp.objective_vector()
        self.lower = np.asarray(milp.lower, dtype=float)
        self.upper = np.asarray(milp.upper, dtype=float)

    def solve(self, lower, upper):
        res = optimize.linprog(
            self.c,
            A_ub=self.A_ub if len(self.b_ub) else None,
            b_ub=self.b_ub if len(self.b_ub) else None,
            A_eq=self.A_eq if len(self.b_eq) else None,
            b_eq=self.b_eq if len(self.b_eq) else None,
            bounds=list(zip(np.where(np.isinf(lower), None, lower),
                            np.where(np.isinf(upper), None, upper))),
            method="highs-ds")
        if res.status == 0:
            return float(res.fun), res.x
        if res.status == 2:
            return None, None
        if res.status == 3:
            raise ValueError("LP relaxation is unbounded")
        raise RuntimeError(f"LP solver failed: {res.message}")


def solve_branch_and_bound(milp, gap_tol=1e-9, node_limit=10000, int_tol=1e-6):
    """Solve ``milp`` to global optimality by best-first branch-and-bound.

    Nodes are explored in order of LP bound, ties by creation order, and
    the branching variable is the most fractional binary (smallest index on
    ties), so the search is deterministic. Each integral relaxation is
    re-solved with its binaries fixed to clean 0/1 values.

    Parameters
    ----------
    milp : MilpModel
    gap_tol : float
        Nodes whose bound is within ``gap_tol`` of the incumbent are pruned.
    node_limit : int
        Maximum number of explored nodes before giving up with status
        ``"iteration-limit"`` (keeping the incumbent, if any).
    int_tol : float
        Integrality tolerance of binary variables.

    Returns
    -------
    MilpSolution
    """
    lp = _LP(milp)
    binaries = np.asarray(milp.binaries(), dtype=int)
    best_val, best_x = np.inf, None
    history = []
    counter = 0
    nodes = 0

    fun, x = lp.solve(lp.lower, lp.upper)
    if fun is None:
        return MilpSolution(INFEASIBLE, names=list(milp.names))
    heap = [(fun, counter, lp.lower.copy(), lp.upper.copy(), x)]
    status = OPTIMAL
    while heap:
        bound, _, lower, upper, x = heapq.heappop(heap)
        if bound >= best_val - gap_tol:
            break
        if nodes >= node_limit:
            status = ITERATION_LIMIT
            break
        nodes += 1
        frac = np.abs(x[binaries] - np.round(x[binaries])) if binaries.size else np.zeros(0)
        if not np.any(frac > int_tol):
            lo, hi = lower.copy(), upper.copy()
            lo[binaries] = hi[binaries] = np.round(x[binaries])
            val, xf = lp.solve(lo, hi)
            if val is not None and val < best_val:
                best_val, best_x = val, xf
                best_x[binaries] = np.round(best_x[binaries])
                history.append((nodes, val))
                logger.debug("node %d: incumbent %.12g", nodes, val)
            continue
        cand = np.flatnonzero(frac > int_tol)
        k = binaries[cand[np.argmax(frac[cand])]]
        for fixed in (1.0, 0.0):
            lo, hi = lower.copy(), upper.copy()
            lo[k] = hi[k] = fixed
            val, xc = lp.solve(lo, hi)
            if val is None or val >= best_val - gap_tol:
                continue
            counter += 1
            heapq.heappush(heap, (val, counter, lo, hi, xc))

    if best_x is None:
        return MilpSolution(ITERATION_LIMIT if status == ITERATION_LIMIT else INFEASIBLE,
                            names=list(milp.names), nodes=nodes)
    return MilpSolution(status, best_val, best_x, list(milp.names), nodes, history)

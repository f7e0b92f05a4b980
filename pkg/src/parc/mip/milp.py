"""A small dense mixed-integer linear program container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", "=", ">=")


@dataclass
class MilpModel:
    """Variables, linear rows and a linear objective (always minimized).

    Rows are stored sparsely as ``{variable index: coefficient}`` while the
    model is built; :meth:`matrix` gives the dense constraint matrix.
    """

    names: list = field(default_factory=list)
    kinds: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    senses: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    row_names: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)

    @property
    def n_vars(self):
        return len(self.names)

    @property
    def n_rows(self):
        return len(self.rows)

    def add_var(self, name, kind=CONTINUOUS, lb=0.0, ub=np.inf):
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self.names.append(name)
        self.kinds.append(kind)
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        self._index[name] = len(self.names) - 1
        return self._index[name]

    def add_row(self, coeffs, sense, rhs, name=None):
        """Add ``sum coeffs[v] * v (sense) rhs``; keys are names or indices."""
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        row = {}
        for key, value in coeffs.items():
            idx = self.index(key) if isinstance(key, str) else int(key)
            if not 0 <= idx < self.n_vars:
                raise ValueError(f"row references undeclared variable {key!r}")
            value = float(value)
            if value != 0.0:
                row[idx] = row.get(idx, 0.0) + value
        self.rows.append(row)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"c{len(self.rows)}")
        return len(self.rows) - 1

    def set_objective(self, coeffs):
        self.objective = {}
        for key, value in coeffs.items():
            idx = self.index(key) if isinstance(key, str) else int(key)
            if float(value) != 0.0:
                self.objective[idx] = float(value)

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def indices(self, prefix):
        """Indices of variables named ``prefix`` + suffix, in declaration order."""
        return [i for i, n in enumerate(self.names) if n.startswith(prefix)]

    @property
    def _index(self):
        cache = self.__dict__.get("_index_cache")
        if cache is None or len(cache) != len(self.names):
            cache = {n: i for i, n in enumerate(self.names)}
            self.__dict__["_index_cache"] = cache
        return cache

    def matrix(self):
        A = np.zeros((self.n_rows, self.n_vars))
        for r, row in enumerate(self.rows):
            for idx, value in row.items():
                A[r, idx] = value
        return A

    def objective_vector(self):
        c = np.zeros(self.n_vars)
        for idx, value in self.objective.items():
            c[idx] = value
        return c

    def binaries(self):
        return [i for i, k in enumerate(self.kinds) if k == BINARY]

    def copy(self):
        return MilpModel(list(self.names), list(self.kinds), list(self.lower),
                         list(self.upper), [dict(r) for r in self.rows], list(self.senses),
                         list(self.rhs), list(self.row_names), dict(self.objective))

    def row_activity(self, values):
        return self.matrix() @ np.asarray(values, dtype=float)

    def is_feasible(self, values, tol=1e-7):
        """Check bounds, rows and integrality at a full variable vector."""
        values = np.asarray(values, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if np.any(values < lo - tol) or np.any(values > hi + tol):
            return False
        for i in self.binaries():
            if abs(values[i] - round(values[i])) > tol:
                return False
        act = self.row_activity(values)
        for a, s, b in zip(act, self.senses, self.rhs):
            if s == "<=" and a > b + tol:
                return False
            if s == ">=" and a < b - tol:
                return False
            if s == "=" and abs(a - b) > tol:
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, MilpModel):
            return NotImplemented
        return (self.names == other.names and self.kinds == other.kinds
                and self.lower == other.lower and self.upper == other.upper
                and self.senses == other.senses and self.rhs == other.rhs
                and self.row_names == other.row_names
                and self.objective == other.objective
                and [dict(sorted(r.items())) for r in self.rows]
                == [dict(sorted(r.items())) for r in other.rows])

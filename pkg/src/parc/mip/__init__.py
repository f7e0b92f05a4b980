"""Mixed-integer encoding and optimization of fitted PARC predictors."""

from .bnb import MilpSolution, solve_branch_and_bound
from .encode import (Box, build_tracking_milp, default_box, encode_classifier,
                     encode_partition, encode_regression)
from .lpfile import export_lp, load_lp, read_lp, write_lp
from .milp import MilpModel
from .tracking import TrackingResult, optimize_tracking

__all__ = [
    "Box", "MilpModel", "MilpSolution", "TrackingResult", "build_tracking_milp",
    "default_box", "encode_classifier", "encode_partition", "encode_regression",
    "export_lp", "load_lp", "optimize_tracking", "read_lp", "solve_branch_and_bound",
    "write_lp",
]

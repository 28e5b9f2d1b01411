"""Minimum-cost many-to-one matching on random complete bipartite graphs.

Exact solvers, min-sum belief propagation, and the distributional fixed-point
numerics behind the limiting cost per vertex.
"""

from .bp import bp_decide, bp_repair, bp_solve, bp_step
from .exact import INFEASIBLE, LabeledTree, brute_force, reduction_solve, tree_dp
from .graph import (
    BipartiteInstance,
    ManyToOneMatching,
    gen_instance,
    is_feasible,
    matching_cost,
)
from .rde import RdeConstants, c_star, c_star_integral, constants, solve_wo

__version__ = "0.1.0"

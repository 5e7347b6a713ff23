"""Explicit-MPC / mpQP toolkit with rank-one storage-tree compression.

Offline: enumerate the optimal active sets of a multiparametric QP,
compute the piecewise-affine solution and its critical regions, and
compress everything into a storage tree whose edges carry rank-one
modifications of the parametric solution.  Online: evaluate the
compressed law and locate regions directly from the tree.

Typical flow:

    from mpqptree import enumeration, evaluator, io, mpc, tree
    from mpqptree.problem import transform_to_standard

    cftoc = mpc.build_problem1(2, 2)
    raw, manifest = mpc.condense(cftoc)
    problem = transform_to_standard(raw)
    problem, _ = enumeration.remove_redundant_constraints(problem)
    sol, regions = enumeration.enumerate_regions(problem)
    t = tree.build_tree(sol, n_u=manifest["n_u"])
    print(tree.compression_report(sol, t))
    node = evaluator.locate(t, p)
    z = evaluator.eval_solution(t, node, p)
"""

from . import enumeration, errors, evaluator, io, lowrank, lp, mpc, numerics, qp, tree
from .problem import (ExplicitSolution, MpQpProblem, MpQpRawProblem, ParamDomain,
                      RegionSolution, transform_to_standard, validate)

__all__ = [
    "enumeration", "errors", "evaluator", "io", "lowrank", "lp", "mpc",
    "numerics", "qp", "tree",
    "ExplicitSolution", "MpQpProblem", "MpQpRawProblem", "ParamDomain",
    "RegionSolution", "transform_to_standard", "validate",
]
__version__ = "0.1.0"

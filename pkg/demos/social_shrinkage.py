"""
Group shrinkage passes, social shrinkage fails
==============================================

Group-LASSO shrinkage over disjoint groups has a symmetric positive
semidefinite Jacobian everywhere off its threshold spheres.  Letting the
neighborhoods overlap, as windowed group-LASSO and persistent empirical
Wiener shrinkage do, breaks the symmetry, and a concrete point proves it.
"""
import numpy as np

from proxatlas import Box, check_jacobian_prox, classify_penalty, find_asymmetry_witness, parse_operator_id
from proxatlas.shrinkage import NeighborhoodSystem, SocialShrinkageSpec, derive_partition

box = Box.cube(-3, 3, 4)
glasso = parse_operator_id("group_lasso:groups=1,1,2,2:λ=1")
report = classify_penalty(glasso, check_jacobian_prox(glasso, samples=200, box=box), box)
print("group-LASSO:", report.verdict, "| max symmetry defect", report.max_sym_defect,
      "| min eigenvalue", report.min_eig, "| penalty", report.penalty_class)

for profile in ("wglasso", "pew"):
    spec = SocialShrinkageSpec(NeighborhoodSystem.sliding_window(3, 1), 1.0, profile)
    print(f"\n{profile} on sliding windows of width 3, n = 3")
    print("  neighborhoods:", spec.system.neighborhoods)
    print("  partition exists:", derive_partition(spec.system).ok)
    wit = find_asymmetry_witness(spec)
    w = spec.system.weights
    print("  witness point:", np.round(wit.point, 6))
    print(f"  ||w^{wit.j} y|| = {np.linalg.norm(w[wit.j] * wit.point):.6f} < 1 < "
          f"{np.linalg.norm(w[wit.i] * wit.point):.6f} = ||w^{wit.i} y||")
    print(f"  df_{wit.i}/dy_{wit.j} - df_{wit.j}/dy_{wit.i} = {wit.asym:.6f} "
          f"(finite differences: {wit.fd_asym:.6f})")

# Disjoint blocks are the exception: the neighborhoods form a partition
# and no witness exists.
blocks = SocialShrinkageSpec(NeighborhoodSystem.blocks(4, 2), 1.0, "wglasso")
print("\nblocks of two: partition", derive_partition(blocks.system).groups,
      "| witness", find_asymmetry_witness(blocks))

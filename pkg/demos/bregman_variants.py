"""
Bregman and linear-inverse variants
===================================

Replacing the quadratic data term by a Bregman divergence, or by
||y - M x||²/2, changes which composite field must be the gradient of a
convex function.  The same symmetric-PSD test then answers the question.
"""
import numpy as np

from proxatlas import Box, check_jacobian_prox, parse_operator_id
from proxatlas.bregman import (bregman_divergence, check_bregman_left_prox, check_bregman_right_prox,
                               check_linear_inverse_prox, generator)
from proxatlas.catalog import CATALOG_IDS

entropy = generator("neg_entropy")
print("D_entropy(1, e) =", bregman_divergence(entropy, [1.0], [np.e]), "(closed form e - 2 =", np.e - 2, ")")

# The identity minimizes D_h(y, x) + 0 for every strictly convex h.
identity = parse_operator_id("identity:n=2")
print("identity, left entropy form:",
      check_bregman_left_prox(identity, entropy, samples=50, box=Box.cube(0.1, 5, 2)).verdict)

# The inverse of scaled soft thresholding on y > 1 is 1 + x/2: a gradient.
scaled = parse_operator_id("scaled_soft:C=2")
print("scaled_soft, right quadratic form on (1.5, 5):",
      check_bregman_right_prox(scaled, generator("sq_norm"), samples=50, box=Box.cube(1.5, 5, 1)).verdict)

# Linear inverse problems: M = 2I keeps soft thresholding admissible, a
# rotation matrix does not.
soft2 = parse_operator_id("soft:λ=1:n=2")
print("soft, M = 2I:", check_linear_inverse_prox(soft2, 2 * np.eye(2), samples=50, box=Box.cube(-3, 3, 2)).verdict)
print("identity, M = rotation:",
      check_linear_inverse_prox(identity, [[0, 1], [-1, 0]], samples=50, box=Box.cube(-3, 3, 2)).verdict)

# With the quadratic generator both Bregman checks reduce to the plain one.
sq = generator("sq_norm")
print("\noperator      plain            left             right")
for op_id in CATALOG_IDS:
    op = parse_operator_id(op_id)
    box = Box.cube(-3, 3, op.n).intersect(op.domain)
    row = [check(op, *extra, samples=60, box=box, seed=3).verdict
           for check, extra in ((check_jacobian_prox, ()), (check_bregman_left_prox, (sq,)),
                                (check_bregman_right_prox, (sq,)))]
    print(f"{op_id:<13} " + " ".join(f"{v:<16}" for v in row))

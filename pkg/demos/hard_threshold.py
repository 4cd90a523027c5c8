"""
Hard thresholding and its hidden penalty
========================================

Hard thresholding jumps at the threshold, so it has no Jacobian there, yet it
is nondecreasing and therefore a proximity operator.  We recover the convex
potential it is the gradient of, read off the penalty, and re-derive the
operator by brute-force minimization, including the tie at the jump.
"""
import numpy as np

from proxatlas import Box, check_monotone_1d, parse_operator_id, reconstruct
from proxatlas.reconstruct import oracle_round_trip

op = parse_operator_id("hard:λ=2")
cut = op.params["rule"].hard_cut
print(f"hard thresholding with λ=2 keeps |y| >= {cut:g}")

# In one dimension a map is a prox exactly when it is nondecreasing.
report = check_monotone_1d(op, box=Box.cube(-5, 5, 1))
print("monotonicity verdict:", report.verdict)

# Integrate f along segments from 0 to get the potential psi, then the
# penalty phi on the image of f.
ys = np.linspace(-5, 5, 1001)
rec = reconstruct(op, ys)
print("max |psi - max(y²/2 - 2, 0)|:", np.max(np.abs(rec.psi - np.maximum(ys ** 2 / 2 - 2, 0))))

x, phi = rec.image_table()
print("penalty at x = 0:", phi[x[:, 0] == 0.0][0])
print("penalty range off the origin:", phi[x[:, 0] != 0.0].min(), "to", phi[x[:, 0] != 0.0].max())
print("the image skips (-2, 0) and (0, 2):", not np.any((np.abs(x) > 0) & (np.abs(x) < cut)))

# Minimize ||y - x||²/2 + phi(x) by exhaustive search over the image grid.
# At y = ±2 both 0 and ±2 are minimizers; f picks ±2.
res = oracle_round_trip(op, Box.cube(-5, 5, 1), grid=10_001, samples=100, probes=[[cut], [-cut]])
print("largest argmin deviation, in grid steps:", res.max_deviation_steps)
for y, ties in res.ties:
    print(f"tie set at y = {y[0]:+g}: {sorted(float(v) for v in ties[:, 0])}")

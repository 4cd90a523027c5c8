"""
An expansive prox with a nonconvex penalty
==========================================

Scaled soft thresholding C * soft(y) with C = 2 doubles distances, so its
penalty cannot be convex.  The Lipschitz constant tells how much quadratic
has to be added to make it convex, and the reconstruction confirms the
closed form |x| + (1/C - 1) x²/2.
"""
import numpy as np

from proxatlas import Box, check_monotone_1d, classify_penalty, convexity_audit, parse_operator_id
from proxatlas.reconstruct import PenaltyFunction, penalty_gradient

op = parse_operator_id("scaled_soft:C=2")
box = Box.cube(-5, 5, 1)

report = classify_penalty(op, check_monotone_1d(op, box=box), box)
print("verdict:", report.verdict)
print("Lipschitz estimate:", report.lipschitz)
print("penalty class:", report.penalty_class, "with coefficient", report.shift_coefficient)

pen = PenaltyFunction(op)
xs = np.linspace(-8, 8, 9)
print("\n   x    reconstructed phi    |x| - x²/4")
for x in xs:
    print(f"{x:5.1f}   {pen.phi([x]):16.12f}   {abs(x) - x * x / 4:11.6f}")

# Convexity audits on the image [-8, 8]: phi alone fails, phi plus the
# shift term and the prox objective g = x²/2 + phi pass.
image = Box.cube(-8, 8, 1)
c = report.shift_coefficient
print("\nmidpoint defect of phi:          ", convexity_audit(pen.phi, image, pairs=200))
print("midpoint defect of phi + c x²/2: ", convexity_audit(lambda x: pen.phi(x) + c * x[0] ** 2 / 2, image, pairs=200))
print("midpoint defect of x²/2 + phi:   ", convexity_audit(pen.g, image, pairs=200))

# The penalty gradient comes from inverting f: grad phi(x) = f^{-1}(x) - x.
print("\ngrad phi(4) =", penalty_gradient(op, [4.0])[0], "(closed form 1 - 4/2 = -1)")

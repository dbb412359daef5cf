"""Walk up the cpsd hierarchy on the 2 x 2 matrix A(alpha) = [[1, alpha], [alpha, 1]].

Level 1 reproduces the analytic bound 2 / (1 + alpha).  Level 2 is strictly
better and its moment matrix is flat, so the level-2 value is the value of the
whole hierarchy.  Adding a localizing constraint built from the vector
(1, 1) / sqrt(2) pushes the bound further at level 3.

Run with ``python demos/cpsd_levels.py``.
"""
import math

import numpy as np

from factorank.hierarchies import BoundRequest, analytic_cpsd, bound
from factorank.instances import a_alpha

alpha = 0.5
A = a_alpha(alpha)
print(f"A(alpha) with alpha = {alpha}:\n{A}\n")
print(f"analytic bound      {analytic_cpsd(A):.6f}")

for t in (1, 2):
    res = bound(BoundRequest("cpsd", A, t), with_baselines=False)
    print(f"xi_cpsd level {t}     {res.value:.6f}   status {res.status}")
    print(f"    {res.flat_report}")

V = [np.array([1.0, 1.0]) / math.sqrt(2)]
res = bound(BoundRequest("cpsd", A, 3, V=V), with_baselines=False)
print(f"xi_cpsd level 3 + V {res.value:.6f}   (closed form {(5 - math.sqrt(3)) / 2:.6f})")
print("\nA(alpha) has cpsd-rank 2, so none of these bounds is tight.")

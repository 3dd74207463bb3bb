"""
The singular elliptic inverse
=============================

The coupling between density and swirl is mediated by ``f = L(rho)``, the
solution of ``(d_rr + 3/r d_r + d_zz) f = d_r rho / r``.  On a fixed box it
is a sparse solve.  The manufactured pair ``f = exp(-r^2 - z^2)`` gives an
exact answer to compare against.
"""

import numpy as np

from axiboussinesq import singell
from axiboussinesq.cylgrid import ScalarFieldRZ, make_grid

# refinement study: error should drop by four for each halving of h
grids = [make_grid(n, 2 * n, 4.0, -4.0, 4.0) for n in (32, 64, 128)]
for row in singell.convergence_study(grids, 2.0, "L"):
    print(f"h={row['h']:.4f}  error={row['l2_error']:.3e}  order={row['order_estimate']:.2f}")

g = grids[1]
rho = ScalarFieldRZ.from_function(g, singell.manufactured_rho)
sol = singell.op_L(rho)
print("residual", sol.residual_l2)

# The regularised operator adds eps * Delta to the left side.  As eps -> 0 its
# solutions approach the unregularised one.
for eps in (1e-1, 1e-2, 1e-3):
    gap = singell.op_L_regularized(rho, eps).f - sol.f
    print(f"eps={eps:g}  gap={np.sqrt((gap.values ** 2).mean()):.3e}")

# A weighted Hardy-type inequality: the ratio it reports should sit above 1.
print("CKN ratio for the manufactured rho", singell.ckn_check(rho, 2.0).ratio)

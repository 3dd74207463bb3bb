"""
Fields on the half-plane and the axisymmetric operators
=======================================================

A swirl-free axisymmetric field only depends on ``(r, z)``.  We store it
at cell centres of a box ``[0, rmax] x [zmin, zmax]`` and let the parity
tag decide what happens across the axis.
"""

import numpy as np

from axiboussinesq.cylgrid import ODD, ScalarFieldRZ, lp_norm, make_grid
from axiboussinesq.diffops import (biot_savart, curl_axisym, divergence_l2, dr_over_r,
                                   laplacian_axisym, times_r)

g = make_grid(64, 128, 4.0, -4.0, 4.0)
print(g)

# A Gaussian is even in r.  Its 3D Laplacian is (4 r^2 + 4 z^2 - 6) exp(-r^2 - z^2),
# so the discrete one should match that to second order.
gauss = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-r**2 - z**2))
exact = ScalarFieldRZ.from_function(g, lambda r, z: (4 * r**2 + 4 * z**2 - 6) * np.exp(-r**2 - z**2))
print("Laplacian error      ", lp_norm(laplacian_axisym(gauss) - exact))

# d_r f / r stays bounded on the axis for an even field: here it is -2 exp(...)
print("max |d_r f / r + 2f| ", np.abs(dr_over_r(gauss).values + 2 * gauss.values).max())

# Velocity from vorticity.  omega_theta = r * zeta is odd in r; the
# Biot-Savart solve returns v^r (odd) and v^z (even).
zeta = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-4 * (r - 1) ** 2 - 4 * z**2))
v = biot_savart(times_r(zeta))
print("parities             ", v.vr.parity, v.vz.parity)
print("divergence (interior)", divergence_l2(v))

# and back again: the curl of v recovers omega up to discretisation error
om = times_r(zeta)
print("curl round trip      ", lp_norm(curl_axisym(v) - om) / lp_norm(om))
assert om.parity == ODD

"""
Dyadic blocks and Besov norms
=============================

The radial Bessel-like eigenbasis (in r) times cosines (in z) gives every
field a frequency.  A smooth partition of unity in that frequency cuts the
field into dyadic blocks, and Besov norms are weighted sums over blocks.
"""

import numpy as np

from axiboussinesq import lpbesov
from axiboussinesq.cylgrid import lp_norm, make_grid
from axiboussinesq.random_fields import random_bump_fields

g = make_grid(64, 128, 4.0, -4.0, 4.0)
part = lpbesov.build_partition(g)
print("blocks", part.qs)

f = random_bump_fields(3, 1)[0].sample(g)
dec = lpbesov.decompose(f, part)
for q in part.qs:
    print(f"q={q:2d}  ||Delta_q f||_2 = {lp_norm(dec.block(q)):.3e}")

# the blocks add back up to f
print("reconstruction error", lp_norm(dec.reconstruct() - f) / lp_norm(f))

# B^0_{2,2} is comparable to L^2 (almost orthogonality)
print("B^0_{2,2} / L^2", lpbesov.besov_norm(f, 0.0, 2.0, 2.0, part) / lp_norm(f))

# Bernstein: a field living in one block has derivatives of size ~ 2^q
for q in range(1, part.qmax):
    res = lpbesov.bernstein_check(lpbesov.single_block_field(g, q), q, part=part)
    print(f"q={q}  ratio={res.ratio:.3f}")

# low-pass truncation never increases the L^2 norm
print([round(lp_norm(lpbesov.mollify(f, n, part)) / lp_norm(f), 4)
       for n in range(part.qmax + 1)])
assert np.isfinite(lp_norm(f))

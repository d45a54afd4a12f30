"""
B-spline spaces: dimensions, smoothness, refinement
===================================================

Builds univariate spline spaces of varying degree and interelement
smoothness, checks the partition of unity, and represents a function
exactly on a refined space.
"""

import numpy as np

from ietistokes import UnivariateSplineSpace, TensorSplineSpace
from ietistokes.bspline import promote_coefficients

# One space per (degree, smoothness) pair on four elements. Lowering the
# smoothness at the breakpoints adds degrees of freedom.
breaks = np.linspace(0.0, 1.0, 5)
print("degree  smoothness  dim")
for p in (1, 2, 3, 4):
    for s in range(p):
        space = UnivariateSplineSpace(breaks, p, s)
        print("%6d  %10d  %3d" % (p, s, space.dim))

# B-spline bases sum to one everywhere.
space = UnivariateSplineSpace(breaks, 3, 2)
x = np.linspace(0, 1, 101)
ones = space.collocation(x) @ np.ones(space.dim)
print("\npartition of unity, max deviation: %.2e" % np.abs(ones - 1.0).max())

# Knot insertion embeds a space into its uniform refinement exactly: the
# promoted coefficients reproduce the same function.
rng = np.random.default_rng(3)
coeffs = rng.standard_normal(space.dim)
fine = space.refine_uniform()
fine_coeffs = promote_coefficients(space, fine, coeffs)
err = np.abs(space.collocation(x) @ coeffs - fine.collocation(x) @ fine_coeffs).max()
print("refinement reproduces coarse function to %.2e" % err)

# Tensor products combine univariate factors; degrees may differ per axis.
tensor = TensorSplineSpace.from_breakpoints(breaks, breaks, (3, 2), (1, 1))
print("\ntensor space dims: %d x %d, total %d" % (tensor.nx, tensor.ny, tensor.dim))

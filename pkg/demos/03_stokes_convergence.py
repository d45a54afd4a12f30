"""
Taylor-Hood Stokes discretization: convergence study
====================================================

Solves the Stokes equations on the unit square with a smooth manufactured
solution and a monolithic sparse direct solver, and tabulates errors under
uniform refinement. The velocity converges with order degree+2 in L2 and
degree+1 in H1, the pressure with order degree+1 in L2.
"""

import numpy as np

from ietistokes import (
    assemble_global,
    manufactured_pressure,
    manufactured_rhs,
    manufactured_velocity,
    manufactured_velocity_gradient,
    parse_domain,
    taylor_hood_spaces,
    total_errors,
)

mp = parse_domain("grid(1,1)")
degree = 2  # pressure degree; velocities use degree+1

print("level    dofs   H1 velocity     rate   L2 pressure     rate")
prev = None
for level in (1, 2, 3, 4, 5):
    spaces = taylor_hood_spaces(mp, degree, refinement=level)
    glob = assemble_global(mp, spaces, rhs=manufactured_rhs,
                           dirichlet=manufactured_velocity)
    us, ps = glob.solve()
    h1u, l2u, l2p = total_errors(
        mp, spaces, us, ps, exact_u=manufactured_velocity,
        exact_grad_u=manufactured_velocity_gradient,
        exact_p=manufactured_pressure)
    if prev is None:
        rates = ("   -", "   -")
    else:
        rates = ("%.2f" % np.log2(prev[0] / h1u), "%.2f" % np.log2(prev[1] / l2p))
    print("%5d  %6d   %.6e   %s   %.6e   %s"
          % (level, glob.n_dofs, h1u, rates[0], l2p, rates[1]))
    prev = (h1u, l2p)

print("\nexpected rates: %d (H1 velocity) and %d (L2 pressure)"
      % (degree + 1, degree + 1))

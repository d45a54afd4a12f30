"""
IETI-DP solver: iteration counts and condition numbers
======================================================

Solves the same multi-patch Stokes problems with the dual-primal tearing
and interconnecting solver. Each patch is factorized independently, the
patches are coupled through corner values, edge fluxes and pressure
averages, and the interface multiplier system is solved by preconditioned
conjugate gradients with a scaled Dirichlet preconditioner.

The condition number estimate comes from the CG Lanczos recurrence; it
grows only slowly under refinement.
"""

import numpy as np

from ietistokes import (
    assemble_global,
    manufactured_rhs,
    manufactured_velocity,
    parse_domain,
    solve_stokes_ieti,
    taylor_hood_spaces,
)

# Iteration counts over a refinement sweep on a curved 16-patch domain.
print("quarter annulus, pressure degree 2")
print("level    dofs   iterations   kappa")
for level in (1, 2, 3):
    mp = parse_domain("quarter_annulus(1,2,4,4)")
    spaces = taylor_hood_spaces(mp, 2, refinement=level)
    us, ps, rep = solve_stokes_ieti(mp, spaces, rhs=manufactured_rhs,
                                    dirichlet=manufactured_velocity, tol=1e-8)
    n = sum(2 * t.vel.dim + t.pre.dim for t in spaces)
    print("%5d  %6d   %10d   %5.2f" % (level, n, rep.iterations, rep.kappa))

# The decomposed solve agrees with the monolithic direct one.
mp = parse_domain("grid(2,2)")
spaces = taylor_hood_spaces(mp, 2, refinement=2)
glob = assemble_global(mp, spaces, rhs=manufactured_rhs,
                       dirichlet=manufactured_velocity)
us_ref, ps_ref = glob.solve()
us, ps, rep = solve_stokes_ieti(mp, spaces, rhs=manufactured_rhs,
                                dirichlet=manufactured_velocity, tol=1e-10,
                                systems=glob.systems)
worst = max(np.abs(us[k][c] - us_ref[k][c]).max()
            for k in range(len(us)) for c in (0, 1))
print("\ngrid(2,2): IETI vs monolithic, max velocity coefficient "
      "difference %.2e after %d iterations" % (worst, rep.iterations))

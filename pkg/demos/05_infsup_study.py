"""
Pressure inf-sup studies
========================

The stability of the discrete Stokes problem is governed by the inf-sup
constant of the velocity/pressure pair, measured here through the extreme
generalized eigenvalues of the pressure Schur complement. Two experiments:

* on a fixed square the condition number kappa is essentially independent
  of both the grid size and the degree;
* stretching the domain degrades the inf-sup constant, so kappa grows
  with the aspect ratio.
"""

from ietistokes import InfSupStudy

print("unit square: kappa over (degree, level)")
rows = InfSupStudy("grid(1,1)", degrees=[1, 2, 3], levels=[1, 2, 3]).run()
print("degree  level   kappa    beta   delta_h    dofs")
for r in rows:
    print("%6d  %5d  %6.3f  %6.4f  %8.4f  %6d"
          % (r["degree"], r["level"], r["kappa"], r["beta"], r["delta_h"],
             r["dofs"]))
kappas = [r["kappa"] for r in rows]
print("spread: %.1f%%" % (100 * (max(kappas) - min(kappas)) / min(kappas)))

print("\nstrips of growing aspect ratio (degree 2, level 1)")
print("length   kappa    beta")
for length in (1, 2, 4, 8):
    cell = InfSupStudy("strip(%d)" % length, [2], [1]).run_cell(2, 1)
    print("%6d  %6.3f  %6.4f" % (length, cell["kappa"], cell["beta"]))

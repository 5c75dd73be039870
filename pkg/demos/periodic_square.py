"""Periodic-in-x1 manufactured problem next to the full-Dirichlet one.

Faces on x1 = 0 and x1 = 1 are treated as interior faces of a periodic mesh.

    python3 demos/periodic_square.py
"""

from c0ipm.exact import sinusoid_2d
from c0ipm.problems import CONVERGENCE_MATERIAL, convergence_study, square_meshes, study_rates

P, LEVELS = 3, 4
meshes = square_meshes(P, LEVELS)
for periodic in (False, True):
    results = convergence_study(meshes, CONVERGENCE_MATERIAL, sinusoid_2d(), 100.0, periodic=periodic)
    ru, rp = study_rates(results)
    label = "periodic " if periodic else "dirichlet"
    print(f"{label} u rates {[round(r, 2) for r in ru]} phi rates {[round(r, 2) for r in rp]}")

"""Manufactured-solution convergence on the unit square.

Prints the L2 errors and observed rates of u and phi for p = 1..4, uncoupled
and with full electromechanical coupling.

    python3 demos/convergence_study.py
"""

from c0ipm.exact import sinusoid_2d
from c0ipm.problems import CONVERGENCE_MATERIAL, convergence_study, coupling_variant, square_meshes, study_rates

LEVELS = 4

for coupling in ("uncoupled", "full"):
    params = coupling_variant(CONVERGENCE_MATERIAL, coupling)
    print(f"== {coupling}")
    for p in (1, 2, 3, 4):
        results = convergence_study(square_meshes(p, LEVELS), params, sinusoid_2d(), alpha=100.0)
        ru, rp = study_rates(results)
        errs = " ".join(f"{r.err_u:.2e}" for r in results)
        print(f"p={p}  u errors {errs}  last rates u {ru[-1]:5.2f} phi {rp[-1]:5.2f}")

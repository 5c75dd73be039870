"""Open versus closed electrical circuit on the cantilever.

The closed circuit has an electrode of unknown but uniform potential on the
bottom side; the open circuit only grounds the free end.

    python3 demos/circuit_comparison.py
"""

import numpy as np

from c0ipm.problems import CIRCUIT_MATERIAL, beam_e_prime, beam_thickness, solve_cantilever

for a_prime in (2.0, 4.0, 8.0):
    open_ = beam_e_prime(a_prime, "full", "open", CIRCUIT_MATERIAL)
    closed = beam_e_prime(a_prime, "full", "closed", CIRCUIT_MATERIAL)
    sol, _ = solve_cantilever(CIRCUIT_MATERIAL, beam_thickness(a_prime, CIRCUIT_MATERIAL), "closed")
    V = sol.phi[sol.system.bdata.electrode_groups[0]]
    print(f"a'={a_prime:g}: e' open {open_.e_prime:.4f}, closed {closed.e_prime:.4f}, "
          f"electrode potential {V[0]:.4e} (spread {np.ptp(V):.1e})")

"""Size-dependent effective piezoelectric constant of a bending cantilever.

Compares the computed normalized constant e' against the closed-form curves
for a purely flexoelectric and a flexo-piezoelectric beam.

    python3 demos/cantilever_size_effect.py
"""

from c0ipm.problems import analytic_e_prime, beam_e_prime

print(f"{'a_prime':>8} {'mode':>6} {'computed':>9} {'closed form':>11}")
for mode in ("flexo", "full"):
    for a_prime in (1.0, 2.0, 4.0, 8.0, 16.0):
        rep = beam_e_prime(a_prime, mode)
        print(f"{a_prime:8g} {mode:>6} {rep.e_prime:9.4f} {float(analytic_e_prime(a_prime, mode)):11.4f}")

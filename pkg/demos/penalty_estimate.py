"""Penalty parameter from the generalized eigenvalue bound.

Prints the largest eigenvalue, the equivalent alpha in ``beta = alpha E l^2 / h``
and checks coercivity of the mechanical block at the recommended beta.

    python3 demos/penalty_estimate.py
"""

import numpy as np

from c0ipm.material import build_material_tensors
from c0ipm.mesh import build_connectivity
from c0ipm.penalty import assemble_penalty_forms, estimate_penalty, mechanical_block_min_eigenvalue
from c0ipm.problems import CONVERGENCE_MATERIAL, square_meshes

mat = build_material_tensors(CONVERGENCE_MATERIAL.uncoupled(), 2)
for p in (2, 3, 4):
    for mesh in square_meshes(p, 2, 2):
        faces, _ = build_connectivity(mesh)
        est = estimate_penalty(assemble_penalty_forms(mesh, mat, faces))
        lo, hi = mesh.bounding_box()
        nodes = np.flatnonzero(np.any(np.isclose(mesh.coords, lo) | np.isclose(mesh.coords, hi), axis=1))
        fixed = (nodes[:, None] * 2 + np.arange(2)).ravel()
        eig = mechanical_block_min_eigenvalue(mesh, mat, est.beta, fixed, faces)
        print(f"p={p} elements {mesh.n_elements:3d}: lambda_max {est.lambda_max:9.3f} "
              f"alpha_eq {est.alpha_equivalent:7.3f} beta {est.beta:9.3f} min eig {eig:.2e}")

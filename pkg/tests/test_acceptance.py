"""End-to-end acceptance checks; each prints one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the lines live;
they are repeated in the terminal summary either way).
"""

import numpy as np
import pytest
import scipy.sparse as sp

from c0ipm.assembly import _group_faces, apply_constraints, assemble, interior_face_geometry
from c0ipm.config import ProblemSpec
from c0ipm.material import build_material_tensors
from c0ipm.mesh import BoundarySpec, apply_boundary_spec, build_connectivity, everywhere, on_plane, structured_mesh
from c0ipm.penalty import assemble_penalty_forms, estimate_penalty, mechanical_block_min_eigenvalue
from c0ipm.presets import (
    beta_sweep, cantilever, circuit_compare, convergence2d, convergence2d_coupled, convergence3d,
    patch_test, periodic2d,
)
from c0ipm.problems import CONVERGENCE_MATERIAL, square_meshes
from c0ipm.refelem import build_reference_element


def _run(preset, tmp_path, **kw):
    res = preset(ProblemSpec(out=str(tmp_path), **kw))
    return res, "; ".join(line for line in res.lines if line.startswith(("PASS", "FAIL")))


def test_criterion_1_patch_test(tmp_path, criterion):
    res, detail = _run(patch_test, tmp_path, base_divisions=4)
    assert criterion(1, res.passed and len(res.lines) == 3, detail)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_criterion_2_uncoupled_rates(tmp_path, criterion, p):
    res, detail = _run(convergence2d, tmp_path, p=p, levels=4, alpha=100.0)
    assert criterion(2, res.passed, f"p={p} {detail}")


@pytest.mark.parametrize("p", [2, 3, 4])
def test_criterion_3_coupled_rates(tmp_path, criterion, p):
    res, detail = _run(convergence2d_coupled, tmp_path, p=p, levels=4, alpha=100.0)
    assert criterion(3, res.passed, f"p={p} {detail}")


def test_criterion_4_linear_elements_do_not_converge(tmp_path, criterion):
    res, detail = _run(convergence2d, tmp_path, p=1, levels=4, alpha=100.0)
    assert criterion(4, res.flags["not_converged"], detail)


def test_criterion_5_beta_robustness(tmp_path, criterion):
    res4, d4 = _run(beta_sweep, tmp_path, p=4, levels=4, alphas=(100.0, 1e4))
    res3, d3 = _run(beta_sweep, tmp_path, p=3, levels=4, alphas=(1.0, 10.0))
    assert criterion(5, res4.passed and res3.passed, f"p=4 {d4}; p=3 {d3}")


def test_criterion_6_penalty_estimator(criterion):
    params = CONVERGENCE_MATERIAL.uncoupled()
    mat = build_material_tensors(params, 2)

    def lam(mesh, m=mat):
        return estimate_penalty(assemble_penalty_forms(mesh, m)).lambda_max

    coarse, fine = square_meshes(3, 2, 2)
    l_ratio = lam(coarse, build_material_tensors(params.with_(l=2 * params.l), 2)) / lam(coarse)
    h_ratio = lam(fine) / lam(coarse)

    mesh = structured_mesh((0, 0), (1, 1), 4, "triangle", 3, "alternating")
    faces, _ = build_connectivity(mesh)
    lam_max = estimate_penalty(assemble_penalty_forms(mesh, mat, faces)).lambda_max
    lo, hi = mesh.bounding_box()
    nodes = np.flatnonzero(np.any(np.isclose(mesh.coords, lo) | np.isclose(mesh.coords, hi), axis=1))
    fixed = (nodes[:, None] * 2 + np.arange(2)).ravel()
    safe = mechanical_block_min_eigenvalue(mesh, mat, 2 * lam_max, fixed, faces)
    weak = mechanical_block_min_eigenvalue(mesh, mat, 0.01 * lam_max, fixed, faces)

    ok = abs(l_ratio / 4 - 1) <= 1e-8 and 1.5 <= h_ratio <= 2.5 and safe > 0 and weak < 0
    detail = (f"l->2l ratio {l_ratio:.12f}, h->h/2 ratio {h_ratio:.3f}, "
              f"min eig at 2*lambda {safe:.2e}, at 0.01*lambda {weak:.2e}")
    assert criterion(6, ok, detail)


def test_criterion_7_cantilever(tmp_path, criterion):
    res, detail = _run(cantilever, tmp_path, a_prime=(1.76, 2.0, 4.0, 8.0))
    assert criterion(7, res.passed and len(res.lines) == 8, detail)


def test_criterion_8_circuits(tmp_path, criterion):
    res, detail = _run(circuit_compare, tmp_path, a_prime=(2.0, 4.0))
    assert criterion(8, res.passed and len(res.lines) == 4, detail)


def test_criterion_9_periodicity(tmp_path, criterion):
    res, detail = _run(periodic2d, tmp_path, p=3, levels=4)
    assert criterion(9, res.passed, detail)


@pytest.mark.slow
@pytest.mark.parametrize("p", [2, 3])
def test_criterion_10_3d_convergence(tmp_path, criterion, p):
    res, detail = _run(convergence3d, tmp_path, p=p, levels=3)
    assert criterion(10, res.passed, f"p={p} {detail}")


def _relative_asymmetry(K):
    K = sp.csr_matrix(K)
    return abs(K - K.T).max() / abs(K).max()


def test_criterion_11_structural_invariants(criterion):
    mat = build_material_tensors(CONVERGENCE_MATERIAL, 2)
    mesh = structured_mesh((0, 0), (1, 1), 3, "triangle", 3, "alternating")
    faces, _ = build_connectivity(mesh)
    spec = BoundarySpec(u_dirichlet=on_plane(0, 0.0), du_dirichlet=on_plane(1, 0.0), phi_dirichlet=everywhere)
    system = assemble(apply_boundary_spec(mesh, faces, spec), mat, 100.0)
    asym = max(_relative_asymmetry(system.K), _relative_asymmetry(apply_constraints(system).K))

    free = assemble(apply_boundary_spec(mesh, faces, BoundarySpec()), mat, 100.0).K
    x = mesh.coords
    rigid = []
    for v in (np.c_[np.ones(len(x)), np.zeros(len(x))], np.c_[np.zeros(len(x)), np.ones(len(x))],
              np.c_[-x[:, 1], x[:, 0]]):
        full = np.zeros(free.shape[0])
        full[: v.size] = v.ravel()
        rigid.append(np.abs(free @ full).max() / (abs(free) @ np.abs(full)).max())
    kernel = max(rigid)

    flip = 0.0
    for shape, n_sd, p, n in (("triangle", 2, 4, 3), ("quadrilateral", 2, 3, 3), ("hexahedron", 3, 2, 2)):
        m = structured_mesh((0.0,) * n_sd, (1.0,) * n_sd, n, shape, p,
                            **({"pattern": "alternating"} if shape == "triangle" else {}))
        conn, _ = build_connectivity(m)
        for key, sel in _group_faces(conn, conn.interior):
            gL, gR = interior_face_geometry(m, conn, sel, key)
            flip = max(flip, np.abs(gL.x - gR.x).max() / conn.h[sel].min(),
                       np.abs(gL.normal + gR.normal).max())

    unity = 0.0
    for shape, p in [("triangle", p) for p in (1, 2, 3, 4)] + [("quadrilateral", 3), ("hexahedron", 2)]:
        re = build_reference_element(shape, p)
        for tab in [(re.N, re.dN, re.d2N)] + [(f.N, f.dN, f.d2N) for f in re.faces]:
            N, dN, d2N = tab
            unity = max(unity, np.abs(N.sum(axis=1) - 1.0).max() / 1e-12, np.abs(dN.sum(axis=1)).max() / 1e-10,
                        np.abs(d2N.sum(axis=1)).max() / 1e-8)

    ok = asym < 1e-12 and kernel < 1e-10 and flip < 1e-12 and unity < 1.0
    detail = (f"asymmetry {asym:.1e}, rigid-body residual {kernel:.1e}, face flip mismatch {flip:.1e}, "
              f"partition of unity at {unity:.1e} of its bounds")
    assert criterion(11, ok, detail)

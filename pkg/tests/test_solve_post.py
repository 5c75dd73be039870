import numpy as np
import pytest

from c0ipm.assembly import apply_constraints, assemble
from c0ipm.errors import DegenerateError, DomainError, SolverError
from c0ipm.exact import ExactField, polynomial_field, sinusoid_2d
from c0ipm.material import MaterialParameters, build_material_tensors
from c0ipm.mesh import BoundarySpec, apply_boundary_spec, build_connectivity, everywhere, structured_mesh
from c0ipm.post import (
    BeamReport, convergence_rates, energies, export, k_effective, l2_error, l2_error_norms, write_beam_csv,
    write_convergence_csv,
)
from c0ipm.problems import (
    BEAM_MATERIAL, CONVERGENCE_MATERIAL, beam_e_prime, beam_thickness, convergence_rows, convergence_study,
    manufactured_spec, solve_cantilever, solve_manufactured, square_meshes, study_rates,
)
from c0ipm.solver import SolutionField, interpolate, locate, solve, solve_linear


def _manufactured_system(p=3, n=4, params=CONVERGENCE_MATERIAL, exact=None):
    mesh = structured_mesh((0, 0), (1, 1), n, "triangle", p, "alternating")
    mat = build_material_tensors(params, 2)
    exact = exact or sinusoid_2d()
    conn, _ = build_connectivity(mesh)
    bd = apply_boundary_spec(mesh, conn, manufactured_spec(mesh, exact, mat))
    return assemble(bd, mat, lambda h: 100 * mat.E * mat.l2 / h), exact


def test_zero_load_gives_zero_solution():
    mesh = structured_mesh((0, 0), (1, 1), 2, "triangle", 2)
    conn, _ = build_connectivity(mesh)
    mat = build_material_tensors(CONVERGENCE_MATERIAL, 2)
    bd = apply_boundary_spec(mesh, conn, BoundarySpec(u_dirichlet=everywhere, phi_dirichlet=everywhere))
    sol = solve(assemble(bd, mat, 100.0))
    assert not np.any(sol.u) and not np.any(sol.phi)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_polynomial_solution_is_reproduced(p):
    exact = polynomial_field(2, p, seed=p)
    mesh = structured_mesh((0, 0), (1, 1), 4, "triangle", p)
    sol = solve_manufactured(mesh, CONVERGENCE_MATERIAL, exact)
    assert np.abs(sol.u - exact.u(mesh.coords)).max() < 1e-8 * np.abs(exact.u(mesh.coords)).max()
    assert np.abs(sol.phi - exact.phi(mesh.coords)).max() < 1e-8 * np.abs(exact.phi(mesh.coords)).max()


def test_residual_and_galerkin_functional(rng):
    system, _ = _manufactured_system()
    cs = apply_constraints(system)
    x, info = solve_linear(cs.K, cs.f, return_info=True)
    assert info.residual < 1e-10
    r = cs.f - cs.K @ x
    nf = np.linalg.norm(cs.f)
    for _ in range(20):
        v = rng.standard_normal(len(x))
        v /= np.linalg.norm(v)
        assert abs(v @ r) < 1e-10 * nf


def test_singular_system_is_reported():
    mesh = structured_mesh((0, 0), (1, 1), 2, "triangle", 2)
    conn, _ = build_connectivity(mesh)
    mat = build_material_tensors(CONVERGENCE_MATERIAL, 2)
    bd = apply_boundary_spec(mesh, conn, BoundarySpec(body_force=lambda x: np.ones_like(x)))
    with pytest.raises(SolverError, match="singular"):
        solve(assemble(bd, mat, 100.0))


def test_interpolant_error_and_evaluation(rng):
    p = 3
    exact = polynomial_field(2, p, seed=5)
    system, _ = _manufactured_system(p, 2, exact=exact)
    sol = interpolate(system, exact)
    assert l2_error(sol, exact, "u") < 1e-12
    assert l2_error(sol, exact, "phi") < 1e-12
    pts = rng.random((7, 2))
    u, ph = sol.evaluate(pts)
    np.testing.assert_allclose(u, exact.u(pts), atol=1e-12)
    np.testing.assert_allclose(ph, exact.phi(pts), atol=1e-12)
    with pytest.raises(DomainError):
        locate(system.mesh, [[1.5, 0.5]])


def test_error_against_zero_is_the_norm():
    field = ExactField(["x", "0"], "x*y")
    system, _ = _manufactured_system(2, 2, exact=field)
    sol = interpolate(system, field)
    zero = ExactField(["0", "0"], "0")
    # int x^2 = 1/3 and int x^2 y^2 = 1/9 over the unit square
    assert l2_error(sol, zero, "u") == pytest.approx(np.sqrt(1 / 3), rel=1e-13)
    assert l2_error(sol, zero, "phi") == pytest.approx(1 / 3, rel=1e-13)
    assert l2_error_norms(sol, None, "u").absolute == l2_error(sol, zero, "u")


def test_error_homogeneity():
    system, exact = _manufactured_system(2, 2)
    sol = solve(system)
    double = ExactField([f"2*({c})" for c in exact.u_expr], f"2*({exact.phi_expr})")
    scaled = SolutionField(2 * sol.u, 2 * sol.phi, sol.multipliers, system, 2 * sol.vector)
    assert l2_error(scaled, double, "u") == pytest.approx(2 * l2_error(sol, exact, "u"), rel=1e-12)
    assert l2_error(scaled, double, "phi") == pytest.approx(2 * l2_error(sol, exact, "phi"), rel=1e-12)
    assert l2_error(sol, exact, "u", relative=True) == pytest.approx(l2_error(sol, exact, "u"), rel=1e-3)


def test_convergence_rate_examples():
    assert convergence_rates([1e-2, 1.25e-3], [1.0, 0.5]) == pytest.approx([3.0])
    assert convergence_rates([0.1, 0.1], [1.0, 0.5]) == pytest.approx([0.0])
    assert convergence_rates([1e-2, 1e-3], [0.2, 0.1]) == pytest.approx([np.log2(10)])
    assert np.log2(10) == pytest.approx(3.3219, abs=1e-4)
    with pytest.raises(ValueError):
        convergence_rates([1e-2, 0.0], [1.0, 0.5])
    with pytest.raises(ValueError):
        convergence_rates([1e-2, 1e-3], [0.5, 0.5])


@pytest.mark.parametrize("p", [2, 3])
def test_uncoupled_potential_rate_is_optimal(p):
    meshes = square_meshes(p, 4)
    results = convergence_study(meshes, CONVERGENCE_MATERIAL.uncoupled(), sinusoid_2d())
    _, rp = study_rates(results)
    assert abs(rp[-1] - (p + 1)) <= 0.2


def test_effective_coupling_edge_cases():
    a = beam_thickness(2.0)
    sol, mat = solve_cantilever(BEAM_MATERIAL.uncoupled(), a, "open", 2, divisions=(10, 2))
    assert k_effective(sol, mat) == 0.0
    elec, mech = energies(sol, mat)
    assert elec == 0.0 and mech > 0
    unloaded, mat = solve_cantilever(BEAM_MATERIAL, a, "open", 2, divisions=(10, 2), force=0.0)
    with pytest.raises(DegenerateError):
        k_effective(unloaded, mat)


@pytest.mark.parametrize("mode,target", [("flexo", np.sqrt(3.0)), ("full", 2.0)])
def test_normalized_piezo_constant_at_a_prime_2(mode, target):
    rep = beam_e_prime(2.0, mode)
    assert rep.a_prime == pytest.approx(2.0)
    assert abs(rep.e_prime - target) <= 0.05 * target


def test_size_effect_vanishes_for_thick_beams():
    rep = beam_e_prime(64.0, "full")
    assert abs(rep.e_prime - 1.0) <= 0.05


def test_csv_formats(tmp_path):
    results = convergence_study(square_meshes(2, 2), CONVERGENCE_MATERIAL, sinusoid_2d())
    path = tmp_path / "conv.csv"
    write_convergence_csv(path, convergence_rows(results))
    lines = path.read_bytes().split(b"\n")
    assert lines[0] == b"level,h,ndof,err_u,err_phi,rate_u,rate_phi"
    assert b"\r" not in path.read_bytes()
    assert len(lines) == 4 and lines[-1] == b""
    assert lines[1].endswith(b",,")
    beam = tmp_path / "beam.csv"
    write_beam_csv(beam, [BeamReport(2.0, 0.1, 1.97, "open")] * 4)
    text = beam.read_text().splitlines()
    assert text[0] == "a_prime,e_prime,circuit" and len(text) == 5
    assert text[1] == "2.0,1.97,open"


def test_export_is_deterministic(tmp_path):
    paths = []
    for k in range(2):
        system, _ = _manufactured_system(2, 2)
        sol = solve(system)
        paths.append((export(sol, None, tmp_path / f"f{k}.txt", "field-dump"),
                      export(None, [BeamReport(1.0, 0.5, 1.2, "closed")], tmp_path / f"b{k}.csv")))
    for a, b in zip(*paths):
        assert a.read_bytes() == b.read_bytes()
    row = (tmp_path / "f0.txt").read_text().splitlines()[0].split()
    assert len(row) == 5
    with pytest.raises(ValueError):
        export(None, [], tmp_path / "x", "vtk")


def test_export_reports_the_path_on_failure(tmp_path):
    with pytest.raises(OSError, match="missing"):
        export(None, [BeamReport(1.0, 0.5, 1.2, "open")], tmp_path / "missing" / "b.csv")

"""Ready-made problem setups: manufactured solutions, cantilever beams, circuits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import assemble
from .exact import ExactField, exact_double_traction, manufactured_source
from .material import MaterialParameters, build_material_tensors
from .mesh import (
    BoundarySpec, Mesh, any_of, apply_boundary_spec, build_connectivity, everywhere, on_plane,
    structured_mesh,
)
from .penalty import beta_from_formula
from .post import BeamReport, convergence_rates, effective_piezo, l2_error_norms
from .solver import SolutionField, solve

# material of the manufactured-solution studies
CONVERGENCE_MATERIAL = MaterialParameters(
    E=2.5, nu=0.25, l=1.1, kappa=1.21, eL=7.2, eT=1.33, eS=1.73, muL=1.5, muT=1.34, muS=5.47,
    piezo_axis=0)

# cantilever with transverse piezoelectricity along x2 (SI units)
BEAM_MATERIAL = MaterialParameters(E=100e9, nu=0.0, l=0.0, kappa=11e-9, eT=-4.4, muT=1e-6, piezo_axis=1)

CIRCUIT_MATERIAL = MaterialParameters(E=100e9, nu=0.37, l=0.0, kappa=(11e-9, 12.48e-9), eT=-4.4,
                                      muT=1e-6, muL=1e-6, piezo_axis=1)

BEAM_BETA = 100.0
BEAM_ASPECT = 20.0


def coupling_variant(params: MaterialParameters, coupling):
    """``"uncoupled"``, ``"piezo"`` (no flexoelectricity), ``"flexo"`` (no piezoelectricity) or ``"full"``."""
    if coupling == "uncoupled":
        return params.uncoupled()
    if coupling == "piezo":
        return params.without_flexo()
    if coupling == "flexo":
        return params.with_(eL=0.0, eT=0.0, eS=0.0)
    if coupling == "full":
        return params
    raise ValueError(f"unknown coupling {coupling!r}")


def square_meshes(p, levels, base=2, pattern="alternating"):
    """Nested triangle meshes of the unit square."""
    return [structured_mesh((0.0, 0.0), (1.0, 1.0), base * 2 ** k, "triangle", p, pattern)
            for k in range(levels)]


def cube_meshes(p, levels, base=1, size=0.5):
    return [structured_mesh((0.0,) * 3, (size,) * 3, base * 2 ** k, "hexahedron", p)
            for k in range(levels)]


@dataclass
class LevelResult:
    level: int
    h: float
    ndof: int
    err_u: float
    err_phi: float
    rel_u: float
    rel_phi: float
    solution: SolutionField | None = None


def manufactured_spec(mesh: Mesh, exact: ExactField, mat, periodic=False):
    """First Dirichlet, second Neumann and Dirichlet potential from ``exact``.

    With ``periodic`` the mesh is periodic in x1 and the data act on the
    bottom and top sides only.
    """
    body, charge = manufactured_source(exact, mat)
    if periodic:
        lo, hi = mesh.bounding_box()
        tol = 1e-9 * float(np.max(hi - lo))
        where = any_of(on_plane(1, lo[1], tol), on_plane(1, hi[1], tol))
        extra = dict(periodic=[(0, float(hi[0] - lo[0]))])
    else:
        where, extra = everywhere, {}
    return BoundarySpec(u_dirichlet=where, phi_dirichlet=where, g1=exact.u, g3=exact.phi,
                        r_n=exact_double_traction(exact, mat), body_force=body, charge=charge, **extra)


def solve_manufactured(mesh: Mesh, params: MaterialParameters, exact: ExactField, alpha=100.0,
                       beta=None, periodic=False):
    """Solve the manufactured problem; ``beta`` overrides ``alpha E l^2 / h``."""
    mat = build_material_tensors(params, mesh.n_sd)
    conn, _ = build_connectivity(mesh)
    bd = apply_boundary_spec(mesh, conn, manufactured_spec(mesh, exact, mat, periodic))
    if beta is None:
        beta = lambda h: beta_from_formula(alpha, mat.E, mat.l, h)  # noqa: E731
    return solve(assemble(bd, mat, beta))


def convergence_study(meshes, params, exact, alpha=100.0, periodic=False, keep=False):
    results = []
    for k, mesh in enumerate(meshes):
        sol = solve_manufactured(mesh, params, exact, alpha, periodic=periodic)
        eu = l2_error_norms(sol, exact, "u")
        ep = l2_error_norms(sol, exact, "phi")
        h = float(mesh.diameters().max())
        results.append(LevelResult(k, h, int(sol.system.dofmap.n_dofs), eu.absolute, ep.absolute,
                                   eu.relative, ep.relative, sol if keep else None))
    return results


def study_rates(results):
    """(rates_u, rates_phi) between consecutive levels."""
    h = [r.h for r in results]
    return (convergence_rates([r.err_u for r in results], h),
            convergence_rates([r.err_phi for r in results], h))


def convergence_rows(results):
    ru, rp = study_rates(results) if len(results) > 1 else ([], [])
    rows = []
    for k, r in enumerate(results):
        rows.append((r.level, r.h, r.ndof, r.err_u, r.err_phi,
                     ru[k - 1] if k else None, rp[k - 1] if k else None))
    return rows


# ---------------------------------------------------------------------------
# cantilever

def beam_thickness(a_prime, params=BEAM_MATERIAL):
    """Thickness giving the normalized size ``a' = -a e_T / mu_T``."""
    return a_prime * params.muT / (-params.eT)


def solve_cantilever(params: MaterialParameters, a, circuit="open", p=4, divisions=(40, 2),
                     beta=BEAM_BETA, force=1.0):
    """Beam (0, 20a) x (-a/2, a/2), clamped at x1 = 0, tip load at (L, a/2).

    Open circuit grounds x1 = L; closed circuit grounds the top side and
    turns the bottom side into an electrode of unknown potential.
    """
    L = BEAM_ASPECT * a
    tol = 1e-9 * a
    mat = build_material_tensors(params, 2)
    mesh = structured_mesh((0.0, -a / 2), (L, a / 2), divisions, "triangle", p)
    conn, _ = build_connectivity(mesh)
    common = dict(u_dirichlet=on_plane(0, 0.0, tol), point_loads=[((L, a / 2), (0.0, -force))])
    if circuit == "open":
        spec = BoundarySpec(phi_dirichlet=on_plane(0, L, tol), **common)
    elif circuit == "closed":
        spec = BoundarySpec(phi_dirichlet=on_plane(1, a / 2, tol), electrodes=[on_plane(1, -a / 2, tol)],
                            **common)
    else:
        raise ValueError(f"circuit must be 'open' or 'closed', got {circuit!r}")
    bd = apply_boundary_spec(mesh, conn, spec)
    return solve(assemble(bd, mat, beta)), mat


def beam_e_prime(a_prime, coupling="full", circuit="open", params=BEAM_MATERIAL, p=4):
    """Normalized effective piezoelectric constant of the cantilever.

    The companion solve keeps the piezoelectric tensor and drops the
    flexoelectric one, so it is meaningful for the pure flexoelectric beam too.
    """
    a = beam_thickness(a_prime, params)
    sol, mat = solve_cantilever(coupling_variant(params, coupling), a, circuit, p)
    comp, comp_mat = solve_cantilever(coupling_variant(params, "piezo"), a, circuit, p)
    return effective_piezo(sol, mat, comp, comp_mat, a, circuit)


def analytic_e_prime(a_prime, coupling="full"):
    """Closed-form size effect: ``sqrt(12) / a'`` or ``sqrt(1 + 12 / a'^2)``."""
    a_prime = np.asarray(a_prime, dtype=float)
    if coupling == "flexo":
        return np.sqrt(12.0 / a_prime ** 2)
    return np.sqrt(1.0 + 12.0 / a_prime ** 2)


__all__ = [
    "BEAM_MATERIAL", "CIRCUIT_MATERIAL", "CONVERGENCE_MATERIAL", "BeamReport", "LevelResult",
    "analytic_e_prime", "beam_e_prime", "beam_thickness", "convergence_rows", "convergence_study",
    "coupling_variant", "cube_meshes", "manufactured_spec", "solve_cantilever", "solve_manufactured",
    "square_meshes", "study_rates",
]

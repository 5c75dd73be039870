"""Experiment pipelines run by the command line interface.

Every preset writes CSV reports into the output directory and evaluates an
acceptance gate; ``PresetResult.passed`` is ``False`` when a gate fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ProblemSpec
from .errors import ParameterError, SolverError
from .exact import polynomial_field, sinusoid_2d, sinusoid_3d
from .material import build_material_tensors
from .mesh import read_mesh, structured_mesh
from .penalty import assemble_penalty_forms, estimate_penalty, mechanical_block_min_eigenvalue
from .post import _write_csv, write_beam_csv, write_convergence_csv
from .problems import (
    CIRCUIT_MATERIAL, CONVERGENCE_MATERIAL, BEAM_MATERIAL, analytic_e_prime, beam_e_prime,
    convergence_rows, convergence_study, coupling_variant, cube_meshes, solve_manufactured,
    square_meshes, study_rates,
)


@dataclass
class PresetResult:
    name: str
    passed: bool = True
    files: list = field(default_factory=list)
    lines: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def check(self, ok, message):
        self.lines.append(("PASS " if ok else "FAIL ") + message)
        self.passed &= bool(ok)
        return ok


def _out(spec: ProblemSpec, name):
    path = Path(spec.out)
    path.mkdir(parents=True, exist_ok=True)
    return path / name


def _material(spec, default, coupling_default):
    params = spec.material or default
    return coupling_variant(params, spec.coupling or coupling_default)


def _alpha_for(spec):
    if spec.beta_mode == "explicit":
        raise ParameterError("this preset scales beta with h; use alpha or beta_mode=estimated")
    if spec.beta_mode == "estimated":
        return estimated_alpha(spec)
    return spec.alpha


def estimated_alpha(spec, safety=2.0):
    """Equivalent alpha of the recommended beta on the coarsest square mesh."""
    params = (spec.material or CONVERGENCE_MATERIAL)
    mesh = square_meshes(spec.p or 3, 1, spec.base_divisions or 2, spec.pattern)[0]
    est = estimate_penalty(assemble_penalty_forms(mesh, build_material_tensors(params, 2)), safety=safety)
    return est.beta * est.h / (params.E * params.l ** 2)


# ---------------------------------------------------------------------------

def patch_test(spec: ProblemSpec) -> PresetResult:
    res = PresetResult("patch-test")
    params = _material(spec, CONVERGENCE_MATERIAL, "full")
    rows = []
    for p in ([spec.p] if spec.p else [2, 3, 4]):
        mesh = structured_mesh((0.0, 0.0), (1.0, 1.0), spec.base_divisions or 4, "triangle", p, spec.pattern)
        exact = polynomial_field(2, p, seed=p)
        sol = solve_manufactured(mesh, params, exact, _alpha_for(spec))
        eu = np.abs(sol.u - exact.u(mesh.coords)).max() / np.abs(exact.u(mesh.coords)).max()
        ep = np.abs(sol.phi - exact.phi(mesh.coords).ravel()).max() / np.abs(exact.phi(mesh.coords)).max()
        rows.append((p, float(eu), float(ep)))
        res.check(max(eu, ep) < 1e-8, f"p={p} max nodal error u {eu:.2e} phi {ep:.2e} < 1e-8")
    path = _out(spec, "patch_test.csv")
    _write_csv(path, ["p", "max_err_u", "max_err_phi"], rows)
    res.files.append(path)
    return res


def _convergence(spec, name, coupling, gates):
    res = PresetResult(name)
    params = _material(spec, CONVERGENCE_MATERIAL, coupling)
    p = spec.p or 3
    levels = spec.levels or 4
    if spec.mesh:
        raise ParameterError("convergence presets build their own nested meshes")
    meshes = square_meshes(p, levels, spec.base_divisions or 2, spec.pattern)
    results = convergence_study(meshes, params, sinusoid_2d(), _alpha_for(spec))
    path = _out(spec, f"{name}_p{p}.csv")
    write_convergence_csv(path, convergence_rows(results))
    res.files.append(path)
    if levels < 2:
        res.lines.append("single level: no rates")
        return res
    ru, rp = study_rates(results)
    res.lines.append(f"p={p} last rates u {ru[-1]:.2f} phi {rp[-1]:.2f}")
    reduction = results[0].err_u / results[-1].err_u
    if p == 1:
        res.flags["not_converged"] = bool(reduction < 10.0)
        res.check(reduction < 10.0, f"p=1 u error reduced only {reduction:.2f}x over "
                                    f"{levels - 1} refinements (< 10)")
    gates(res, p, ru[-1], rp[-1])
    return res


def _gates_uncoupled(res, p, ru, rp):
    if p == 3:
        res.check(ru >= 3.0, f"u rate {ru:.2f} >= 3.0")
    if p == 4:
        res.check(ru >= 4.0, f"u rate {ru:.2f} >= 4.0")
    if p in (2, 3):
        res.check(rp >= p + 0.7, f"phi rate {rp:.2f} >= {p + 0.7:.1f}")


def _gates_coupled(res, p, ru, rp):
    if p == 3:
        res.check(ru >= 3.0, f"u rate {ru:.2f} >= 3.0")
    if p == 4:
        res.check(ru >= 3.5, f"u rate {ru:.2f} >= 3.5")
    if p >= 2:
        res.check(rp >= p - 0.7, f"phi rate {rp:.2f} >= {p - 0.7:.1f}")


def convergence2d(spec):
    return _convergence(spec, "convergence2d", "uncoupled", _gates_uncoupled)


def convergence2d_coupled(spec):
    return _convergence(spec, "convergence2d-coupled", "full", _gates_coupled)


def periodic2d(spec):
    res = PresetResult("periodic2d")
    params = _material(spec, CONVERGENCE_MATERIAL, "full")
    p = spec.p or 3
    levels = spec.levels or 4
    meshes = square_meshes(p, levels, spec.base_divisions or 2, spec.pattern)
    alpha = _alpha_for(spec)
    per = convergence_study(meshes, params, sinusoid_2d(), alpha, periodic=True)
    ref = convergence_study(meshes, params, sinusoid_2d(), alpha)
    for tag, results in (("periodic", per), ("dirichlet", ref)):
        path = _out(spec, f"periodic2d_{tag}_p{p}.csv")
        write_convergence_csv(path, convergence_rows(results))
        res.files.append(path)
    if levels >= 2:
        pu, pp = study_rates(per)
        du, dp = study_rates(ref)
        res.check(abs(pu[-1] - du[-1]) <= 0.3, f"u rate periodic {pu[-1]:.2f} vs dirichlet {du[-1]:.2f}")
        res.check(abs(pp[-1] - dp[-1]) <= 0.3, f"phi rate periodic {pp[-1]:.2f} vs dirichlet {dp[-1]:.2f}")
    return res


def convergence3d(spec):
    res = PresetResult("convergence3d")
    params = _material(spec, CONVERGENCE_MATERIAL, "full")
    p = spec.p or 2
    levels = spec.levels or 3
    base = spec.base_divisions or (2 if p == 2 else 1)
    results = convergence_study(cube_meshes(p, levels, base), params, sinusoid_3d(), _alpha_for(spec))
    path = _out(spec, f"convergence3d_p{p}.csv")
    write_convergence_csv(path, convergence_rows(results))
    res.files.append(path)
    if levels >= 2:
        ru, rp = study_rates(results)
        res.check(ru[-1] >= p - 0.5, f"u rate {ru[-1]:.2f} >= {p - 0.5:.1f}")
        res.check(rp[-1] >= p - 0.7, f"phi rate {rp[-1]:.2f} >= {p - 0.7:.1f}")
    return res


def beta_sweep(spec):
    """Final-mesh errors for several alpha; robust at large alpha, poor at alpha = 1."""
    res = PresetResult("beta-sweep")
    params = _material(spec, CONVERGENCE_MATERIAL, "full")
    p = spec.p or 4
    levels = spec.levels or 4
    alphas = spec.alphas or ((1.0, 10.0, 100.0, 1e4) if p == 3 else (10.0, 100.0, 1e4))
    meshes = square_meshes(p, levels, spec.base_divisions or 2, spec.pattern)
    rows, final = [], {}
    for alpha in alphas:
        try:
            results = convergence_study(meshes, params, sinusoid_2d(), alpha)
        except SolverError as exc:
            res.lines.append(f"alpha={alpha:g}: solve failed ({exc})")
            final[alpha] = np.inf
            continue
        for r in convergence_rows(results):
            rows.append((alpha,) + r)
        final[alpha] = results[-1].err_u
    path = _out(spec, f"beta_sweep_p{p}.csv")
    _write_csv(path, ["alpha", "level", "h", "ndof", "err_u", "err_phi", "rate_u", "rate_phi"], rows)
    res.files.append(path)
    if p == 4 and 100.0 in final and 1e4 in final:
        ratio = final[1e4] / final[100.0]
        res.check(ratio <= 5.0, f"err(alpha=1e4)/err(alpha=100) = {ratio:.2f} <= 5")
    if p == 3 and 1.0 in final and 10.0 in final:
        mesh = meshes[min(2, levels - 1)]
        lam = mechanical_min_eig_alpha(mesh, params, 1.0)
        ratio = final[1.0] / final[10.0]
        res.check(lam < 0 or ratio > 10.0,
                  f"alpha=1: constrained min eigenvalue {lam:.2e}, error ratio to alpha=10 {ratio:.2f}")
    return res


def mechanical_min_eig_alpha(mesh, params, alpha):
    """Smallest eigenvalue of the Dirichlet-constrained mechanical block at ``alpha E l^2 / h``."""
    from .mesh import build_connectivity
    from .penalty import beta_from_formula

    mat = build_material_tensors(params, mesh.n_sd)
    faces, _ = build_connectivity(mesh)
    lo, hi = mesh.bounding_box()
    on_bnd = np.any(np.isclose(mesh.coords, lo) | np.isclose(mesh.coords, hi), axis=1)
    nodes = np.flatnonzero(on_bnd)
    fixed = (nodes[:, None] * mesh.n_sd + np.arange(mesh.n_sd)).ravel()
    beta = beta_from_formula(alpha, mat.E, mat.l, faces.h)
    return mechanical_block_min_eigenvalue(mesh, mat, beta, fixed, faces)


def cantilever(spec):
    res = PresetResult("cantilever")
    p = spec.p or 4
    params = spec.material or BEAM_MATERIAL
    a_primes = spec.a_prime or (1.76, 2.0, 4.0, 8.0)
    modes = [spec.coupling] if spec.coupling else ["flexo", "full"]
    for mode in modes:
        reports = [beam_e_prime(ap, mode, spec.circuit or "open", params, p) for ap in a_primes]
        name = "flexo" if mode == "flexo" else "flexo_piezo" if mode == "full" else mode
        path = _out(spec, f"cantilever_{name}.csv")
        write_beam_csv(path, reports)
        res.files.append(path)
        if mode in ("flexo", "full") and (spec.circuit or "open") == "open":
            for r in reports:
                target = float(analytic_e_prime(r.a_prime, mode))
                rel = abs(r.e_prime - target) / target
                res.check(rel <= 0.05, f"{name} a'={r.a_prime:g}: e'={r.e_prime:.4f} vs {target:.4f} "
                                       f"({100 * rel:.1f}%)")
    return res


def circuit_compare(spec):
    from .problems import beam_thickness, solve_cantilever

    res = PresetResult("circuit-compare")
    p = spec.p or 4
    params = spec.material or CIRCUIT_MATERIAL
    reports = []
    for ap in spec.a_prime or (2.0, 4.0):
        by = {}
        for circuit in ("open", "closed"):
            rep = beam_e_prime(ap, spec.coupling or "full", circuit, params, p)
            reports.append(rep)
            by[circuit] = rep.e_prime
        res.check(by["open"] > by["closed"], f"a'={ap:g}: e' open {by['open']:.4f} > closed {by['closed']:.4f}")
        sol, _ = solve_cantilever(coupling_variant(params, spec.coupling or "full"),
                                  beam_thickness(ap, params), "closed", p)
        group = sol.system.bdata.electrode_groups[0]
        V = sol.phi[group]
        spread = float(np.ptp(V))
        res.check(spread <= 1e-10 * max(abs(V).max(), 1e-300),
                  f"a'={ap:g}: electrode potentials equal (spread {spread:.1e}, V={V[0]:.3e})")
    path = _out(spec, "circuit_compare.csv")
    write_beam_csv(path, reports)
    res.files.append(path)
    return res


def beta_estimate(spec):
    res = PresetResult("beta-estimate")
    params = _material(spec, CONVERGENCE_MATERIAL, "uncoupled")
    if spec.mesh:
        mesh = read_mesh(spec.mesh)
    else:
        mesh = square_meshes(spec.p or 3, 1, spec.base_divisions or 2, spec.pattern)[0]
    est = estimate_penalty(assemble_penalty_forms(mesh, build_material_tensors(params, mesh.n_sd)))
    res.lines.append(est.csv_line())
    path = _out(spec, "beta_estimate.csv")
    _write_csv(path, ["lambda_max", "alpha_equivalent", "beta"],
               [(est.lambda_max, est.alpha_equivalent, est.beta)])
    res.files.append(path)
    res.flags["estimate"] = est
    return res


PRESET_FUNCTIONS = {
    "patch-test": patch_test,
    "convergence2d": convergence2d,
    "convergence2d-coupled": convergence2d_coupled,
    "periodic2d": periodic2d,
    "convergence3d": convergence3d,
    "beta-sweep": beta_sweep,
    "cantilever": cantilever,
    "circuit-compare": circuit_compare,
    "beta-estimate": beta_estimate,
}


def run_preset(name, spec: ProblemSpec) -> PresetResult:
    try:
        func = PRESET_FUNCTIONS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {', '.join(PRESET_FUNCTIONS)}") from None
    return func(spec)

"""Direct solution of the constrained system and the resulting fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .assembly import ConstrainedSystem, GlobalSystem, apply_constraints
from .errors import DomainError, SolverError
from .refelem import _contains, physical_geometry, tabulate

RESIDUAL_TOL = 1e-10
BACKWARD_TOL = 1e-13
# the backward-error route still needs a modest residual: a singular system
# solved with a tiny pivot gives a huge x whose backward error looks perfect
FALLBACK_RESIDUAL_TOL = 1e-5

_SINGULAR_HINT = ("the system matrix is singular; likely causes: beta below the coercivity "
                  "threshold, first Dirichlet conditions that leave rigid motions free, or a "
                  "potential that is not fixed anywhere (floating electrode)")


@dataclass(frozen=True)
class SolveInfo:
    residual: float          # ||K x - f|| / ||f||
    backward_error: float    # componentwise: max |r_i| / (|K| |x| + |f|)_i


def residual(K, x, f):
    """``f - K x`` accumulated in extended precision, rounded to double."""
    K = sp.csr_matrix(K)
    prod = K.data.astype(np.longdouble) * np.asarray(x, dtype=np.longdouble)[K.indices]
    Kx = np.zeros(K.shape[0], dtype=np.longdouble)
    rows = np.repeat(np.arange(K.shape[0]), np.diff(K.indptr))
    np.add.at(Kx, rows, prod)
    return np.asarray(np.asarray(f, dtype=np.longdouble) - Kx, dtype=float)


def backward_error(K, x, f):
    r = np.abs(residual(K, x, f))
    denom = abs(K) @ np.abs(x) + np.abs(f)
    mask = denom > 0
    return float(np.max(r[mask] / denom[mask])) if np.any(mask) else 0.0


def solve_linear(K, f, rtol=RESIDUAL_TOL, refinements=4, return_info=False):
    """Solve ``K x = f`` by symmetric diagonal scaling and sparse LU.

    Iterative refinement with residuals accumulated in extended precision
    follows until the correction reaches rounding level. A residual above ``rtol`` is still accepted
    when the componentwise backward error is at rounding level
    (``BACKWARD_TOL``) and the residual stays below
    ``FALLBACK_RESIDUAL_TOL``: that happens for slender structures, where
    the rounding floor ``eps |K| |x|`` is larger than ``rtol * |f|``.
    """
    K = sp.csc_matrix(K)
    nf = np.linalg.norm(f)
    if nf == 0.0:
        x = np.zeros(K.shape[0])
        return (x, SolveInfo(0.0, 0.0)) if return_info else x
    diag = np.abs(K.diagonal())
    scale = np.ones_like(diag)
    scale[diag > 0] = 1.0 / np.sqrt(diag[diag > 0])
    D = sp.diags(scale)
    Ks = (D @ K @ D).tocsc()
    try:
        lu = spla.splu(Ks)
    except RuntimeError as exc:
        raise SolverError(f"{_SINGULAR_HINT} ({exc})") from exc
    x = scale * lu.solve(scale * f)
    for _ in range(refinements):
        dx = scale * lu.solve(scale * residual(K, x, f))
        x = x + dx
        if np.linalg.norm(dx) <= 4 * np.finfo(float).eps * np.linalg.norm(x):
            break
    res = np.linalg.norm(residual(K, x, f)) / nf
    if not np.all(np.isfinite(x)):
        raise SolverError(_SINGULAR_HINT)
    omega = backward_error(K, x, f)
    if res >= rtol and (omega >= BACKWARD_TOL or res >= FALLBACK_RESIDUAL_TOL):
        raise SolverError(f"relative residual {res:.3e} above {rtol:.0e} and backward error "
                          f"{omega:.1e}; {_SINGULAR_HINT}")
    return (x, SolveInfo(float(res), omega)) if return_info else x


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Nodal displacement, potential and multiplier values on a mesh."""

    u: np.ndarray            # (n_nodes, n_sd)
    phi: np.ndarray          # (n_nodes,)
    multipliers: np.ndarray
    system: GlobalSystem
    vector: np.ndarray       # full dof vector
    info: SolveInfo | None = None

    @property
    def mesh(self):
        return self.system.mesh

    def reactions(self):
        """``K x - f`` on the full (unconstrained) system."""
        return -residual(self.system.K, self.vector, self.system.f)

    def element_values(self, elems, geom):
        """Displacement, its gradient and Hessian, potential and its gradient at ``geom`` points."""
        conn = self.mesh.elements[elems]
        U, P = self.u[conn], self.phi[conn]
        u = np.einsum("qa,mai->mqi", geom.N, U)
        du = np.einsum("mqak,mai->mqik", geom.grad, U)
        d2u = np.einsum("mqakl,mai->mqikl", geom.hess, U)
        ph = np.einsum("qa,ma->mq", geom.N, P)
        dph = np.einsum("mqak,ma->mqk", geom.grad, P)
        return u, du, d2u, ph, dph

    def evaluate(self, points):
        """Displacement and potential at arbitrary physical points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        elems, xi = locate(self.mesh, points)
        re = self.mesh.ref
        u = np.empty((len(points), self.mesh.n_sd))
        ph = np.empty(len(points))
        for k, (e, r) in enumerate(zip(elems, xi)):
            N = tabulate(re, r[None], 0, check=False)[0][0]
            nodes = self.mesh.elements[e]
            u[k] = N @ self.u[nodes]
            ph[k] = N @ self.phi[nodes]
        return u, ph


def locate(mesh, points, candidates=12, tol=1e-9):
    """Element index and reference coordinates of each physical point."""
    re = mesh.ref
    centroids = mesh.element_coords().mean(axis=1)
    tree = cKDTree(centroids)
    k = min(candidates, mesh.n_elements)
    _, near = tree.query(points, k=k)
    near = np.atleast_2d(near).reshape(len(points), k)
    center = re.nodes.mean(axis=0)
    elems = np.empty(len(points), dtype=np.int64)
    xis = np.empty((len(points), mesh.n_sd))
    for i, x in enumerate(points):
        for e in near[i]:
            X = mesh.coords[mesh.elements[e]]
            xi = center.copy()
            for _ in range(30):
                N, dN = tabulate(re, xi[None], 1, check=False)
                r = N[0] @ X - x
                J = np.einsum("ak,ad->dk", dN[0], X)
                step = np.linalg.solve(J, r)
                xi -= step
                if np.linalg.norm(step) < 1e-14:
                    break
            if _contains(re.shape, xi[None], tol)[0]:
                elems[i], xis[i] = e, xi
                break
        else:
            raise DomainError(f"point {tuple(x)} lies outside the mesh")
    return elems, xis


def solve(system: GlobalSystem, constrained: ConstrainedSystem | None = None,
          rtol=RESIDUAL_TOL) -> SolutionField:
    cs = apply_constraints(system) if constrained is None else constrained
    x, info = solve_linear(cs.K, cs.f, rtol, return_info=True)
    full, mult = cs.expand(x)
    dm = system.dofmap
    u = full[: dm.n_u].reshape(dm.n_nodes, dm.n_sd)
    phi = full[dm.n_u:]
    return SolutionField(u, phi, mult, system, full, info)


def interpolate(system: GlobalSystem, exact):
    """SolutionField holding the nodal interpolant of an exact field."""
    mesh = system.mesh
    u = np.asarray(exact.u(mesh.coords), dtype=float)
    phi = np.asarray(exact.phi(mesh.coords), dtype=float)
    full = np.concatenate([u.ravel(), phi])
    return SolutionField(u, phi, np.zeros(0), system, full)


def geometry_for_errors(mesh, elems, order_boost=2):
    """Volume geometry with a quadrature two orders above assembly."""
    from .refelem import build_reference_element

    p = mesh.degree
    fine = build_reference_element(mesh.shape, p, volume_degree=2 * p + 2 + order_boost)
    N, dN, d2N = tabulate(mesh.ref, fine.quad_points, 2)
    return physical_geometry(mesh.ref, mesh.element_coords(elems), tab=(fine.quad_weights, N, dN, d2N))

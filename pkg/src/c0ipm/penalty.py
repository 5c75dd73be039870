"""Estimation of the interior penalty parameter.

The face consistency term is bounded by the strain-gradient energy through
the pencil ``B x = lambda A x``:

* ``A``: volume strain-gradient form ``(grad eps(v), l^2 C grad eps(u))``;
* ``B``: ``sum over interior faces of ({r(v)}, {r(u)})`` with the purely
  mechanical double traction.

Any ``beta`` above the largest eigenvalue keeps the discrete form coercive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    DofMap, _Triplets, _chunks, _group_faces, double_traction_operator, element_matrices,
    interior_face_geometry,
)
from .errors import DegenerateError, ParameterError, SolverError
from .material import MaterialTensors
from .mesh import FaceConnectivity, Mesh, build_connectivity

DENSE_LIMIT = 2000
SAFETY = 2.0
FALLBACK_ALPHA = 100.0


def beta_from_formula(alpha, E, l, h):
    """``alpha * E * l**2 / h``; works elementwise on arrays of ``h``."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ParameterError("face size h must be positive")
    if alpha < 0 or E <= 0 or l < 0:
        raise ParameterError("need alpha >= 0, E > 0 and l >= 0")
    beta = alpha * E * l ** 2 / h
    return float(beta) if beta.ndim == 0 else beta


@dataclass(frozen=True, eq=False)
class PenaltyForms:
    A: sp.csr_matrix
    B: sp.csr_matrix
    kernel: np.ndarray        # (n_u, n_sd * (n_sd + 1)) affine displacement fields
    h: float                  # smallest interior face size
    mat: MaterialTensors
    sharper: bool = False


@dataclass(frozen=True)
class PenaltyEstimate:
    lambda_max: float
    alpha_equivalent: float
    beta: float
    eigenvector: np.ndarray | None = None
    fallback: bool = False

    def csv_line(self):
        return f"{self.lambda_max!r},{self.alpha_equivalent!r},{self.beta!r}"


def affine_fields(mesh: Mesh):
    """Columns: translations then ``u_i = x_j`` for every (i, j)."""
    d, n = mesh.n_sd, mesh.n_nodes
    cols = []
    for i in range(d):
        v = np.zeros((n, d))
        v[:, i] = 1.0
        cols.append(v.ravel())
    for i in range(d):
        for j in range(d):
            v = np.zeros((n, d))
            v[:, i] = mesh.coords[:, j]
            cols.append(v.ravel())
    return np.column_stack(cols)


def assemble_penalty_forms(mesh: Mesh, mat: MaterialTensors, faces: FaceConnectivity | None = None,
                           sharper=False) -> PenaltyForms:
    """Assemble ``A`` and ``B`` over the displacement dofs only.

    With ``sharper`` the elastic energy is added to ``A``, which gives a
    smaller but less transparent bound.
    """
    if mat.l2 == 0:
        raise DegenerateError("strain-gradient forms vanish for l = 0; any beta > 0 is admissible")
    if faces is None:
        faces, _ = build_connectivity(mesh)
    d = mesh.n_sd
    dm = DofMap(mesh.n_nodes, d, np.arange(mesh.n_nodes))
    n = dm.n_u
    re = mesh.ref
    nb = re.n_nodes
    accA, accB = _Triplets(n), _Triplets(n)
    for chunk in _chunks(mesh.n_elements, len(re.quad_weights) * nb * d ** 4 * 8 * 6):
        Kuu = element_matrices(mesh, chunk, mat, elastic=sharper, coupling=False, dielectric=False)[0]
        ud = dm.element_u_dofs(mesh.elements[chunk])
        accA.add(ud, ud, Kuu)
    for key, sel in _group_faces(faces, faces.interior):
        for part in _chunks(len(sel), (2 * nb * d) ** 2 * 8 * 4):
            s = sel[part]
            gL, gR = interior_face_geometry(mesh, faces, s, key)
            RL = double_traction_operator(gL, mat)[0]
            RR = double_traction_operator(gR, mat)[0]
            M = 0.5 * np.concatenate([RL, RR], axis=3)
            F, Q = gL.weights.shape
            Mw = (M * gL.weights[:, :, None, None]).reshape(F, Q * d, -1)
            Bf = Mw.transpose(0, 2, 1) @ M.reshape(F, Q * d, -1)
            ud = np.concatenate([dm.element_u_dofs(mesh.elements[faces.left[s]]),
                                 dm.element_u_dofs(mesh.elements[faces.right[s]])], axis=1)
            accB.add(ud, ud, Bf)
    A, B = accA.tocsr(), accB.tocsr()
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    hint = faces.h[faces.interior]
    h = float(hint.min()) if len(hint) else float(mesh.diameters().min())
    return PenaltyForms(A.tocsr(), B.tocsr(), affine_fields(mesh), h, mat, sharper)


def _kernel_split(A, rtol=1e-10):
    vals, vecs = np.linalg.eigh(A)
    keep = vals > rtol * vals.max()
    return vals[keep], vecs[:, keep], vecs[:, ~keep]


def estimate_penalty(forms: PenaltyForms, safety=SAFETY, fallback_alpha=FALLBACK_ALPHA,
                     dense_limit=DENSE_LIMIT) -> PenaltyEstimate:
    """Largest eigenvalue of ``B x = lambda A x`` on the complement of ker(A).

    The kernel of ``A`` holds every continuous piecewise affine field, so it
    is detected numerically and deflated rather than assumed affine.
    """
    mat = forms.mat
    A, B = forms.A, forms.B
    scaleB = abs(B).max() if B.nnz else 0.0
    if scaleB == 0.0:
        beta = beta_from_formula(fallback_alpha, mat.E, mat.l, forms.h)
        return PenaltyEstimate(0.0, 0.0, beta, None, fallback=True)
    n = A.shape[0]
    if n <= dense_limit:
        lam, V, _ = _kernel_split(A.toarray())
        W = V / np.sqrt(lam)
        S = W.T @ (B @ W)
        mu, Y = np.linalg.eigh(0.5 * (S + S.T))
        lam_max = float(max(mu[-1], 0.0))
        x = W @ Y[:, -1]
    else:
        eps = 1e-8
        Ae = (A + eps * sp.diags(A.diagonal())).tocsc()
        try:
            vals, vecs = spla.eigsh(B.tocsc(), k=1, M=Ae, which="LA", maxiter=20 * n, tol=1e-10)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"penalty eigen-iteration did not converge: {exc}") from exc
        lam_max = float(max(vals[0], 0.0))
        x = vecs[:, 0]
    alpha_eq = lam_max * forms.h / (mat.E * mat.l2)
    return PenaltyEstimate(lam_max, alpha_eq, safety * lam_max, x)


def mechanical_block_min_eigenvalue(mesh: Mesh, mat: MaterialTensors, beta, fixed_dofs=(),
                                    faces: FaceConnectivity | None = None):
    """Smallest eigenvalue of the displacement block with ``fixed_dofs`` removed.

    The block holds elasticity, strain gradient and all interior face terms.
    ``beta`` is a scalar or one value per face. Dense; meant for coarse meshes.
    """
    from .assembly import face_matrices

    if faces is None:
        faces, _ = build_connectivity(mesh)
    d = mesh.n_sd
    dm = DofMap(mesh.n_nodes, d, np.arange(mesh.n_nodes))
    acc = _Triplets(dm.n_u)
    Kuu = element_matrices(mesh, np.arange(mesh.n_elements), mat, coupling=False, dielectric=False)[0]
    ud = dm.element_u_dofs(mesh.elements)
    acc.add(ud, ud, Kuu)
    mech = mat if not np.any(mat.mu) else MaterialTensors(mat.C, mat.e, np.zeros_like(mat.mu), mat.kappa,
                                                          mat.l2, mat.E, mat.params)
    for key, sel in _group_faces(faces, faces.interior):
        gL, gR = interior_face_geometry(mesh, faces, sel, key)
        Kf, _ = face_matrices(gL, gR, mech, beta if np.ndim(beta) == 0 else np.asarray(beta)[sel])
        fd = np.concatenate([dm.element_u_dofs(mesh.elements[faces.left[sel]]),
                             dm.element_u_dofs(mesh.elements[faces.right[sel]])], axis=1)
        acc.add(fd, fd, Kf)
    K = acc.tocsr().toarray()
    free = np.setdiff1d(np.arange(dm.n_u), np.asarray(fixed_dofs, dtype=np.int64))
    Kf = K[np.ix_(free, free)]
    Kf = 0.5 * (Kf + Kf.T)
    scale = np.sqrt(np.abs(np.diag(Kf)))
    scale[scale == 0] = 1.0
    return float(sla.eigvalsh(Kf / np.outer(scale, scale), subset_by_index=[0, 0])[0])

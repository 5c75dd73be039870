"""Assembly of the C0 interior penalty system for flexoelectricity.

Unknowns are blocked: all displacement components (``node * n_sd + i``),
then all potentials (``n_sd * n_nodes + node``), then Lagrange multipliers
of the electrode constraints.

Within an element the local ordering is ``a * n_sd + i`` for the
displacement of node ``a`` followed by ``n_sd * nb + a`` for the potential.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConnectivityError, ConstraintConflictError, ParameterError
from .material import MaterialTensors
from .mesh import BoundaryData, Mesh, _edge_nodes
from .refelem import physical_geometry, tabulate, gauss_legendre

# entries per sparse chunk before compressing
_CHUNK_ENTRIES = 8_000_000


class _Triplets:
    """COO accumulator that compresses to CSR in bounded-size chunks."""

    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0
        self.matrix = sp.csr_matrix((n, n))

    def add(self, rdofs, cdofs, blocks):
        """Scatter ``blocks`` (k, r, c) at rows ``rdofs`` (k, r), cols ``cdofs`` (k, c)."""
        k, r, c = blocks.shape
        self.rows.append(np.broadcast_to(rdofs[:, :, None], (k, r, c)).ravel())
        self.cols.append(np.broadcast_to(cdofs[:, None, :], (k, r, c)).ravel())
        self.vals.append(blocks.ravel())
        self.count += blocks.size
        if self.count > _CHUNK_ENTRIES:
            self._flush()

    def _flush(self):
        if not self.vals:
            return
        m = sp.coo_matrix((np.concatenate(self.vals),
                           (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=(self.n, self.n)).tocsr()
        self.matrix = self.matrix + m
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0

    def tocsr(self):
        self._flush()
        m = self.matrix.tocsr()
        m.sum_duplicates()
        return m


def _chunks(n, per_item_bytes, budget=200_000_000):
    size = max(1, int(budget // max(per_item_bytes, 1)))
    for start in range(0, n, size):
        yield np.arange(start, min(n, start + size))


# ---------------------------------------------------------------------------
# dof bookkeeping

@dataclass(frozen=True, eq=False)
class DofMap:
    n_nodes: int
    n_sd: int
    node_map: np.ndarray
    dirichlet_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constraint_rows: tuple = ()          # ((dof_a, dof_b), ...) meaning x_a - x_b = 0

    @property
    def n_u(self):
        return self.n_nodes * self.n_sd

    @property
    def n_dofs(self):
        return self.n_u + self.n_nodes

    @property
    def n_multipliers(self):
        return len(self.constraint_rows)

    def u_dofs(self, nodes):
        nodes = self.node_map[np.asarray(nodes)]
        return nodes[..., None] * self.n_sd + np.arange(self.n_sd)

    def phi_dofs(self, nodes):
        return self.n_u + self.node_map[np.asarray(nodes)]

    def element_dofs(self, conn):
        """Global dofs of elements with node lists ``conn`` (m, nb), local order."""
        u = self.u_dofs(conn).reshape(len(conn), -1)
        return np.concatenate([u, self.phi_dofs(conn)], axis=1)

    def element_u_dofs(self, conn):
        return self.u_dofs(conn).reshape(len(conn), -1)

    @property
    def slave_dofs(self):
        slaves = np.flatnonzero(self.node_map != np.arange(self.n_nodes))
        if len(slaves) == 0:
            return np.zeros(0, dtype=np.int64)
        u = (slaves[:, None] * self.n_sd + np.arange(self.n_sd)).ravel()
        return np.concatenate([u, self.n_u + slaves])


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    K: sp.csr_matrix
    f: np.ndarray
    dofmap: DofMap
    beta: np.ndarray          # per face of bdata.faces (0 on boundary faces)
    beta_D: np.ndarray        # per face (0 where no second Dirichlet condition)
    bdata: BoundaryData
    mat: MaterialTensors

    @property
    def mesh(self):
        return self.bdata.mesh


# ---------------------------------------------------------------------------
# local kernels

def element_matrices(mesh: Mesh, elems, mat: MaterialTensors, geom=None, body=None, charge=None,
                     elastic=True, strain_gradient=True, coupling=True, dielectric=True):
    """Local blocks (uu, u-phi, phi-phi) and loads of the volume terms.

    Returns ``Kuu`` (m, nb*d, nb*d), ``Kup`` (m, nb*d, nb), ``Kpp`` (m, nb, nb),
    ``fu`` (m, nb*d), ``fp`` (m, nb).
    """
    re = mesh.ref
    if geom is None:
        geom = physical_geometry(re, mesh.element_coords(elems))
    G, H, w = geom.grad, geom.hess, geom.weights
    m, Q, nb, d = G.shape
    # quadrature products, contracted with the material tensors afterwards
    Gf = G.reshape(m, Q, nb * d)
    GG = ((Gf * w[..., None]).transpose(0, 2, 1) @ Gf).reshape(m, nb, d, nb, d)
    Kuu = np.zeros((m, nb, nb, d, d))
    P = np.zeros((m, nb, d, nb, d))
    if elastic:
        P += GG
    use_sg = strain_gradient and mat.l2 > 0
    if use_sg:
        # sum_k H[a, j, k] H[b, m, k]
        Hk = H.transpose(0, 1, 4, 2, 3).reshape(m, Q * d, nb * d)
        wk = np.repeat(w, d, axis=1)[..., None]
        P += mat.l2 * ((Hk * wk).transpose(0, 2, 1) @ Hk).reshape(m, nb, d, nb, d)
    if elastic or use_sg:
        # K[a, i, b, l] = sum_jm C[i, j, l, m] P[a, j, b, m]
        Cm = mat.C.transpose(1, 3, 0, 2).reshape(d * d, d * d)
        Kuu = (P.transpose(0, 1, 3, 2, 4).reshape(-1, d * d) @ Cm).reshape(m, nb, nb, d, d)
    Kuu = Kuu.transpose(0, 1, 3, 2, 4).reshape(m, nb * d, nb * d)

    Kup = np.zeros((m, nb, d, nb))
    if coupling and np.any(mat.e):
        # sum_jl e[l, i, j] GG[a, j, b, l]
        Em = mat.e.transpose(2, 0, 1).reshape(d * d, d)
        Kup += (GG.transpose(0, 1, 3, 2, 4).reshape(-1, d * d) @ Em).reshape(m, nb, nb, d).transpose(0, 1, 3, 2)
    if coupling and np.any(mat.mu):
        # sum_jkl mu[l, i, j, k] HG[a, j, k, b, l]
        Hf = H.reshape(m, Q, nb * d * d)
        HG = ((Hf * w[..., None]).transpose(0, 2, 1) @ Gf).reshape(m, nb, d * d, nb, d)
        Mm = mat.mu.transpose(2, 3, 0, 1).reshape(d * d * d, d)
        Kup += (HG.transpose(0, 1, 3, 2, 4).reshape(-1, d ** 3) @ Mm).reshape(m, nb, nb, d).transpose(0, 1, 3, 2)
    Kup = Kup.reshape(m, nb * d, nb)

    Kpp = np.zeros((m, nb, nb))
    if dielectric:
        Kpp = -np.einsum("majbk,jk->mab", GG, mat.kappa)

    fu = np.zeros((m, nb, d))
    fp = np.zeros((m, nb))
    if body is not None:
        bx = np.asarray(body(geom.x.reshape(-1, d))).reshape(m, Q, d)
        fu += np.einsum("qa,mqi,mq->mai", geom.N, bx, w)
    if charge is not None:
        qx = np.asarray(charge(geom.x.reshape(-1, d))).reshape(m, Q)
        fp -= np.einsum("qa,mq,mq->ma", geom.N, qx, w)
    return Kuu, Kup, Kpp, fu.reshape(m, nb * d), fp


def normal_derivative_operator(geom):
    """``du_i/dn`` as a linear map of element displacements: (F, Q, d, nb*d)."""
    G, n = geom.grad, geom.normal
    F, Q, nb, d = G.shape
    dn = np.einsum("fqad,fqd->fqa", G, n)
    J = dn[:, :, None, :, None] * np.eye(d)[None, None, :, None, :]
    return J.reshape(F, Q, d, nb * d)


def double_traction_operator(geom, mat, strain_gradient=True):
    """Double traction ``r(u, phi)`` as linear maps: (F, Q, d, nb*d), (F, Q, d, nb)."""
    G, H, n = geom.grad, geom.hess, geom.normal
    F, Q, nb, d = G.shape
    Ru = np.zeros((F, Q, d, nb, d))
    if strain_gradient and mat.l2 > 0:
        Cn = np.einsum("ijlm,fqj->fqilm", mat.C, n)
        Hn = np.einsum("fqk,fqakm->fqam", n, H)
        Ru = mat.l2 * np.einsum("fqilm,fqam->fqial", Cn, Hn)
    Rp = None
    if np.any(mat.mu):
        Mun = np.einsum("lijk,fqj,fqk->fqli", mat.mu, n, n)
        Rp = np.einsum("fqli,fqal->fqia", Mun, G)
    return Ru.reshape(F, Q, d, nb * d), Rp


def face_matrices(geomL, geomR, mat, beta, strain_gradient=True, consistency=True):
    """Interior face blocks over the dofs of the two adjacent elements.

    The displacement columns are ``[u_L, u_R]``; the potential columns are
    ``[phi_L, phi_R]``. Returns ``Kuu`` (F, 2nb*d, 2nb*d) and ``Kup``
    (F, 2nb*d, 2nb) or ``None`` without flexoelectric coupling.
    ``beta`` is a scalar or one value per face.
    """
    if geomL.weights.shape != geomR.weights.shape:
        raise ConnectivityError("quadrature point counts differ across the face")
    w = geomL.weights
    F, Q = w.shape
    J = np.concatenate([normal_derivative_operator(geomL), normal_derivative_operator(geomR)], axis=3)
    RuL, RpL = double_traction_operator(geomL, mat, strain_gradient)
    RuR, RpR = double_traction_operator(geomR, mat, strain_gradient)
    Mu = 0.5 * np.concatenate([RuL, RuR], axis=3)
    d = J.shape[2]
    Jw = (J * w[:, :, None, None]).reshape(F, Q * d, -1)
    Jf = J.reshape(F, Q * d, -1)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (F,))
    Kuu = beta[:, None, None] * (Jw.transpose(0, 2, 1) @ Jf)
    if consistency:
        JM = Jw.transpose(0, 2, 1) @ Mu.reshape(F, Q * d, -1)
        Kuu -= JM + JM.transpose(0, 2, 1)
    Kup = None
    if consistency and RpL is not None:
        Mp = 0.5 * np.concatenate([RpL, RpR], axis=3)
        Kup = -(Jw.transpose(0, 2, 1) @ Mp.reshape(F, Q * d, -1))
    return Kuu, Kup


def split_face_blocks(K, n_left):
    """(LL, LR, RL, RR) sub-blocks of a face matrix."""
    return K[..., :n_left, :n_left], K[..., :n_left, n_left:], K[..., n_left:, :n_left], K[..., n_left:, n_left:]


def _group_faces(faces, idx):
    """Batches of faces sharing (left face id, right face id, rotation)."""
    keys = np.column_stack([faces.left_face[idx], faces.right_face[idx], faces.rotation[idx]])
    for key in np.unique(keys, axis=0):
        sel = idx[np.all(keys == key, axis=1)]
        yield tuple(int(k) for k in key), sel


def interior_face_geometry(mesh, faces, sel, key):
    fl, fr, rot = key
    re = mesh.ref
    gL = physical_geometry(re, mesh.element_coords(faces.left[sel]), which=fl)
    gR = physical_geometry(re, mesh.element_coords(faces.right[sel]), which=fr, rotation=rot)
    return gL, gR


# ---------------------------------------------------------------------------
# global assembly

def formula_beta(alpha, mat, h):
    """``alpha * E * l^2 / h``."""
    from .penalty import beta_from_formula
    return beta_from_formula(alpha, mat.E, mat.l, h)


def build_dofmap(bdata: BoundaryData, n_sd) -> DofMap:
    mesh, spec = bdata.mesh, bdata.spec
    base = DofMap(mesh.n_nodes, n_sd, bdata.node_map)
    dofs, vals = [], []
    un = bdata.u_dirichlet_nodes
    if len(un):
        g = np.zeros((len(un), n_sd)) if spec.g1 is None else np.asarray(spec.g1(mesh.coords[un]), dtype=float)
        dofs.append(base.u_dofs(un).ravel())
        vals.append(g.reshape(-1))
    pn = bdata.phi_dirichlet_nodes
    if len(pn):
        g = np.zeros(len(pn)) if spec.g3 is None else np.asarray(spec.g3(mesh.coords[pn]), dtype=float)
        dofs.append(base.phi_dofs(pn))
        vals.append(g.reshape(-1))
    dofs = np.concatenate(dofs) if dofs else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    dofs, first = np.unique(dofs, return_index=True)
    vals = vals[first]

    prescribed = dict(zip(dofs.tolist(), vals.tolist()))
    rows = []
    for group in bdata.electrode_groups:
        pd = base.phi_dofs(group)
        fixed = {prescribed[k] for k in pd.tolist() if k in prescribed}
        if len(fixed) > 1 and max(fixed) - min(fixed) > 1e-14 * max(1.0, max(abs(v) for v in fixed)):
            raise ConstraintConflictError("electrode nodes carry different prescribed potentials")
        ref = int(pd[0])
        for k in pd[1:].tolist():
            if k in prescribed and ref in prescribed:
                continue
            rows.append((k, ref))
    return DofMap(mesh.n_nodes, n_sd, bdata.node_map, dofs, vals, tuple(rows))


def _face_betas(bdata, mat, beta, beta_D):
    faces = bdata.faces
    F = faces.n_faces

    def resolve(value, mask):
        out = np.zeros(F)
        if value is None:
            return out
        if callable(value):
            out[mask] = np.asarray(value(faces.h[mask]), dtype=float)
        elif np.ndim(value) == 0:
            out[mask] = float(value)
        else:
            arr = np.asarray(value, dtype=float)
            if arr.shape != (F,):
                raise ParameterError("per-face beta must have one entry per face")
            out[mask] = arr[mask]
        return out

    interior = faces.right >= 0
    b = resolve(beta, interior)
    d2 = bdata.tags["u2"] == "D"
    bd = resolve(beta if beta_D is None else beta_D, d2)
    return b, bd


def assemble(bdata: BoundaryData, mat: MaterialTensors, beta, beta_D=None,
             deterministic=True) -> GlobalSystem:
    """Assemble volume, interior face, second Dirichlet and load terms.

    ``beta`` is a scalar, an array over ``bdata.faces`` or a callable of the
    face size ``h``. ``beta_D`` defaults to ``beta``.
    Assembly is sequential, so the result is always bitwise reproducible.
    """
    mesh = bdata.mesh
    d = mesh.n_sd
    if mat.n_sd != d:
        raise ParameterError("material dimension does not match the mesh")
    dm = build_dofmap(bdata, d)
    ndof = dm.n_dofs
    acc = _Triplets(ndof)
    f = np.zeros(ndof)
    spec = bdata.spec
    re = mesh.ref
    nb = re.n_nodes

    per_elem = len(re.quad_weights) * nb * d ** 4 * 8 * 6
    for chunk in _chunks(mesh.n_elements, per_elem):
        conn = mesh.elements[chunk]
        Kuu, Kup, Kpp, fu, fp = element_matrices(mesh, chunk, mat, body=spec.body_force,
                                                 charge=spec.charge)
        ud, pd = dm.element_u_dofs(conn), dm.phi_dofs(conn)
        acc.add(ud, ud, Kuu)
        if np.any(Kup):
            acc.add(ud, pd, Kup)
            acc.add(pd, ud, Kup.transpose(0, 2, 1))
        acc.add(pd, pd, Kpp)
        np.add.at(f, ud, fu)
        np.add.at(f, pd, fp)

    beta_f, beta_d = _face_betas(bdata, mat, beta, beta_D)
    faces = bdata.faces
    for key, sel in _group_faces(faces, faces.interior):
        per_face = (2 * nb * d) ** 2 * 8 * 4 + len(re.faces[0].weights) * nb * d * d * 8 * 20
        for part in _chunks(len(sel), per_face):
            s = sel[part]
            gL, gR = interior_face_geometry(mesh, faces, s, key)
            Kuu, Kup = face_matrices(gL, gR, mat, beta_f[s])
            cl, cr = mesh.elements[faces.left[s]], mesh.elements[faces.right[s]]
            ud = np.concatenate([dm.element_u_dofs(cl), dm.element_u_dofs(cr)], axis=1)
            acc.add(ud, ud, Kuu)
            if Kup is not None:
                pd = np.concatenate([dm.phi_dofs(cl), dm.phi_dofs(cr)], axis=1)
                acc.add(ud, pd, Kup)
                acc.add(pd, ud, Kup.transpose(0, 2, 1))

    _assemble_second_dirichlet(bdata, mat, dm, beta_d, acc, f)
    f += assemble_rhs(bdata, mat, dm, volume=False)
    K = acc.tocsr()
    return GlobalSystem(K, f, dm, beta_f, beta_d, bdata, mat)


def _boundary_batches(bdata, family, tag):
    faces = bdata.faces
    idx = np.flatnonzero(bdata.tags[family] == tag)
    for lf in np.unique(faces.left_face[idx]):
        yield int(lf), idx[faces.left_face[idx] == lf]


def _assemble_second_dirichlet(bdata, mat, dm, beta_d, acc, f):
    """Symmetric Nitsche terms on the second Dirichlet boundary.

    LHS: -(dv/dn, r(u, phi)) - (r(v, psi), du/dn) + beta_D (dv/dn, du/dn);
    RHS: -(r(v, psi), g2) + beta_D (dv/dn, g2).
    """
    mesh = bdata.mesh
    g2 = bdata.spec.g2
    for lf, sel in _boundary_batches(bdata, "u2", "D"):
        geom = physical_geometry(mesh.ref, mesh.element_coords(bdata.faces.left[sel]), which=lf)
        w = geom.weights
        F, Q = w.shape
        d = mesh.n_sd
        J = normal_derivative_operator(geom)
        Ru, Rp = double_traction_operator(geom, mat)
        Jw = (J * w[:, :, None, None]).reshape(F, Q * d, -1)
        Jt = Jw.transpose(0, 2, 1)
        JM = Jt @ Ru.reshape(F, Q * d, -1)
        Kuu = beta_d[sel][:, None, None] * (Jt @ J.reshape(F, Q * d, -1)) - JM - JM.transpose(0, 2, 1)
        conn = mesh.elements[bdata.faces.left[sel]]
        ud = dm.element_u_dofs(conn)
        pd = dm.phi_dofs(conn)
        acc.add(ud, ud, Kuu)
        if Rp is not None:
            Kup = -(Jt @ Rp.reshape(F, Q * d, -1))
            acc.add(ud, pd, Kup)
            acc.add(pd, ud, Kup.transpose(0, 2, 1))
        if g2 is not None:
            gx = np.asarray(g2(geom.x.reshape(-1, d), geom.normal.reshape(-1, d))).reshape(F, Q, d)
            gw = gx * w[..., None]
            fu = beta_d[sel][:, None] * np.einsum("fqi,fqia->fa", gw, J) \
                - np.einsum("fqi,fqia->fa", gw, Ru)
            np.add.at(f, ud, fu)
            if Rp is not None:
                np.add.at(f, pd, -np.einsum("fqi,fqia->fa", gw, Rp))


def assemble_rhs(bdata: BoundaryData, mat: MaterialTensors, dm: DofMap, volume=True):
    """Load vector: body force, charge, Neumann data and concentrated loads."""
    mesh = bdata.mesh
    spec = bdata.spec
    d = mesh.n_sd
    re = mesh.ref
    f = np.zeros(dm.n_dofs)
    if volume and (spec.body_force is not None or spec.charge is not None):
        for chunk in _chunks(mesh.n_elements, len(re.quad_weights) * re.n_nodes * d * d * 8 * 8):
            geom = physical_geometry(re, mesh.element_coords(chunk))
            conn = mesh.elements[chunk]
            m, Q = geom.weights.shape
            w = geom.weights
            if spec.body_force is not None:
                bx = np.asarray(spec.body_force(geom.x.reshape(-1, d))).reshape(m, Q, d)
                np.add.at(f, dm.element_u_dofs(conn),
                          np.einsum("qa,mqi,mq->mai", geom.N, bx, w).reshape(m, -1))
            if spec.charge is not None:
                qx = np.asarray(spec.charge(geom.x.reshape(-1, d))).reshape(m, Q)
                np.add.at(f, dm.phi_dofs(conn), -np.einsum("qa,mq,mq->ma", geom.N, qx, w))

    faces = bdata.faces
    for family, tag, func in (("u1", "N", spec.t_n), ("u2", "N", spec.r_n), ("phi", "N", spec.w_n)):
        if func is None:
            continue
        for lf, sel in _boundary_batches(bdata, family, tag):
            geom = physical_geometry(re, mesh.element_coords(faces.left[sel]), which=lf)
            conn = mesh.elements[faces.left[sel]]
            F, Q = geom.weights.shape
            xs, ns = geom.x.reshape(-1, d), geom.normal.reshape(-1, d)
            w = geom.weights
            if family == "u1":
                t = np.asarray(func(xs, ns)).reshape(F, Q, d)
                np.add.at(f, dm.element_u_dofs(conn),
                          np.einsum("qa,fqi,fq->fai", geom.N, t, w).reshape(F, -1))
            elif family == "u2":
                r = np.asarray(func(xs, ns)).reshape(F, Q, d)
                J = normal_derivative_operator(geom)
                np.add.at(f, dm.element_u_dofs(conn), np.einsum("fqia,fqi,fq->fa", J, r, w))
            else:
                wn = np.asarray(func(xs, ns)).reshape(F, Q)
                np.add.at(f, dm.phi_dofs(conn), -np.einsum("qa,fq,fq->fa", geom.N, wn, w))

    for node, vec in bdata.point_loads:
        f[dm.u_dofs(node)] += vec

    for edges, func in bdata.line_loads:
        nq = re.degree + 2
        t, wt = gauss_legendre(nq)
        for e, le in edges:
            a, b = re.edges[le]
            va, vb = re.vertices[a], re.vertices[b]
            pts = va + np.outer((t + 1) / 2, vb - va)
            N, dN = tabulate(re, pts, 1)
            X = mesh.coords[mesh.elements[e]]
            x = N @ X
            tang = np.einsum("qak,ad,k->qd", dN, X, (vb - va) / 2)
            dl = wt * np.linalg.norm(tang, axis=1)
            jx = np.asarray(func(x)).reshape(nq, d)
            f[dm.u_dofs(mesh.elements[e]).ravel()] += np.einsum("qa,qi,q->ai", N, jx, dl).ravel()
    return f


# ---------------------------------------------------------------------------
# constraints

@dataclass(frozen=True, eq=False)
class ConstrainedSystem:
    """Reduced saddle point system ``[[K_ff, G^T], [G, 0]]``."""

    K: sp.csr_matrix
    f: np.ndarray
    free: np.ndarray
    n_free: int
    n_multipliers: int
    parent: GlobalSystem

    def expand(self, x):
        """Full dof vector (slaves copied from masters) and multiplier values."""
        dm = self.parent.dofmap
        full = np.zeros(dm.n_dofs)
        full[self.free] = x[: self.n_free]
        full[dm.dirichlet_dofs] = dm.dirichlet_values
        slaves = np.flatnonzero(dm.node_map != np.arange(dm.n_nodes))
        if len(slaves):
            masters = dm.node_map[slaves]
            comp = np.arange(dm.n_sd)
            full[(slaves[:, None] * dm.n_sd + comp).ravel()] = full[(masters[:, None] * dm.n_sd + comp).ravel()]
            full[dm.n_u + slaves] = full[dm.n_u + masters]
        return full, x[self.n_free:]


def apply_constraints(system: GlobalSystem) -> ConstrainedSystem:
    """Eliminate prescribed dofs, drop periodic slaves and append multipliers."""
    dm = system.dofmap
    K = system.K.tocsr()
    n = dm.n_dofs
    active = np.zeros(n, dtype=bool)
    active[np.unique(dm.element_dofs(system.mesh.elements))] = True
    active[dm.slave_dofs] = False
    fixed = np.zeros(n, dtype=bool)
    fixed[dm.dirichlet_dofs] = True
    free = np.flatnonzero(active & ~fixed)
    g = np.zeros(n)
    g[dm.dirichlet_dofs] = dm.dirichlet_values
    f = system.f - K @ g
    Kff = K[free][:, free]
    ff = f[free]

    m = dm.n_multipliers
    if m:
        pos = -np.ones(n, dtype=np.int64)
        pos[free] = np.arange(len(free))
        rows, cols, vals, rhs = [], [], [], np.zeros(m)
        for r, (a, b) in enumerate(dm.constraint_rows):
            for dof, sign in ((a, 1.0), (b, -1.0)):
                if fixed[dof]:
                    rhs[r] -= sign * g[dof]
                else:
                    rows.append(r)
                    cols.append(pos[dof])
                    vals.append(sign)
        Gm = sp.csr_matrix((vals, (rows, cols)), shape=(m, len(free)))
        Kff = sp.bmat([[Kff, Gm.T], [Gm, None]], format="csr")
        ff = np.concatenate([ff, rhs])
    return ConstrainedSystem(Kff.tocsr(), ff, free, len(free), m, system)


def dump_matrix(K, path):
    """Write ``i j value`` rows of the nonzeros of ``K``."""
    C = sp.coo_matrix(K)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")

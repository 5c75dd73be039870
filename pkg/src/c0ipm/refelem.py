"""High-order nodal reference elements.

Reference domains: the unit right triangle ``{x, y >= 0, x + y <= 1}``, and
``[-1, 1]^d`` for quadrilaterals and hexahedra. Triangles use warp & blend
nodes (Gauss-Lobatto on the edges), tensor elements use Gauss-Lobatto
tensor nodes ordered with the first coordinate running fastest.

The Lagrange basis is obtained by inverting the monomial Vandermonde matrix,
which is well conditioned for the supported degrees (p <= 4, a few beyond).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from .errors import CapabilityError, ConnectivityError, DomainError, InvertedElementError

MAX_DEGREE = 6

_VERTICES = {
    "triangle": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    "quadrilateral": np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    "hexahedron": np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float),
}

# local vertex lists per face, cyclic for quadrilateral faces
_FACES = {
    "triangle": ((0, 1), (1, 2), (2, 0)),
    "quadrilateral": ((0, 1), (1, 2), (2, 3), (3, 0)),
    "hexahedron": ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
                   (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)),
}

_EDGES = {
    "triangle": ((0, 1), (1, 2), (2, 0)),
    "quadrilateral": ((0, 1), (1, 2), (2, 3), (3, 0)),
    "hexahedron": ((0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4),
                   (0, 4), (1, 5), (2, 6), (3, 7)),
}

_QUAD_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


# ---------------------------------------------------------------------------
# 1D building blocks and quadrature

def gauss_lobatto_points(p):
    if p < 1:
        raise CapabilityError("Gauss-Lobatto points need p >= 1")
    inner = legendre.Legendre.basis(p).deriv().roots() if p > 1 else np.array([])
    return np.concatenate([[-1.0], np.sort(inner.real), [1.0]])


def gauss_legendre(n):
    return legendre.leggauss(n)


def volume_quadrature(shape, degree):
    """Points and weights exact for polynomials of total degree ``degree``.

    The triangle rule is the collapsed Gauss-Jacobi product, which has
    positive weights for every order.
    """
    n = degree // 2 + 1
    if shape == "triangle":
        a, wa = gauss_legendre(n)
        b, wb = roots_jacobi(n, 1.0, 0.0)
        A, B = np.meshgrid(a, b, indexing="ij")
        WA, WB = np.meshgrid(wa, wb, indexing="ij")
        x = 0.25 * (1.0 + A) * (1.0 - B)
        y = 0.5 * (1.0 + B)
        return np.column_stack([x.ravel(), y.ravel()]), (WA * WB).ravel() / 8.0
    if shape in ("segment", "quadrilateral", "hexahedron"):
        dim = {"segment": 1, "quadrilateral": 2, "hexahedron": 3}[shape]
        return _tensor_gauss(n, dim)
    raise CapabilityError(f"no quadrature for shape {shape!r}")


def _tensor_gauss(n, dim):
    x, w = gauss_legendre(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    # first coordinate fastest
    pts = np.column_stack([g.transpose().ravel() for g in grids])
    wts = np.prod([g.transpose().ravel() for g in wgrids], axis=0)
    return pts, wts


def _lagrange_1d(xnodes, x):
    """Values of the 1D Lagrange polynomials on ``xnodes`` at ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape + (len(xnodes),))
    for i, xi in enumerate(xnodes):
        for j, xj in enumerate(xnodes):
            if i != j:
                out[..., i] *= (x - xj) / (xi - xj)
    return out


# ---------------------------------------------------------------------------
# node sets

_WARP_ALPHA = (0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999)


def _warp_factor(p, r):
    r_gll = gauss_lobatto_points(p)
    r_eq = np.linspace(-1.0, 1.0, p + 1)
    warp = _lagrange_1d(r_eq, r) @ (r_gll - r_eq)
    interior = np.abs(r) < 1.0 - 1e-10
    sf = 1.0 - (interior * r) ** 2
    return warp / sf + warp * (interior - 1.0)


def warp_blend_triangle_nodes(p):
    """Warburton's warp & blend nodes mapped to the unit right triangle."""
    L1, L3 = [], []
    for n in range(p + 1):
        for m in range(p + 1 - n):
            L1.append(n / p)
            L3.append(m / p)
    L1, L3 = np.array(L1), np.array(L3)
    L2 = 1.0 - L1 - L3
    x = -L2 + L3
    y = (-L2 - L3 + 2.0 * L1) / np.sqrt(3.0)
    alpha = _WARP_ALPHA[p - 1] if p <= len(_WARP_ALPHA) else 5.0 / 3.0
    w1 = 4 * L2 * L3 * _warp_factor(p, L3 - L2) * (1 + (alpha * L1) ** 2)
    w2 = 4 * L1 * L3 * _warp_factor(p, L1 - L3) * (1 + (alpha * L2) ** 2)
    w3 = 4 * L1 * L2 * _warp_factor(p, L2 - L1) * (1 + (alpha * L3) ** 2)
    x = x + w1 + np.cos(2 * np.pi / 3) * w2 + np.cos(4 * np.pi / 3) * w3
    y = y + np.sin(2 * np.pi / 3) * w2 + np.sin(4 * np.pi / 3) * w3
    # back to barycentrics of the equilateral triangle, then to (r, s)
    lam1 = (np.sqrt(3.0) * y + 1.0) / 3.0
    lam3 = (1.0 - lam1 + x) / 2.0
    pts = np.column_stack([lam3, lam1])
    pts[np.abs(pts) < 1e-14] = 0.0
    return pts


def _tensor_nodes(p, dim):
    x = gauss_lobatto_points(p)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    return np.column_stack([g.transpose().ravel() for g in grids])


# ---------------------------------------------------------------------------
# monomial machinery

def _exponents(shape, p):
    if shape == "triangle":
        return np.array([(i, j) for j in range(p + 1) for i in range(p + 1 - j)])
    dim = 2 if shape == "quadrilateral" else 3
    rng = np.arange(p + 1)
    grids = np.meshgrid(*([rng] * dim), indexing="ij")
    return np.column_stack([g.transpose().ravel() for g in grids])


def _monomials(points, exps, order):
    """Monomials and derivatives: (P, M), (P, M, d), (P, M, d, d)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    P, d = X.shape
    pmax = int(exps.max()) if exps.size else 0
    k = np.arange(pmax + 1)
    pw = X[:, :, None] ** np.maximum(k - 0, 0)
    tab = [pw]
    if order >= 1:
        km1 = np.maximum(k - 1, 0)
        tab.append(np.where(k >= 1, k * X[:, :, None] ** km1, 0.0))
    if order >= 2:
        km2 = np.maximum(k - 2, 0)
        tab.append(np.where(k >= 2, k * (k - 1) * X[:, :, None] ** km2, 0.0))

    def factor(dim, which):
        return tab[which][:, dim, :][:, exps[:, dim]]

    base = [factor(j, 0) for j in range(d)]
    vals = np.prod(base, axis=0)
    out = [vals]
    if order >= 1:
        grads = np.empty((P, len(exps), d))
        for a in range(d):
            f = [factor(j, 1 if j == a else 0) for j in range(d)]
            grads[:, :, a] = np.prod(f, axis=0)
        out.append(grads)
    if order >= 2:
        hess = np.empty((P, len(exps), d, d))
        for a in range(d):
            for b in range(a, d):
                if a == b:
                    f = [factor(j, 2 if j == a else 0) for j in range(d)]
                else:
                    f = [factor(j, 1 if j in (a, b) else 0) for j in range(d)]
                hess[:, :, a, b] = hess[:, :, b, a] = np.prod(f, axis=0)
        out.append(hess)
    return out


# ---------------------------------------------------------------------------
# reference element

@dataclass(frozen=True, eq=False)
class FaceData:
    vertices: tuple
    nodes: np.ndarray
    param_points: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normal: np.ndarray
    N: np.ndarray
    dN: np.ndarray
    d2N: np.ndarray


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    shape: str
    degree: int
    dim: int
    nodes: np.ndarray
    exponents: np.ndarray
    coeffs: np.ndarray
    vertex_ids: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray
    N: np.ndarray
    dN: np.ndarray
    d2N: np.ndarray
    faces: tuple
    edges: tuple
    face_shape: str
    flip_tables: dict

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def vertices(self):
        return _VERTICES[self.shape]

    def face_tabulation(self, face, rotation=0):
        """(weights, N, dN, d2N) at the face points, reordered by ``rotation``.

        With a non-zero rotation the returned rows follow the point order of
        the neighbouring element that owns the face with rotation 0.
        """
        fd = self.faces[face]
        if rotation == 0:
            return fd.weights, fd.N, fd.dN, fd.d2N
        inv = np.argsort(self.flip_tables[rotation])
        return fd.weights[inv], fd.N[inv], fd.dN[inv], fd.d2N[inv]

    def face_points(self, face, rotation=0):
        fd = self.faces[face]
        if rotation == 0:
            return fd.points
        return fd.points[np.argsort(self.flip_tables[rotation])]


def _contains(shape, pts, tol=1e-10):
    if shape == "triangle":
        return (pts[:, 0] >= -tol) & (pts[:, 1] >= -tol) & (pts.sum(axis=1) <= 1.0 + tol)
    return np.all(np.abs(pts) <= 1.0 + tol, axis=1)


def tabulate(re: ReferenceElement, points, order=0, check=True):
    """Basis values (and gradients / Hessians for ``order`` 1, 2) at ``points``.

    Returns a list ``[N]``, ``[N, dN]`` or ``[N, dN, d2N]`` with shapes
    (P, nb), (P, nb, d), (P, nb, d, d).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != re.dim:
        raise DomainError(f"points must have {re.dim} coordinates")
    if check and not np.all(_contains(re.shape, pts)):
        raise DomainError("point outside the reference element")
    mono = _monomials(pts, re.exponents, order)
    out = [mono[0] @ re.coeffs]
    if order >= 1:
        out.append(np.einsum("pmk,ma->pak", mono[1], re.coeffs))
    if order >= 2:
        out.append(np.einsum("pmkl,ma->pakl", mono[2], re.coeffs))
    return out


def _face_geometry(verts):
    """Affine face map ``xi = origin + T s`` on the canonical face domain."""
    verts = np.asarray(verts, dtype=float)
    if len(verts) == 2:
        T = (verts[1] - verts[0])[:, None] / 2.0
        origin = (verts[0] + verts[1]) / 2.0
    else:
        T = np.column_stack([(verts[1] - verts[0]) / 2.0, (verts[3] - verts[0]) / 2.0])
        origin = verts[0] + T @ np.ones(2)
    return origin, T


def _reference_normal(shape, T, origin):
    d = T.shape[0]
    if d == 2:
        n = np.array([T[1, 0], -T[0, 0]])
    else:
        n = np.cross(T[:, 0], T[:, 1])
    n = n / np.linalg.norm(n)
    centroid = _VERTICES[shape].mean(axis=0)
    if np.dot(n, origin - centroid) < 0:
        n = -n
    return n


def flip_permutation(face_shape, n_qp, rotation):
    """Permutation aligning face quadrature points across a face.

    ``perm[k]`` is the index, in the first (left) element's face point order,
    of the point that the second (right) element sees as point ``k``.
    Segment faces have codes 0 (same direction) and 1 (reversed);
    quadrilateral faces have ``2 * r + parity`` where ``r`` is the right
    face corner holding the left face's corner 0 and ``parity`` is 1 when
    the corner cycles run in opposite directions.
    """
    if face_shape == "segment":
        if rotation == 0:
            return np.arange(n_qp)
        if rotation == 1:
            return np.arange(n_qp)[::-1].copy()
        raise ConnectivityError(f"invalid segment rotation code {rotation}")
    if face_shape != "quadrilateral":
        raise ConnectivityError(f"unknown face shape {face_shape!r}")
    if not (isinstance(rotation, (int, np.integer)) and 0 <= rotation < 8):
        raise ConnectivityError(f"invalid quadrilateral rotation code {rotation}")
    n1 = int(round(np.sqrt(n_qp)))
    if n1 * n1 != n_qp:
        raise ConnectivityError("quadrilateral face needs a square number of points")
    s, _ = _tensor_gauss(n1, 2)
    r, parity = divmod(int(rotation), 2)
    step = 1 if parity == 0 else -1
    pi = [(r + step * m) % 4 for m in range(4)]
    c = _QUAD_CORNERS
    A = np.column_stack([(c[pi[1]] - c[pi[0]]) / 2.0, (c[pi[3]] - c[pi[0]]) / 2.0])
    b = c[pi[0]] - A @ c[0]
    # right point t_k = A s + b  <=>  s = A^-1 (t_k - b)
    s_of_t = np.linalg.solve(A, (s - b).T).T
    dist = np.linalg.norm(s_of_t[:, None, :] - s[None, :, :], axis=2)
    perm = dist.argmin(axis=1)
    assert np.all(dist[np.arange(n_qp), perm] < 1e-12)
    return perm


@functools.lru_cache(maxsize=None)
def build_reference_element(shape, p, face_degree=None, volume_degree=None):
    """Tabulated reference element of degree ``p``.

    Volume quadrature defaults to degree ``2p + 2`` and face quadrature to
    ``2p + 1``.
    """
    if shape not in _VERTICES:
        raise CapabilityError(f"unsupported element shape {shape!r}")
    if not (isinstance(p, (int, np.integer)) and 1 <= p <= MAX_DEGREE):
        raise CapabilityError(f"unsupported degree {p!r}")
    dim = _VERTICES[shape].shape[1]
    nodes = warp_blend_triangle_nodes(p) if shape == "triangle" else _tensor_nodes(p, dim)
    exps = _exponents(shape, p)
    V = _monomials(nodes, exps, 0)[0]
    coeffs = np.linalg.inv(V)

    verts = _VERTICES[shape]
    vertex_ids = np.array([int(np.argmin(np.linalg.norm(nodes - v, axis=1))) for v in verts])

    vdeg = 2 * p + 2 if volume_degree is None else volume_degree
    qp, qw = volume_quadrature(shape, vdeg)
    re = ReferenceElement(shape, p, dim, nodes, exps, coeffs, vertex_ids, qp, qw,
                          None, None, None, (), _EDGES[shape],
                          "segment" if dim == 2 else "quadrilateral", {})
    N, dN, d2N = tabulate(re, qp, 2)

    fdeg = 2 * p + 1 if face_degree is None else face_degree
    face_param, face_w = volume_quadrature("segment" if dim == 2 else "quadrilateral", fdeg)
    faces = []
    for fv in _FACES[shape]:
        origin, T = _face_geometry(verts[list(fv)])
        pts = origin + face_param @ T.T
        scale = np.sqrt(np.linalg.det(T.T @ T))
        normal = _reference_normal(shape, T, origin)
        on_face = np.abs((nodes - origin) @ normal) < 1e-12
        fN, fdN, fd2N = tabulate(re, pts, 2)
        faces.append(FaceData(tuple(fv), np.flatnonzero(on_face), face_param, pts,
                              face_w * scale, normal, fN, fdN, fd2N))
    nq = len(face_w)
    n_rot = 2 if dim == 2 else 8
    flips = {r: flip_permutation(re.face_shape, nq, r) for r in range(n_rot)}
    for arr in (nodes, coeffs, qp, qw, N, dN, d2N):
        arr.setflags(write=False)
    object.__setattr__(re, "N", N)
    object.__setattr__(re, "dN", dN)
    object.__setattr__(re, "d2N", d2N)
    object.__setattr__(re, "faces", tuple(faces))
    object.__setattr__(re, "flip_tables", flips)
    return re


# ---------------------------------------------------------------------------
# isoparametric geometry

@dataclass(frozen=True, eq=False)
class GeometryFactors:
    """Geometry at quadrature points of a batch of elements.

    Arrays carry a leading element axis E and a point axis Q.
    """

    x: np.ndarray          # (E, Q, d)
    J: np.ndarray          # (E, Q, d, d), J[.., i, k] = dx_i / dxi_k
    detJ: np.ndarray       # (E, Q)
    invJ: np.ndarray       # (E, Q, d, d)
    map_hessian: np.ndarray  # (E, Q, d, d, d), d2 x_m / dxi_k dxi_l
    N: np.ndarray          # (Q, nb)
    grad: np.ndarray       # (E, Q, nb, d)
    hess: np.ndarray       # (E, Q, nb, d, d)
    weights: np.ndarray    # (E, Q), quadrature weight times measure
    normal: np.ndarray | None = None  # (E, Q, d)


def physical_geometry(re: ReferenceElement, elem_coords, which="volume", rotation=0,
                      tab=None, check=True):
    """Isoparametric chain rule up to second derivatives.

    ``which`` is ``"volume"`` or a local face index. ``tab`` overrides the
    tabulation with ``(weights, N, dN, d2N)`` at arbitrary reference points.
    A 2D ``elem_coords`` (single element) gives results without the element axis.
    """
    X = np.asarray(elem_coords, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.shape[1] != re.n_nodes:
        raise DomainError(f"expected {re.n_nodes} nodes per element, got {X.shape[1]}")
    ref_normal = None
    if tab is not None:
        w, N, dN, d2N = tab
    elif which == "volume":
        w, N, dN, d2N = re.quad_weights, re.N, re.dN, re.d2N
    else:
        w, N, dN, d2N = re.face_tabulation(which, rotation)
        ref_normal = re.faces[which].normal

    x = np.einsum("qa,ead->eqd", N, X)
    J = np.einsum("qak,ead->eqdk", dN, X)
    detJ = np.linalg.det(J)
    if check and np.any(detJ <= 0):
        raise InvertedElementError("non-positive Jacobian determinant")
    invJ = np.linalg.inv(J)
    G = np.einsum("qak,eqkd->eqad", dN, invJ)
    X2 = np.einsum("qakl,eam->eqmkl", d2N, X)
    Href = d2N[None] - np.einsum("eqam,eqmkl->eqakl", G, X2)
    H = np.einsum("eqki,eqakl,eqlj->eqaij", invJ, Href, invJ)

    normal = None
    if ref_normal is not None:
        nvec = np.einsum("eqkd,k->eqd", invJ, ref_normal)
        scale = np.linalg.norm(nvec, axis=-1)
        normal = nvec / scale[..., None]
        weights = w[None] * detJ * scale
    else:
        weights = w[None] * detJ

    out = GeometryFactors(x, J, detJ, invJ, X2, N, G, H, weights, normal)
    if single:
        out = GeometryFactors(*(a[0] if isinstance(a, np.ndarray) and a is not N else a
                                for a in (x, J, detJ, invJ, X2, N, G, H, weights, normal)))
    return out

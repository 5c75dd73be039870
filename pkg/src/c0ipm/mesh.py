"""Meshes, face/edge connectivity, boundary classification and periodicity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import (GeometryError, NonManifoldError, ParseError,
                     SpecificationError)
from .refelem import ReferenceElement, build_reference_element, _FACES

SHAPE_CODES = {"triangle": "TRI", "quadrilateral": "QUAD", "hexahedron": "HEX"}
_CODE_SHAPES = {v: k for k, v in SHAPE_CODES.items()}


@dataclass(frozen=True, eq=False)
class Mesh:
    coords: np.ndarray
    elements: np.ndarray
    shape: str
    degree: int
    boundary_tags: dict = field(default_factory=dict)

    def __post_init__(self):
        nb = self.ref.n_nodes
        if self.elements.ndim != 2 or self.elements.shape[1] != nb:
            raise GeometryError(f"{self.shape} of degree {self.degree} needs {nb} nodes per element")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.coords)):
            raise GeometryError("element connectivity refers to missing nodes")
        if self.coords.shape[1] != self.ref.dim:
            raise GeometryError("node coordinates do not match the element dimension")

    @property
    def ref(self) -> ReferenceElement:
        return build_reference_element(self.shape, self.degree)

    @property
    def n_sd(self):
        return self.coords.shape[1]

    @property
    def n_nodes(self):
        return len(self.coords)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def vertices(self):
        """Global ids of the element corner nodes, (m, n_vertices)."""
        return self.elements[:, self.ref.vertex_ids]

    def element_coords(self, elems=None):
        conn = self.elements if elems is None else self.elements[elems]
        return self.coords[conn]

    def diameters(self):
        v = self.coords[self.vertices]
        diff = v[:, :, None, :] - v[:, None, :, :]
        return np.linalg.norm(diff, axis=-1).max(axis=(1, 2))

    def bounding_box(self):
        return self.coords.min(axis=0), self.coords.max(axis=0)


# ---------------------------------------------------------------------------
# generation and IO

def _merge_nodes(points, tol):
    tree = cKDTree(points)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # renumber by first occurrence for a deterministic, generation-ordered numbering
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    new_id = np.empty_like(order)
    new_id[order] = np.arange(len(order))
    ids = new_id[labels]
    return points[first[order]], ids


_TRIANGLE_PATTERNS = {
    # triangles per cell in unit-cell coordinates; "alternating" flips odd cells
    "diagonal": [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]],
    "anti": [[(0, 0), (1, 0), (0, 1)], [(1, 0), (1, 1), (0, 1)]],
    "crossed": [[(0, 0), (1, 0), (.5, .5)], [(1, 0), (1, 1), (.5, .5)],
                [(1, 1), (0, 1), (.5, .5)], [(0, 1), (0, 0), (.5, .5)]],
}


def structured_mesh(lower, upper, divisions, shape="triangle", p=1, pattern="diagonal"):
    """Straight-sided mesh of an axis-aligned box.

    Triangle ``pattern``: ``"diagonal"`` splits every cell from its lower-left
    corner, ``"anti"`` along the other diagonal, ``"alternating"`` switches
    between the two in a checkerboard and ``"crossed"`` cuts each cell into
    four triangles through its centre.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    divisions = np.broadcast_to(np.asarray(divisions, dtype=int), lower.shape)
    if np.any(divisions < 1):
        raise GeometryError("divisions must be >= 1")
    dim = len(lower)
    expected = {"triangle": 2, "quadrilateral": 2, "hexahedron": 3}.get(shape)
    if expected != dim:
        raise GeometryError(f"shape {shape!r} does not fit a {dim}D box")
    re = build_reference_element(shape, p)
    h = (upper - lower) / divisions
    # first axis fastest
    cells = np.array(list(itertools.product(*[range(n) for n in divisions[::-1]])))[:, ::-1]
    origin = lower + cells * h

    if shape == "triangle":
        ref = re.nodes
        if pattern == "alternating":
            odd = (cells.sum(axis=1) % 2 == 1)
            tris = [np.where(odd[:, None, None], np.array(t1, float)[None], np.array(t0, float)[None])
                    for t0, t1 in zip(_TRIANGLE_PATTERNS["diagonal"], _TRIANGLE_PATTERNS["anti"])]
        elif pattern in _TRIANGLE_PATTERNS:
            tris = [np.broadcast_to(np.array(t, float), (len(cells), 3, 2))
                    for t in _TRIANGLE_PATTERNS[pattern]]
        else:
            raise GeometryError(f"unknown triangle pattern {pattern!r}")
        pts = []
        for t in tris:
            v0, v1, v2 = (origin + t[:, k] * h for k in range(3))
            pts.append(v0[:, None, :] + ref[None, :, :1] * (v1 - v0)[:, None, :]
                       + ref[None, :, 1:] * (v2 - v0)[:, None, :])
        # interleave the triangles of each cell
        pts = np.stack(pts, axis=1).reshape(-1, re.n_nodes, dim)
    else:
        ref01 = (re.nodes + 1.0) / 2.0
        pts = origin[:, None, :] + ref01[None] * h
    flat = pts.reshape(-1, dim)
    coords, ids = _merge_nodes(flat, 1e-9 * h.min())
    return Mesh(coords, ids.reshape(pts.shape[:2]), shape, p)


def uniform_levels(lower, upper, base_divisions, levels, shape, p):
    """Nested meshes obtained by halving the cell size ``levels - 1`` times."""
    base = np.asarray(base_divisions)
    return [structured_mesh(lower, upper, base * 2 ** k, shape, p) for k in range(levels)]


def write_mesh(mesh: Mesh, path):
    lines = [f"DIM {mesh.n_sd}", f"DEGREE {mesh.degree}", f"SHAPE {SHAPE_CODES[mesh.shape]}",
             f"NODES {mesh.n_nodes}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in mesh.coords]
    lines.append(f"ELEMS {mesh.n_elements}")
    lines += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    if mesh.boundary_tags:
        lines.append(f"BFACES {len(mesh.boundary_tags)}")
        for (e, f), tag in sorted(mesh.boundary_tags.items()):
            lines.append(f"{e} {f} {tag}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(raw) if ln.strip() and not ln.lstrip().startswith("#")]
    pos = 0

    def header(name):
        nonlocal pos
        if pos >= len(rows):
            raise ParseError(f"missing {name} header", line=len(raw))
        lineno, tok = rows[pos]
        if len(tok) != 2 or tok[0].upper() != name:
            raise ParseError(f"expected '{name} <value>'", line=lineno)
        pos += 1
        return lineno, tok[1]

    def as_int(text, lineno):
        try:
            return int(text)
        except ValueError:
            raise ParseError(f"not an integer: {text!r}", line=lineno) from None

    ln, dim = header("DIM")
    dim = as_int(dim, ln)
    if dim not in (2, 3):
        raise ParseError(f"unsupported dimension {dim}", line=ln)
    ln, deg = header("DEGREE")
    deg = as_int(deg, ln)
    ln, code = header("SHAPE")
    if code.upper() not in _CODE_SHAPES:
        raise ParseError(f"unknown shape {code!r}", line=ln)
    shape = _CODE_SHAPES[code.upper()]
    if (shape == "hexahedron") != (dim == 3):
        raise ParseError(f"shape {code} inconsistent with DIM {dim}", line=ln)
    try:
        nb = build_reference_element(shape, deg).n_nodes
    except Exception as exc:
        raise ParseError(str(exc), line=ln) from None

    ln, n = header("NODES")
    n = as_int(n, ln)
    coords = np.empty((n, dim))
    for k in range(n):
        if pos >= len(rows):
            raise ParseError("unexpected end of file in NODES block", line=len(raw))
        lineno, tok = rows[pos]
        if len(tok) != dim:
            raise ParseError(f"expected {dim} coordinates, got {len(tok)}", line=lineno)
        try:
            coords[k] = [float(t) for t in tok]
        except ValueError:
            raise ParseError("bad coordinate", line=lineno) from None
        pos += 1

    ln, m = header("ELEMS")
    m = as_int(m, ln)
    elems = np.empty((m, nb), dtype=np.int64)
    for k in range(m):
        if pos >= len(rows):
            raise ParseError("unexpected end of file in ELEMS block", line=len(raw))
        lineno, tok = rows[pos]
        if len(tok) != nb:
            raise ParseError(f"expected {nb} node ids, got {len(tok)}", line=lineno)
        ids = [as_int(t, lineno) for t in tok]
        if min(ids) < 0 or max(ids) >= n:
            raise ParseError("node id out of range", line=lineno)
        elems[k] = ids
        pos += 1

    tags = {}
    if pos < len(rows):
        ln, k = header("BFACES")
        nf = len(_FACES[shape])
        for _ in range(as_int(k, ln)):
            if pos >= len(rows):
                raise ParseError("unexpected end of file in BFACES block", line=len(raw))
            lineno, tok = rows[pos]
            if len(tok) != 3:
                raise ParseError("expected 'elem localface tag'", line=lineno)
            e, f = as_int(tok[0], lineno), as_int(tok[1], lineno)
            if not (0 <= e < m and 0 <= f < nf):
                raise ParseError("boundary face reference out of range", line=lineno)
            tags[(e, f)] = tok[2]
            pos += 1
    if pos < len(rows):
        raise ParseError("trailing content", line=rows[pos][0])
    return Mesh(coords, elems, shape, deg, tags)


# ---------------------------------------------------------------------------
# connectivity

@dataclass(frozen=True, eq=False)
class FaceConnectivity:
    """Face table. Boundary faces have ``right == -1``.

    ``rotation`` is the flip code applied to the right element's face points.
    ``h`` is ``min(diameter(left), diameter(right))`` (the left diameter on the boundary).
    """

    left: np.ndarray
    right: np.ndarray
    left_face: np.ndarray
    right_face: np.ndarray
    rotation: np.ndarray
    h: np.ndarray
    n_elements: int
    faces_per_element: int

    @property
    def n_faces(self):
        return len(self.left)

    @property
    def interior(self):
        return np.flatnonzero(self.right >= 0)

    @property
    def boundary(self):
        return np.flatnonzero(self.right < 0)


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """Mesh vertices (2D) or element edges (3D) with their element sets E(k).

    ``classification`` is one of ``interior``, ``boundary-smooth``,
    ``boundary-sharp`` or ``neumann-sharp`` per entity.
    """

    nodes: np.ndarray           # (k, 1) vertex ids in 2D, (k, 2) edge end ids in 3D
    elements: tuple             # tuple of int arrays
    boundary_faces: tuple       # adjacent boundary faces per entity
    classification: np.ndarray

    def __len__(self):
        return len(self.nodes)


def _face_vertex_ids(mesh):
    re = mesh.ref
    fv = np.array([[re.vertex_ids[v] for v in f] for f in _FACES[mesh.shape]])
    return mesh.elements[:, fv]           # (m, nf, nvf)


def _rotation_code(vl, vr):
    vl, vr = list(vl), list(vr)
    if len(vl) == 2:
        return 0 if vr[0] == vl[0] else 1
    r = vr.index(vl[0])
    return 2 * r + (0 if vr[(r + 1) % 4] == vl[1] else 1)


def _face_normals_straight(mesh, elems, lfaces):
    """Outward unit normals of straight faces from corner coordinates."""
    fvid = _face_vertex_ids(mesh)[elems, lfaces]
    P = mesh.coords[fvid]
    centroid = mesh.coords[mesh.vertices[elems]].mean(axis=1)
    if mesh.n_sd == 2:
        t = P[:, 1] - P[:, 0]
        n = np.column_stack([t[:, 1], -t[:, 0]])
    else:
        n = np.cross(P[:, 2] - P[:, 0], P[:, 3] - P[:, 1])
    n /= np.linalg.norm(n, axis=1)[:, None]
    flip = np.einsum("kd,kd->k", n, P.mean(axis=1) - centroid) < 0
    n[flip] *= -1
    return n


def build_connectivity(mesh: Mesh):
    """Face table and edge set of ``mesh``."""
    fvid = _face_vertex_ids(mesh)
    m, nf, nvf = fvid.shape
    keys = np.sort(fvid, axis=2).reshape(m * nf, nvf)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if counts.max() > 2:
        raise NonManifoldError("a face is shared by more than two elements")
    order = np.argsort(inv, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    first = order[starts]
    second = np.where(counts == 2, order[np.minimum(starts + 1, len(order) - 1)], -1)
    eL, fL = np.divmod(first, nf)
    eR = np.where(second >= 0, second // nf, -1)
    fR = np.where(second >= 0, second % nf, -1)
    if np.any((eR >= 0) & (eR == eL)):
        raise NonManifoldError("an element shares a face with itself")
    rot = np.zeros(len(eL), dtype=np.int64)
    for k in np.flatnonzero(eR >= 0):
        rot[k] = _rotation_code(fvid[eL[k], fL[k]], fvid[eR[k], fR[k]])
    diam = mesh.diameters()
    h = np.where(eR >= 0, np.minimum(diam[eL], diam[np.maximum(eR, 0)]), diam[eL])
    conn = FaceConnectivity(eL, eR, fL, fR, rot, h, m, nf)
    return conn, _build_edges(mesh, conn)


def _build_edges(mesh, conn, tags=None):
    re = mesh.ref
    vtx = mesh.vertices
    if mesh.n_sd == 2:
        ent = vtx[:, :, None]                                  # (m, nv, 1)
        fents = _face_vertex_ids(mesh)[:, :, :, None]          # faces contain vertices
    else:
        el = np.array(re.edges)
        ent = np.sort(vtx[:, el], axis=2)                      # (m, 12, 2)
        fv = _face_vertex_ids(mesh)                            # (m, 6, 4)
        fents = np.sort(np.stack([fv, np.roll(fv, -1, axis=2)], axis=-1), axis=-1)
    m, ne, w = ent.shape
    keys = ent.reshape(-1, w)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    elem_of = np.repeat(np.arange(m), ne)
    order = np.argsort(inv, kind="stable")
    splits = np.cumsum(np.bincount(inv, minlength=len(uniq)))[:-1]
    elements = tuple(np.unique(g) for g in np.split(elem_of[order], splits))

    lookup = {tuple(k): i for i, k in enumerate(uniq)}
    bfaces = [[] for _ in range(len(uniq))]
    bidx = conn.boundary
    for f in bidx:
        for k in fents[conn.left[f], conn.left_face[f]]:
            bfaces[lookup[tuple(np.sort(k))]].append(f)
    bfaces = tuple(np.array(sorted(set(b)), dtype=np.int64) for b in bfaces)

    normals = {}
    if len(bidx):
        nrm = _face_normals_straight(mesh, conn.left[bidx], conn.left_face[bidx])
        normals = dict(zip(bidx.tolist(), nrm))
    cls = np.empty(len(uniq), dtype=object)
    for i, faces in enumerate(bfaces):
        if len(faces) == 0:
            cls[i] = "interior"
            continue
        ns = np.array([normals[f] for f in faces])
        sharp = len(ns) > 1 and np.max(1.0 - ns @ ns.T) > 1e-8
        if not sharp:
            cls[i] = "boundary-smooth"
        elif tags is not None and all(tags[f] == "N" for f in faces):
            cls[i] = "neumann-sharp"
        else:
            cls[i] = "boundary-sharp"
    return EdgeSet(uniq, elements, bfaces, cls)


# ---------------------------------------------------------------------------
# boundary specification

Predicate = Callable[[np.ndarray], np.ndarray]


def on_plane(axis, value, tol=1e-9):
    """Predicate selecting points with ``x[axis] == value`` (absolute tolerance)."""
    def pred(x):
        return np.abs(np.asarray(x)[:, axis] - value) <= tol
    return pred


def everywhere(x):
    return np.ones(len(x), dtype=bool)


def any_of(*preds):
    """Union of point predicates."""
    def pred(x):
        out = np.zeros(len(x), dtype=bool)
        for p in preds:
            out |= p(x)
        return out
    return pred


@dataclass
class BoundarySpec:
    """Boundary conditions of the coupled problem.

    Face predicates receive the coordinates of all nodes of a boundary face
    and select the face when every node satisfies them. A Neumann predicate
    is optional; when omitted the Neumann part is the complement of the
    Dirichlet part.

    Data callables receive points (k, d) and, for fluxes, unit normals (k, d).
    """

    u_dirichlet: Predicate | None = None
    du_dirichlet: Predicate | None = None
    phi_dirichlet: Predicate | None = None
    u_neumann: Predicate | None = None
    du_neumann: Predicate | None = None
    phi_neumann: Predicate | None = None
    g1: Callable | None = None
    g2: Callable | None = None
    g3: Callable | None = None
    t_n: Callable | None = None
    r_n: Callable | None = None
    w_n: Callable | None = None
    body_force: Callable | None = None
    charge: Callable | None = None
    point_loads: Sequence = ()
    line_loads: Sequence = ()
    electrodes: Sequence = ()
    periodic: Sequence = ()


FAMILIES = (("u1", "u_dirichlet", "u_neumann"),
            ("u2", "du_dirichlet", "du_neumann"),
            ("phi", "phi_dirichlet", "phi_neumann"))


@dataclass(frozen=True, eq=False)
class PeriodicMap:
    face_pairs: np.ndarray      # (k, 3): master face, slave face, rotation (original face ids)
    node_pairs: np.ndarray      # (n, 2): slave node, master node
    translations: tuple


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Connectivity with boundary tags and every constraint resolved to nodes."""

    mesh: Mesh
    faces: FaceConnectivity
    tags: dict
    edges: EdgeSet
    periodic: PeriodicMap | None
    node_map: np.ndarray
    u_dirichlet_nodes: np.ndarray
    phi_dirichlet_nodes: np.ndarray
    electrode_groups: tuple
    point_loads: tuple
    line_loads: tuple
    spec: BoundarySpec

    def faces_tagged(self, family, tag):
        return np.flatnonzero(self.tags[family] == tag)


def face_node_ids(mesh, elems, lfaces):
    re = mesh.ref
    return [mesh.elements[e, re.faces[f].nodes] for e, f in zip(elems, lfaces)]


def _periodic_identification(mesh, conn, periodic, tol):
    node_map = np.arange(mesh.n_nodes)
    lo, hi = mesh.bounding_box()
    tree = cKDTree(mesh.coords)
    bidx = conn.boundary
    fnodes = face_node_ids(mesh, conn.left[bidx], conn.left_face[bidx])
    masters, slaves, translations = [], [], []
    for axis, period in periodic:
        shift = np.zeros(mesh.n_sd)
        shift[axis] = period
        translations.append(shift)
        for f, nodes in zip(bidx, fnodes):
            x = mesh.coords[nodes]
            if np.all(np.abs(x[:, axis] - lo[axis]) <= tol):
                masters.append(f)
            elif np.all(np.abs(x[:, axis] - (lo[axis] + period)) <= tol):
                slaves.append(f)
                dist, target = tree.query(x - shift)
                if np.any(dist > tol):
                    raise GeometryError("periodic faces are not congruent under the translation")
                node_map[nodes] = target
    # resolve chains (corners with several periodic directions)
    for _ in range(len(periodic) + 1):
        node_map = node_map[node_map]
    return node_map, np.array(masters, dtype=np.int64), np.array(slaves, dtype=np.int64), tuple(translations)


def apply_boundary_spec(mesh: Mesh, conn: FaceConnectivity, spec: BoundarySpec) -> BoundaryData:
    size = float(np.max(mesh.coords.max(axis=0) - mesh.coords.min(axis=0)))
    tol = 1e-10 * max(size, 1e-300) * 1e2
    node_map = np.arange(mesh.n_nodes)
    periodic = None
    faces = conn
    if spec.periodic:
        node_map, masters, slaves, translations = _periodic_identification(mesh, conn, spec.periodic, tol)
        fvid = _face_vertex_ids(mesh)
        mkey = {tuple(sorted(node_map[fvid[conn.left[f], conn.left_face[f]]])): f for f in masters}
        pairs = []
        for s in slaves:
            key = tuple(sorted(node_map[fvid[conn.left[s], conn.left_face[s]]]))
            if key not in mkey:
                raise GeometryError("periodic slave face without a matching master face")
            pairs.append((mkey[key], s))
        if len(pairs) != len(masters):
            raise GeometryError("unmatched periodic master faces")
        left, right = conn.left.copy(), conn.right.copy()
        lf, rf, rot = conn.left_face.copy(), conn.right_face.copy(), conn.rotation.copy()
        h = conn.h.copy()
        diam = mesh.diameters()
        drop = []
        fp = []
        for mface, sface in pairs:
            a, fa = conn.left[mface], conn.left_face[mface]
            b, fb = conn.left[sface], conn.left_face[sface]
            if b < a:
                a, fa, b, fb = b, fb, a, fa
            code = _rotation_code(node_map[fvid[a, fa]], node_map[fvid[b, fb]])
            right[mface], rf[mface], left[mface], lf[mface] = b, fb, a, fa
            rot[mface] = code
            h[mface] = min(diam[a], diam[b])
            drop.append(sface)
            fp.append((mface, sface, code))
        keep = np.setdiff1d(np.arange(conn.n_faces), drop)
        faces = FaceConnectivity(left[keep], right[keep], lf[keep], rf[keep], rot[keep], h[keep],
                                 conn.n_elements, conn.faces_per_element)
        node_pairs = np.array([(s, node_map[s]) for s in range(mesh.n_nodes) if node_map[s] != s],
                              dtype=np.int64).reshape(-1, 2)
        periodic = PeriodicMap(np.array(fp, dtype=np.int64).reshape(-1, 3), node_pairs, translations)

    bidx = faces.boundary
    fnodes = face_node_ids(mesh, faces.left[bidx], faces.left_face[bidx])
    tags = {}
    for family, dname, nname in FAMILIES:
        arr = np.full(faces.n_faces, "", dtype=object)
        dpred, npred = getattr(spec, dname), getattr(spec, nname)
        for f, nodes in zip(bidx, fnodes):
            x = mesh.coords[nodes]
            isd = bool(dpred is not None and np.all(dpred(x)))
            if npred is None:
                arr[f] = "D" if isd else "N"
                continue
            isn = bool(np.all(npred(x)))
            if isd == isn:
                what = "both" if isd else "neither"
                raise SpecificationError(f"boundary face {f} matches {what} {family} Dirichlet and Neumann")
            arr[f] = "D" if isd else "N"
        tags[family] = arr

    def tagged_nodes(family):
        sel = [nodes for f, nodes in zip(bidx, fnodes) if tags[family][f] == "D"]
        return np.unique(node_map[np.concatenate(sel)]) if sel else np.zeros(0, dtype=np.int64)

    groups = []
    for pred in spec.electrodes:
        sel = [nodes for nodes in fnodes if np.all(pred(mesh.coords[nodes]))]
        if not sel:
            raise SpecificationError("electrode predicate selects no boundary face")
        groups.append(np.unique(node_map[np.concatenate(sel)]))

    edges = _build_edges(mesh, faces, tags["u1"])
    vertex_nodes = np.unique(mesh.vertices)
    tree = cKDTree(mesh.coords)
    loads = []
    for loc, vec in spec.point_loads:
        dist, node = tree.query(np.asarray(loc, dtype=float))
        if dist > tol or node not in vertex_nodes:
            raise SpecificationError(f"point load location {tuple(loc)} is not a mesh vertex")
        loads.append((int(node_map[node]), np.asarray(vec, dtype=float)))

    line_loads = []
    if spec.line_loads:
        if mesh.n_sd != 3:
            raise SpecificationError("line loads are only defined in 3D; use point loads in 2D")
        for pred, func in spec.line_loads:
            chosen = []
            for k, cls in enumerate(edges.classification):
                if cls == "interior":
                    continue
                e = int(edges.elements[k][0])
                le = _local_edge(mesh, e, edges.nodes[k])
                nodes = mesh.elements[e, _edge_nodes(mesh.ref, le)]
                if np.all(pred(mesh.coords[nodes])):
                    chosen.append((e, le))
            if not chosen:
                raise SpecificationError("line load predicate selects no boundary edge")
            line_loads.append((tuple(chosen), func))

    return BoundaryData(mesh, faces, tags, edges, periodic, node_map,
                        tagged_nodes("u1"), tagged_nodes("phi"), tuple(groups),
                        tuple(loads), tuple(line_loads), spec)


def _local_edge(mesh, e, end_nodes):
    vtx = mesh.vertices[e]
    for k, (a, b) in enumerate(mesh.ref.edges):
        if {vtx[a], vtx[b]} == set(int(v) for v in end_nodes):
            return k
    raise SpecificationError("edge not found in element")


def _edge_nodes(re, le):
    a, b = re.edges[le]
    va, vb = re.vertices[a], re.vertices[b]
    t = vb - va
    rel = re.nodes - va
    cross = rel - np.outer(rel @ t / (t @ t), t)
    on = np.linalg.norm(cross, axis=1) < 1e-12
    s = (rel @ t) / (t @ t)
    on &= (s > -1e-12) & (s < 1 + 1e-12)
    idx = np.flatnonzero(on)
    return idx[np.argsort(s[idx])]

from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c0ipm.errors import CapabilityError, ConnectivityError, DomainError, InvertedElementError
from c0ipm.refelem import (
    build_reference_element, flip_permutation, gauss_lobatto_points, physical_geometry, tabulate,
    volume_quadrature,
)

SHAPES = [("triangle", p) for p in range(1, 5)] + [("quadrilateral", p) for p in range(1, 5)] + \
         [("hexahedron", p) for p in range(1, 4)]


def _random_reference_points(shape, n, rng):
    if shape == "triangle":
        pts = rng.random((3 * n, 2))
        return pts[pts.sum(axis=1) < 1.0][:n]
    dim = 2 if shape == "quadrilateral" else 3
    return rng.uniform(-1, 1, (n, dim))


def test_node_counts():
    assert build_reference_element("triangle", 4).n_nodes == 15
    assert build_reference_element("hexahedron", 2).n_nodes == 27
    assert build_reference_element("quadrilateral", 3).n_nodes == 16


def test_unsupported_requests():
    with pytest.raises(CapabilityError):
        build_reference_element("tetrahedron", 2)
    with pytest.raises(CapabilityError):
        build_reference_element("triangle", 0)


@pytest.mark.parametrize("shape,p", SHAPES)
def test_kronecker_property(shape, p):
    re = build_reference_element(shape, p)
    N = tabulate(re, re.nodes)[0]
    assert np.abs(N - np.eye(re.n_nodes)).max() < 1e-12


@pytest.mark.parametrize("shape,p", SHAPES)
def test_partition_of_unity(shape, p):
    re = build_reference_element(shape, p)
    tabs = [(re.N, re.dN, re.d2N)] + [(f.N, f.dN, f.d2N) for f in re.faces]
    for N, dN, d2N in tabs:
        assert np.abs(N.sum(axis=1) - 1.0).max() < 1e-12
        assert np.abs(dN.sum(axis=1)).max() < 1e-10
        assert np.abs(d2N.sum(axis=1)).max() < 1e-8


@pytest.mark.parametrize("shape,p", SHAPES)
def test_interpolation_exactness(shape, p, rng):
    re = build_reference_element(shape, p)
    coef = rng.standard_normal(len(re.exponents))

    def poly(x):
        # total degree <= p on simplices, degree <= p per variable on tensor elements
        return sum(c * np.prod(x ** e, axis=1) for c, e in zip(coef, re.exponents))

    pts = _random_reference_points(shape, 20, rng)
    got = tabulate(re, pts)[0] @ poly(re.nodes)
    want = poly(pts)
    assert np.abs(got - want).max() <= 1e-12 * max(1.0, np.abs(want).max())


@pytest.mark.parametrize("degree", range(0, 11))
def test_triangle_quadrature_exactness(degree):
    pts, w = volume_quadrature("triangle", degree)
    assert np.all(w > 0)
    for a in range(degree + 1):
        b = degree - a
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        got = np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
        assert got == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("shape,dim", [("quadrilateral", 2), ("hexahedron", 3)])
def test_tensor_quadrature_exactness(shape, dim):
    pts, w = volume_quadrature(shape, 9)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(2.0 ** dim, rel=1e-14)
    for k in range(10):
        exact = (2.0 / (k + 1) if k % 2 == 0 else 0.0) * 2.0 ** (dim - 1)
        assert np.sum(w * pts[:, 0] ** k) == pytest.approx(exact, rel=1e-13, abs=1e-14)


def test_face_quadrature_measures():
    re = build_reference_element("triangle", 3)
    lengths = sorted(f.weights.sum() for f in re.faces)
    np.testing.assert_allclose(lengths, [1.0, 1.0, np.sqrt(2.0)], rtol=1e-14)
    for f in build_reference_element("hexahedron", 2).faces:
        assert f.weights.sum() == pytest.approx(4.0, rel=1e-14)


def test_gauss_lobatto_points():
    np.testing.assert_allclose(gauss_lobatto_points(2), [-1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(gauss_lobatto_points(3), [-1, -1 / np.sqrt(5), 1 / np.sqrt(5), 1], rtol=1e-14)


def test_tabulate_rejects_outside_points():
    re = build_reference_element("triangle", 2)
    with pytest.raises(DomainError):
        tabulate(re, [[0.8, 0.8]])
    tabulate(re, [[0.5, 0.5 + 5e-11]])


def test_quadratic_edge_function_has_constant_second_derivative(rng):
    re = build_reference_element("quadrilateral", 2)
    pts = _random_reference_points("quadrilateral", 6, rng)
    d2 = tabulate(re, pts, 2)[2]
    # node 1 sits at (0, -1): (1 - x^2) y (y - 1) / 2 has d2/dx2 = -y (y - 1)
    k = int(np.argmin(np.linalg.norm(re.nodes - [0.0, -1.0], axis=1)))
    np.testing.assert_allclose(d2[:, k, 0, 0], -pts[:, 1] * (pts[:, 1] - 1.0), atol=1e-12)
    # an edge-only function varies along one axis only
    line = tabulate(re, pts, 2)[2][:, k, 1, 1]
    np.testing.assert_allclose(line, (1 - pts[:, 0] ** 2), atol=1e-12)


@pytest.mark.parametrize("shape,p", [("triangle", 4), ("quadrilateral", 3), ("hexahedron", 2)])
def test_hessian_matches_finite_differences(shape, p, rng):
    re = build_reference_element(shape, p)
    x = _random_reference_points(shape, 1, rng) * 0.8 + (0.05 if shape == "triangle" else 0.0)
    step = 1e-5
    _, _, H = tabulate(re, x, 2)
    for k in range(re.dim):
        e = np.zeros(re.dim)
        e[k] = step
        gp = tabulate(re, x + e, 1)[1]
        gm = tabulate(re, x - e, 1)[1]
        fd = (gp - gm) / (2 * step)
        assert np.abs(fd - H[:, :, :, k]).max() <= 1e-6 * np.abs(H).max()


def test_flip_permutation_examples():
    np.testing.assert_array_equal(flip_permutation("segment", 5, 1), [4, 3, 2, 1, 0])
    np.testing.assert_array_equal(flip_permutation("segment", 5, 0), np.arange(5))
    np.testing.assert_array_equal(flip_permutation("quadrilateral", 9, 0), np.arange(9))
    with pytest.raises(ConnectivityError):
        flip_permutation("segment", 5, 2)
    with pytest.raises(ConnectivityError):
        flip_permutation("quadrilateral", 9, 8)


@pytest.mark.parametrize("rotation", range(8))
def test_quadrilateral_flip_group_property(rotation):
    perm = flip_permutation("quadrilateral", 16, rotation)
    inv = np.argsort(perm)
    np.testing.assert_array_equal(perm[inv], np.arange(16))
    assert sorted(perm) == list(range(16))


def test_affine_triangle_geometry():
    re = build_reference_element("triangle", 2)
    X = 2.0 * re.nodes
    g = physical_geometry(re, X)
    np.testing.assert_allclose(g.detJ, 4.0, rtol=1e-14)
    np.testing.assert_allclose(g.grad, re.dN / 2.0, atol=1e-14)
    np.testing.assert_allclose(g.hess, re.d2N / 4.0, atol=1e-12)
    assert np.abs(g.map_hessian).max() < 1e-13


def test_identity_map_keeps_hessians():
    re = build_reference_element("quadrilateral", 3)
    g = physical_geometry(re, re.nodes)
    np.testing.assert_allclose(g.hess, re.d2N, atol=1e-12)


def test_inverted_element_detected():
    re = build_reference_element("triangle", 1)
    with pytest.raises(InvertedElementError):
        physical_geometry(re, re.nodes[[0, 2, 1]])


def _curved_quadratic_triangle():
    re = build_reference_element("triangle", 2)
    X = re.nodes.copy()
    # bow the hypotenuse outward
    mid = np.argmin(np.linalg.norm(X - [0.5, 0.5], axis=1))
    X[mid] = [0.62, 0.62]
    return re, X


def test_curved_element_hessian_chain_rule(rng):
    re, X = _curved_quadratic_triangle()
    xi = np.array([[0.2, 0.3]])
    step = 1e-5

    def at(p):
        N, dN, d2N = tabulate(re, p, 2)
        return physical_geometry(re, X, tab=(np.ones(1), N, dN, d2N))

    g = at(xi)
    assert np.abs(g.map_hessian).max() > 0.1
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        fd = (at(xi + e).grad - at(xi - e).grad) / (2 * step)
        # d(grad_x N)/d xi_k = hess_x N . dx/dxi_k
        chain = np.einsum("qaij,qj->qai", g.hess, g.J[:, :, k])
        assert np.abs(fd - chain).max() <= 1e-5 * np.abs(chain).max()


def test_face_normals_are_outward_units():
    re, X = _curved_quadratic_triangle()
    centroid = X.mean(axis=0)
    for f in range(3):
        g = physical_geometry(re, X, which=f)
        np.testing.assert_allclose(np.linalg.norm(g.normal, axis=-1), 1.0, rtol=1e-14)
        assert np.all(np.einsum("qd,qd->q", g.normal, g.x - centroid) > 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), p=st.integers(1, 4))
def test_affine_gradients_reproduce_linear_fields(seed, p):
    rng = np.random.default_rng(seed)
    re = build_reference_element("triangle", p)
    A = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
    if np.linalg.det(A) <= 0.1:
        A[:, 0] *= -1
    if np.linalg.det(A) <= 0.1:
        return
    X = re.nodes @ A.T + rng.standard_normal(2)
    c = rng.standard_normal(2)
    g = physical_geometry(re, X)
    grad = np.einsum("qad,a->qd", g.grad, X @ c)
    np.testing.assert_allclose(grad, np.broadcast_to(c, grad.shape), atol=1e-11)

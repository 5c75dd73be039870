import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c0ipm.errors import GeometryError, ParameterError
from c0ipm.material import (
    MaterialParameters, PointKinematics, build_material_tensors, double_traction, evaluate_constitutive,
    isotropic_elasticity, lame_constants, strain_gradient_stress,
)
from c0ipm.problems import CONVERGENCE_MATERIAL


def _random_kinematics(rng, d, batch=()):
    a = rng.standard_normal(batch + (d, d))
    g = rng.standard_normal(batch + (d, d, d))
    return PointKinematics(0.5 * (a + np.swapaxes(a, -1, -2)), 0.5 * (g + np.swapaxes(g, -2, -3)),
                           rng.standard_normal(batch + (d,)))


def test_lame_arithmetic():
    mat = build_material_tensors(MaterialParameters(E=2.5, nu=0.25), 2)
    assert mat.C[0, 0, 0, 0] == pytest.approx(3.0, rel=1e-14)
    assert mat.l2 * mat.C[0, 0, 0, 0] == pytest.approx(0.0)
    mat = build_material_tensors(MaterialParameters(E=2.5, nu=0.25, l=1.1), 2)
    assert mat.l2 * mat.C[0, 0, 0, 0] == pytest.approx(3.63, rel=1e-14)


def test_elasticity_against_voigt_oracle():
    # plane strain isotropic matrix in Voigt notation
    E, nu = 7.0, 0.3
    f = E / ((1 + nu) * (1 - 2 * nu))
    D = f * np.array([[1 - nu, nu, 0], [nu, 1 - nu, 0], [0, 0, (1 - 2 * nu) / 2]])
    C = build_material_tensors(MaterialParameters(E=E, nu=nu), 2).C
    voigt = [(0, 0), (1, 1), (0, 1)]
    got = np.array([[C[i, j, k, l] for (k, l) in voigt] for (i, j) in voigt])
    np.testing.assert_allclose(got, D, rtol=1e-14)


def test_plane_stress_switch():
    E, nu = 1.0, 0.3
    C = build_material_tensors(MaterialParameters(E=E, nu=nu, plane="stress"), 2).C
    assert C[0, 0, 0, 0] == pytest.approx(E / (1 - nu ** 2), rel=1e-14)
    assert C[0, 0, 1, 1] == pytest.approx(E * nu / (1 - nu ** 2), rel=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_tensor_symmetries(d):
    mat = build_material_tensors(CONVERGENCE_MATERIAL.with_(piezo_axis=d - 1), d)
    C, e, mu = mat.C, mat.e, mat.mu
    assert np.array_equal(C, C.transpose(1, 0, 2, 3))
    assert np.array_equal(C, C.transpose(0, 1, 3, 2))
    assert np.array_equal(C, C.transpose(2, 3, 0, 1))
    assert np.array_equal(e, e.transpose(0, 2, 1))
    assert np.array_equal(mu, mu.transpose(0, 2, 1, 3))
    assert np.count_nonzero(mat.kappa - np.diag(np.diag(mat.kappa))) == 0


def test_piezo_convention():
    mat = build_material_tensors(CONVERGENCE_MATERIAL, 2)
    assert mat.e[0, 0, 0] == 7.2
    assert mat.e[0, 1, 1] == 1.33
    assert mat.e[1, 0, 1] == mat.e[1, 1, 0] == 1.73


@pytest.mark.parametrize("kwargs", [dict(nu=0.5), dict(nu=0.7), dict(kappa=-1.0), dict(E=0.0), dict(l=-1.0)])
def test_invalid_parameters(kwargs):
    params = MaterialParameters(E=1.0, nu=0.2).with_(**kwargs)
    with pytest.raises(ParameterError):
        build_material_tensors(params, 2)


def test_zero_state_gives_zero_stresses(coupled_2d):
    z = PointKinematics(np.zeros((2, 2)), np.zeros((2, 2, 2)), np.zeros(2))
    s = evaluate_constitutive(z, coupled_2d)
    assert not np.any(s.sigma_hat) and not np.any(s.sigma_tilde) and not np.any(s.D_hat)


def test_constant_strain(coupled_2d, rng):
    eps = _random_kinematics(rng, 2).eps
    s = evaluate_constitutive(PointKinematics(eps, np.zeros((2, 2, 2)), np.zeros(2)), coupled_2d)
    assert not np.any(s.sigma_tilde)
    np.testing.assert_allclose(s.D_hat, np.einsum("lij,ij->l", coupled_2d.e, eps), rtol=1e-15)


def test_uncoupled_is_block_diagonal(rng):
    mat = build_material_tensors(CONVERGENCE_MATERIAL.uncoupled(), 2)
    kin = _random_kinematics(rng, 2)
    s = evaluate_constitutive(kin, mat)
    np.testing.assert_allclose(s.D_hat, 1.21 * kin.Efield, rtol=1e-15)
    np.testing.assert_array_equal(s.sigma_hat, np.einsum("ijkl,kl->ij", mat.C, kin.eps))
    other = evaluate_constitutive(PointKinematics(kin.eps, kin.grad_eps, 10 * kin.Efield), mat)
    np.testing.assert_array_equal(other.sigma_hat, s.sigma_hat)
    np.testing.assert_array_equal(other.sigma_tilde, s.sigma_tilde)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), d=st.sampled_from([2, 3]))
def test_stress_symmetry_property(seed, d):
    rng = np.random.default_rng(seed)
    mat = build_material_tensors(CONVERGENCE_MATERIAL, d)
    s = evaluate_constitutive(_random_kinematics(rng, d, (4,)), mat)
    scale = np.abs(s.sigma_hat).max()
    assert np.abs(s.sigma_hat - np.swapaxes(s.sigma_hat, -1, -2)).max() <= 1e-14 * scale
    scale = np.abs(s.sigma_tilde).max()
    assert np.abs(s.sigma_tilde - np.swapaxes(s.sigma_tilde, -2, -3)).max() <= 1e-14 * scale


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_coupling_adjointness(seed):
    rng = np.random.default_rng(seed)
    mat = build_material_tensors(CONVERGENCE_MATERIAL, 3)
    a, b = _random_kinematics(rng, 3), _random_kinematics(rng, 3)
    lhs = np.einsum("ij,l,lij->", a.eps, -b.Efield, mat.e)
    rhs = -b.Efield @ np.einsum("lij,ij->l", mat.e, a.eps)
    assert lhs == pytest.approx(rhs, rel=1e-13)
    lhs = np.einsum("ijk,l,lijk->", a.grad_eps, -b.Efield, mat.mu)
    rhs = -b.Efield @ np.einsum("lijk,ijk->l", mat.mu, a.grad_eps)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_strain_gradient_stress_matches_rank6_contraction(rng):
    d = 3
    mat = build_material_tensors(CONVERGENCE_MATERIAL, d)
    # strain linear in x: eps(x) = E0 + G0 . x, so grad eps = G0
    G0 = rng.standard_normal((d, d, d))
    G0 = 0.5 * (G0 + G0.transpose(1, 0, 2))
    h6 = mat.l2 * np.einsum("ijlm,kn->ijklmn", mat.C, np.eye(d))
    direct = np.einsum("ijklmn,lmn->ijk", h6, G0)
    shortcut = strain_gradient_stress(G0, mat)
    assert np.abs(direct - shortcut).max() <= 1e-14 * np.abs(direct).max()


def test_double_traction_examples(rng):
    assert not np.any(double_traction(np.zeros((2, 2, 2)), [1.0, 0.0]))
    s = rng.standard_normal((2, 2, 2))
    s = 0.5 * (s + s.transpose(1, 0, 2))
    np.testing.assert_array_equal(double_traction(s, [1.0, 0.0]), s[:, 0, 0])
    n = np.array([0.6, 0.8])
    np.testing.assert_allclose(double_traction(s, n), double_traction(s, -n), rtol=1e-15)
    loop = np.zeros(2)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                loop[i] += s[i, j, k] * n[j] * n[k]
    np.testing.assert_allclose(double_traction(s, n), loop, rtol=1e-14)


def test_double_traction_rejects_non_unit_normal():
    with pytest.raises(GeometryError):
        double_traction(np.zeros((2, 2, 2)), [1.0, 1.0])


def test_isotropic_helpers():
    lam, G = lame_constants(2.5, 0.25, 2)
    assert (lam, G) == pytest.approx((1.0, 1.0))
    C = isotropic_elasticity(lam, G, 3)
    assert C[0, 1, 0, 1] == G

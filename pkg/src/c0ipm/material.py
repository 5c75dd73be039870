"""Constitutive tensors for linear flexoelectricity with strain gradient elasticity.

Index conventions used throughout the package:

* ``C[i, j, k, l]`` elasticity, ``sigma_hat_ij = C_ijkl eps_kl``.
* ``e[l, i, j]`` piezoelectric, couples field component ``l`` with strain ``ij``.
* ``mu[l, i, j, k]`` flexoelectric, couples field component ``l`` with
  ``d eps_ij / d x_k``.
* ``grad_eps[..., i, j, k] = d eps_ij / d x_k``.

The rank-6 strain gradient tensor ``h_ijklmn = l^2 C_ijlm delta_kn`` is never
stored; its action is ``l^2 C_ijlm grad_eps_lmk``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GeometryError, ParameterError


@dataclass(frozen=True)
class MaterialParameters:
    """Scalar material constants, SI units.

    ``kappa`` is either a scalar (isotropic) or one value per axis.
    ``plane`` selects the 2D reduction of the isotropic elasticity tensor.
    """

    E: float
    nu: float
    l: float = 0.0
    kappa: float | Sequence[float] = 1.0
    eL: float = 0.0
    eT: float = 0.0
    eS: float = 0.0
    muL: float = 0.0
    muT: float = 0.0
    muS: float = 0.0
    piezo_axis: int = 0
    plane: str = "strain"
    electric: bool = True

    def uncoupled(self) -> "MaterialParameters":
        return self.with_(eL=0.0, eT=0.0, eS=0.0, muL=0.0, muT=0.0, muS=0.0)

    def without_flexo(self) -> "MaterialParameters":
        return self.with_(muL=0.0, muT=0.0, muS=0.0)

    def with_(self, **changes) -> "MaterialParameters":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return MaterialParameters(**values)


@dataclass(frozen=True)
class MaterialTensors:
    C: np.ndarray
    e: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    l2: float
    E: float
    params: MaterialParameters = field(repr=False)

    @property
    def n_sd(self) -> int:
        return self.C.shape[0]

    @property
    def l(self) -> float:
        return float(np.sqrt(self.l2))

    @property
    def coupled(self) -> bool:
        return bool(np.any(self.e) or np.any(self.mu))


@dataclass(frozen=True)
class PointKinematics:
    eps: np.ndarray
    grad_eps: np.ndarray
    Efield: np.ndarray


@dataclass(frozen=True)
class PointStresses:
    sigma_hat: np.ndarray
    sigma_tilde: np.ndarray
    D_hat: np.ndarray


def lame_constants(E, nu, n_sd=3, plane="strain"):
    """Return (lambda, G); plane stress uses the reduced lambda in 2D."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    G = E / (2.0 * (1.0 + nu))
    if n_sd == 2 and plane == "stress":
        lam = 2.0 * lam * G / (lam + 2.0 * G)
    return lam, G


def isotropic_elasticity(lam, G, n_sd):
    d = np.eye(n_sd)
    return (lam * np.einsum("ij,kl->ijkl", d, d)
            + G * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d)))


def piezo_tensor(eL, eT, eS, axis, n_sd):
    e = np.zeros((n_sd, n_sd, n_sd))
    a = axis
    e[a, a, a] = eL
    for i in range(n_sd):
        if i == a:
            continue
        e[a, i, i] = eT
        e[i, a, i] = eS
        e[i, i, a] = eS
    return e


def flexo_tensor(muL, muT, muS, n_sd):
    """Cubic flexoelectric tensor ``mu[l, i, j, k]`` (symmetric in i, j)."""
    mu = np.zeros((n_sd,) * 4)
    for l in range(n_sd):
        mu[l, l, l, l] = muL
        for i in range(n_sd):
            if i == l:
                continue
            mu[l, i, i, l] = muT
            mu[l, l, i, i] = muS
            mu[l, i, l, i] = muS
    return mu


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def build_material_tensors(params: MaterialParameters, n_sd: int) -> MaterialTensors:
    if n_sd not in (2, 3):
        raise ParameterError(f"n_sd must be 2 or 3, got {n_sd}")
    p = params
    if not p.E > 0:
        raise ParameterError(f"Young modulus must be positive, got {p.E}")
    if not -1.0 < p.nu < 0.5:
        raise ParameterError(f"Poisson ratio must lie in (-1, 0.5), got {p.nu}")
    if p.l < 0:
        raise ParameterError(f"length scale must be non-negative, got {p.l}")
    if p.plane not in ("strain", "stress"):
        raise ParameterError(f"plane must be 'strain' or 'stress', got {p.plane!r}")
    if not 0 <= p.piezo_axis < n_sd:
        raise ParameterError(f"piezo_axis {p.piezo_axis} out of range for n_sd={n_sd}")

    kappa = np.broadcast_to(np.asarray(p.kappa, dtype=float), (n_sd,)) if np.ndim(p.kappa) == 0 \
        else np.asarray(p.kappa, dtype=float)
    if kappa.shape != (n_sd,):
        raise ParameterError(f"kappa needs {n_sd} components, got {kappa.shape}")
    if p.electric and np.any(kappa <= 0):
        raise ParameterError("dielectric constants must be positive")

    lam, G = lame_constants(p.E, p.nu, n_sd, p.plane)
    return MaterialTensors(
        C=_freeze(isotropic_elasticity(lam, G, n_sd)),
        e=_freeze(piezo_tensor(p.eL, p.eT, p.eS, p.piezo_axis, n_sd)),
        mu=_freeze(flexo_tensor(p.muL, p.muT, p.muS, n_sd)),
        kappa=_freeze(np.diag(kappa)),
        l2=float(p.l) ** 2,
        E=float(p.E),
        params=p,
    )


def strain_gradient_stress(grad_eps, mat: MaterialTensors):
    """Mechanical double stress ``l^2 C_ijlm grad_eps_lmk``."""
    return mat.l2 * np.einsum("ijlm,...lmk->...ijk", mat.C, grad_eps)


def evaluate_constitutive(kin: PointKinematics, mat: MaterialTensors) -> PointStresses:
    """Local stress, double stress and electric displacement at material points.

    Leading axes of the kinematic arrays are treated as batch axes.
    """
    eps, geps, Ef = kin.eps, kin.grad_eps, kin.Efield
    sigma_hat = (np.einsum("ijkl,...kl->...ij", mat.C, eps)
                 - np.einsum("...l,lij->...ij", Ef, mat.e))
    sigma_tilde = (strain_gradient_stress(geps, mat)
                   - np.einsum("...l,lijk->...ijk", Ef, mat.mu))
    D_hat = (np.einsum("lm,...m->...l", mat.kappa, Ef)
             + np.einsum("lij,...ij->...l", mat.e, eps)
             + np.einsum("lijk,...ijk->...l", mat.mu, geps))
    return PointStresses(sigma_hat, sigma_tilde, D_hat)


def double_traction(sigma_tilde, n):
    """``r_i = sigma_tilde_ijk n_j n_k``; raises on a non-unit normal."""
    n = np.asarray(n, dtype=float)
    if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > 1e-12):
        raise GeometryError("normal vector is not of unit length")
    return np.einsum("...ijk,...j,...k->...i", sigma_tilde, n, n)

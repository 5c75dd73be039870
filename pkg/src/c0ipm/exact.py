"""Analytic fields for manufactured-solution studies.

Derivatives are obtained symbolically and evaluated with vectorized
closures; the source terms follow from the strong balance laws:

* ``b_i = -C_ijkl u_k,jl - e_lij phi,jl + l^2 C_ijlm u_l,jkkm + mu_lijk phi,jkl``
* ``q = -kappa_lm phi,lm + e_lij u_i,jl + mu_lijk u_i,jkl``
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np
import sympy

from .material import MaterialTensors, strain_gradient_stress

_NAMES = ("x", "y", "z")


def _compile(exprs, syms):
    """Closure mapping points (P, d) to values (P, len(exprs))."""
    fn = sympy.lambdify(syms, list(exprs), modules="numpy")

    def call(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = fn(*pts.T)
        return np.column_stack([np.broadcast_to(np.asarray(c, dtype=float), (len(pts),)) for c in cols])

    return call


class ExactField:
    """Displacement and potential given as sympy expressions in ``x, y[, z]``."""

    def __init__(self, u, phi, n_sd=None):
        n_sd = len(u) if n_sd is None else n_sd
        self.n_sd = n_sd
        self.syms = sympy.symbols(_NAMES[:n_sd])
        local = dict(zip(_NAMES, self.syms))
        self.u_expr = [sympy.sympify(c, locals=local) for c in u]
        self.phi_expr = sympy.sympify(phi, locals=local)
        if len(self.u_expr) != n_sd:
            raise ValueError("displacement needs one component per axis")

    def _derivs(self, expr, order):
        out = []
        for idx in product(range(self.n_sd), repeat=order):
            out.append(sympy.diff(expr, *[self.syms[i] for i in idx]) if idx else expr)
        return out

    @lru_cache(maxsize=None)
    def _u_fn(self, order):
        exprs = [e for comp in self.u_expr for e in self._derivs(comp, order)]
        return _compile(exprs, self.syms)

    @lru_cache(maxsize=None)
    def _phi_fn(self, order):
        return _compile(self._derivs(self.phi_expr, order), self.syms)

    def u(self, x):
        return self.u_derivative(x, 0)

    def phi(self, x):
        return self.phi_derivative(x, 0)

    def u_derivative(self, x, order):
        """Array (P, d, d, ..., d): component index then ``order`` derivative indices."""
        vals = self._u_fn(order)(x)
        return vals.reshape((len(vals),) + (self.n_sd,) * (order + 1))

    def phi_derivative(self, x, order):
        vals = self._phi_fn(order)(x)
        return vals.reshape((len(vals),) + (self.n_sd,) * order)

    def normal_derivative(self, x, n):
        """``du/dn`` at boundary points."""
        return np.einsum("pik,pk->pi", self.u_derivative(x, 1), n)


def sinusoid_2d():
    s = "2*pi*(x + y)"
    return ExactField([f"sin({s})", f"cos({s})"], f"sin({s}) + cos({s})")


def sinusoid_3d():
    s = "2*pi*(x + 2*y - z)"
    return ExactField([f"cos({s})", f"sin({s})", f"cos({s})"], f"sin({s})")


def polynomial_field(n_sd, degree, seed=0):
    """Random complete polynomial of the given degree for u and phi."""
    rng = np.random.default_rng(seed)
    syms = sympy.symbols(_NAMES[:n_sd])
    monos = [m for m in sympy.itermonomials(syms, degree)]
    monos.sort(key=sympy.default_sort_key)

    def draw():
        return sum(sympy.Float(round(float(c), 6)) * m for c, m in zip(rng.uniform(-1, 1, len(monos)), monos))

    return ExactField([draw() for _ in range(n_sd)], draw(), n_sd)


def manufactured_source(exact: ExactField, mat: MaterialTensors):
    """Body force and charge closures making ``exact`` solve the strong problem."""
    C, e, mu, kap, l2 = mat.C, mat.e, mat.mu, mat.kappa, mat.l2

    def body(x):
        d2u = exact.u_derivative(x, 2)
        d2p = exact.phi_derivative(x, 2)
        b = -np.einsum("ijkl,pkjl->pi", C, d2u) - np.einsum("lij,pjl->pi", e, d2p)
        if l2:
            d4u = exact.u_derivative(x, 4)
            b += l2 * np.einsum("ijlm,pljkkm->pi", C, d4u)
        if np.any(mu):
            b += np.einsum("lijk,pjkl->pi", mu, exact.phi_derivative(x, 3))
        return b

    def charge(x):
        q = -np.einsum("lm,plm->p", kap, exact.phi_derivative(x, 2))
        if np.any(e):
            q += np.einsum("lij,pijl->p", e, exact.u_derivative(x, 2))
        if np.any(mu):
            q += np.einsum("lijk,pijkl->p", mu, exact.u_derivative(x, 3))
        return q

    return body, charge


def exact_double_stress(exact: ExactField, mat: MaterialTensors, x):
    """``sigma_tilde_ijk = l^2 C_ijlm eps_lm,k + phi,l mu_lijk`` at points ``x``."""
    d3u = exact.u_derivative(x, 2)
    grad_eps = 0.5 * (d3u + np.swapaxes(d3u, 1, 2))
    st = strain_gradient_stress(grad_eps, mat)
    if np.any(mat.mu):
        st = st + np.einsum("pl,lijk->pijk", exact.phi_derivative(x, 1), mat.mu)
    return st


def exact_double_traction(exact: ExactField, mat: MaterialTensors):
    """Closure ``(x, n) -> r`` with ``r_i = sigma_tilde_ijk n_j n_k``."""

    def r(x, n):
        return np.einsum("pijk,pj,pk->pi", exact_double_stress(exact, mat, x), n, n)

    return r

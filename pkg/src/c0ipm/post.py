"""Errors, convergence rates, effective electromechanical constants and output."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .assembly import _chunks
from .errors import DegenerateError
from .exact import ExactField
from .material import MaterialTensors
from .solver import SolutionField, geometry_for_errors


@dataclass(frozen=True)
class ErrorNorms:
    absolute: float
    relative: float


def l2_error(sol: SolutionField, exact: ExactField, which="u", relative=False):
    """L2 norm of ``sol - exact`` (vector norm over components for ``u``)."""
    norms = l2_error_norms(sol, exact, which)
    return norms.relative if relative else norms.absolute


def l2_error_norms(sol: SolutionField, exact: ExactField | None, which="u") -> ErrorNorms:
    if which not in ("u", "phi"):
        raise ValueError("which must be 'u' or 'phi'")
    mesh = sol.mesh
    d = mesh.n_sd
    err2 = ref2 = 0.0
    for chunk in _chunks(mesh.n_elements, 200_000):
        geom = geometry_for_errors(mesh, chunk)
        u, _, _, ph, _ = sol.element_values(chunk, geom)
        x = geom.x.reshape(-1, d)
        m, Q = geom.weights.shape
        if which == "u":
            ex = np.zeros((m, Q, d)) if exact is None else exact.u(x).reshape(m, Q, d)
            diff = np.sum((u - ex) ** 2, axis=-1)
            ref = np.sum(ex ** 2, axis=-1)
        else:
            ex = np.zeros((m, Q)) if exact is None else exact.phi(x).reshape(m, Q)
            diff = (ph - ex) ** 2
            ref = ex ** 2
        err2 += float(np.sum(diff * geom.weights))
        ref2 += float(np.sum(ref * geom.weights))
    err = np.sqrt(err2)
    return ErrorNorms(err, err / np.sqrt(ref2) if ref2 > 0 else np.inf)


def convergence_rates(errors, h):
    """Slopes ``log(e_k / e_k+1) / log(h_k / h_k+1)`` between consecutive levels."""
    errors = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    if errors.shape != h.shape or len(errors) < 2:
        raise ValueError("need matching error and h sequences of length >= 2")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive")
    if np.any(np.diff(h) >= 0):
        raise ValueError("h must be strictly decreasing")
    return [float(r) for r in np.log(errors[:-1] / errors[1:]) / np.log(h[:-1] / h[1:])]


@dataclass(frozen=True)
class BeamReport:
    a_prime: float
    k_eff: float
    e_prime: float
    circuit: str


def energies(sol: SolutionField, mat: MaterialTensors):
    """``(int E.kappa.E, int eps:C:eps)`` over the mesh."""
    mesh = sol.mesh
    elec = mech = 0.0
    for chunk in _chunks(mesh.n_elements, 200_000):
        geom = geometry_for_errors(mesh, chunk, order_boost=0)
        _, du, _, _, dph = sol.element_values(chunk, geom)
        eps = 0.5 * (du + np.swapaxes(du, -1, -2))
        Ef = -dph
        elec += float(np.einsum("mql,lk,mqk,mq->", Ef, mat.kappa, Ef, geom.weights))
        mech += float(np.einsum("mqij,ijkl,mqkl,mq->", eps, mat.C, eps, geom.weights))
    return elec, mech


def k_effective(sol: SolutionField, mat: MaterialTensors):
    elec, mech = energies(sol, mat)
    if mech <= 0:
        raise DegenerateError("zero strain energy; effective coupling undefined")
    return float(np.sqrt(max(elec, 0.0) / mech))


def effective_piezo(sol: SolutionField, mat: MaterialTensors, companion: SolutionField,
                    companion_mat: MaterialTensors, thickness, circuit="open") -> BeamReport:
    """Effective coupling normalized by the companion solve without flexoelectricity.

    ``a' = -a e_T / mu_T`` takes ``e_T`` from the companion material when the
    beam itself has no piezoelectricity.
    """
    eT = mat.params.eT or companion_mat.params.eT
    muT = mat.params.muT
    a_prime = -thickness * eT / muT if muT else np.inf
    k = k_effective(sol, mat)
    k0 = k_effective(companion, companion_mat)
    if k0 == 0:
        raise DegenerateError("companion solve has no electromechanical coupling")
    return BeamReport(float(a_prime), k, k / k0, circuit)


def write_convergence_csv(path, rows):
    """Rows of (level, h, ndof, err_u, err_phi, rate_u, rate_phi); rates may be None."""
    header = ["level", "h", "ndof", "err_u", "err_phi", "rate_u", "rate_phi"]
    _write_csv(path, header, rows)


def write_beam_csv(path, reports):
    _write_csv(path, ["a_prime", "e_prime", "circuit"],
               [(r.a_prime, r.e_prime, r.circuit) for r in reports])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_field_dump(path, sol: SolutionField):
    """Rows ``x y [z] u1 u2 [u3] phi`` at every mesh node."""
    data = np.column_stack([sol.mesh.coords, sol.u, sol.phi])
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in data:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export(sol: SolutionField | None, report, path, format="csv"):
    """Write ``report`` as CSV or ``sol`` as a nodal field dump; returns the path.

    ``report`` is a list of ``LevelResult``-style convergence rows (tuples) or
    of ``BeamReport``.
    """
    if format == "field-dump":
        if sol is None:
            raise ValueError("field-dump needs a solution")
        write_field_dump(path, sol)
    elif format == "csv":
        rows = list(report)
        if rows and isinstance(rows[0], BeamReport):
            write_beam_csv(path, rows)
        else:
            write_convergence_csv(path, rows)
    else:
        raise ValueError(f"format must be 'csv' or 'field-dump', got {format!r}")
    return path

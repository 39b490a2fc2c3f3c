"""Virtual measurement operator: boundary datum -> (E, H) on a region.

Observations are weighted so that the plain l2 norm of an observation
vector equals the field energy int_O |E|^2 + |H|^2. Per tet, the six
local E DOFs u enter as ``L^T u`` where ``L L^T`` is the Cholesky
factorisation of the local identity-mass matrix, and H enters as
``sqrt(V) H``. Each tet therefore owns 9 consecutive observation rows.

With this weighting the Hermitian transpose of the assembled matrix is the
discrete adjoint in the L2(O) inner product, and the Gram matrix
``M^H M`` is the energy quadratic form in the boundary datum.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import EmptyRegionError, InvalidArgumentError
from .fem import assemble_rhs, local_dofs

ROWS_PER_TET = 9


def max_workers():
    """Worker cap from EMLOC_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("EMLOC_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class RegionFields:
    """Fields restricted to a tet set: local E DOFs (n, 6) and H (n, 3)."""

    tets: np.ndarray
    E: np.ndarray
    H: np.ndarray


class RegionObserver:
    """Energy-weighted observation of fields on a fixed tet set."""

    def __init__(self, system, tets):
        tets = np.asarray(tets, dtype=np.int64)
        if tets.size == 0:
            raise EmptyRegionError("observation region is empty")
        self.system = system
        self.tets = tets
        self.n_rows = ROWS_PER_TET * len(tets)
        td = system.tets
        self.vol = np.abs(td.vol[tets])
        self.chol = np.linalg.cholesky(td.unit_mass[tets])

    def _pack(self, e_part, h_part):
        out = np.empty((len(self.tets), ROWS_PER_TET), dtype=complex)
        out[:, :6] = e_part
        out[:, 6:] = np.sqrt(self.vol)[:, None] * h_part
        return out.ravel()

    def unpack(self, vec):
        v = np.asarray(vec).reshape(len(self.tets), ROWS_PER_TET)
        return v[:, :6], v[:, 6:]

    def observe(self, fields):
        """Observation vector of a FieldPair (uses its stored H)."""
        u = local_dofs(self.system.mesh, fields.E, self.tets)
        return self._pack(np.einsum("nba,nb->na", self.chol, u), fields.H[self.tets])

    def weigh(self, J, K):
        """Riesz representative w of (J, K) given per tet on the region.

        <observe(F), w> = int_O E . conj(J) + H . conj(K) for every field F.
        """
        J = _region_vec(J, len(self.tets), "J")
        K = _region_vec(K, len(self.tets), "K")
        td = self.system.tets
        i, j = np.array([0, 0, 0, 1, 1, 2]), np.array([1, 2, 3, 2, 3, 3])
        g = td.grads[self.tets]
        b = 0.25 * self.vol[:, None] * np.einsum("nai,ni->na", g[:, j] - g[:, i], J)
        w_e = np.linalg.solve(self.chol, b[..., None])[..., 0]
        return self._pack(w_e, K)

    @cached_property
    def operator(self):
        """Sparse map from a full source-free E vector to observations."""
        mesh, td, k = self.system.mesh, self.system.tets, self.system.k
        t = self.tets
        n = len(t)
        signs = mesh.tet_signs[t].astype(float)
        edges = mesh.tet_edges[t]
        base = ROWS_PER_TET * np.arange(n)
        # E rows: (L^T)[a, b] * s_b
        e_vals = np.transpose(self.chol, (0, 2, 1)) * signs[:, None, :]
        e_rows = np.broadcast_to((base[:, None] + np.arange(6))[:, :, None], (n, 6, 6))
        e_cols = np.broadcast_to(edges[:, None, :], (n, 6, 6))
        # H rows: sqrt(V) (-i/k) mu^-1 c_b s_b
        h = (-1j / k) * np.einsum("nij,nbj->nib", td.mu_inv[t], td.curls[t])
        h_vals = np.sqrt(self.vol)[:, None, None] * h * signs[:, None, :]
        h_rows = np.broadcast_to((base[:, None] + 6 + np.arange(3))[:, :, None], (n, 3, 6))
        h_cols = np.broadcast_to(edges[:, None, :], (n, 3, 6))
        vals = np.concatenate([e_vals.ravel(), h_vals.ravel()]).astype(complex)
        rows = np.concatenate([e_rows.ravel(), h_rows.ravel()])
        cols = np.concatenate([e_cols.ravel(), h_cols.ravel()])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, mesh.n_edges))


def _region_vec(v, n, name):
    if v is None:
        return np.zeros((n, 3), dtype=complex)
    a = np.asarray(v, dtype=complex)
    if a.shape == (3,):
        a = np.broadcast_to(a, (n, 3))
    if a.shape != (n, 3):
        raise InvalidArgumentError(f"{name} must have shape ({n}, 3) on the region, got {a.shape}")
    return a


def _extend(tets, v, n_tets):
    out = np.zeros((n_tets, 3), dtype=complex)
    out[tets] = v
    return out


def apply_L(problem, tets, f):
    """Fields of the source-free solve with datum ``f``, restricted to ``tets``."""
    tets = np.asarray(tets, dtype=np.int64)
    if tets.size == 0:
        raise EmptyRegionError("apply_L needs a nonempty region")
    fields = problem.solve(f)
    return RegionFields(tets, local_dofs(problem.mesh, fields.E, tets), fields.H[tets])


def adjoint_pde(problem, tets, J, K):
    """Adjoint via the adjoint Maxwell system with sources on ``tets``.

    Solves curl E~ + ik mu H~ = K chi, curl H~ - ik eps E~ = J chi with
    pinned tangential E~ on the whole boundary. Eliminating H~ gives the
    same operator S - k^2 M with load -ik J (instead of ik J) and K. The
    returned functional is the weak-form residual on the control edges
    scaled by i/k, i.e. the control-edge moments of the tangential H~.
    """
    tets = np.asarray(tets, dtype=np.int64)
    system = problem.system
    d = system.dofmap
    n = system.mesh.n_tets
    J = _extend(tets, _region_vec(J, len(tets), "J"), n)
    K = _extend(tets, _region_vec(K, len(tets), "K"), n)
    rhs = assemble_rhs(system, -J, K)
    z = problem.factorization.solve(rhs[d.free])
    return (1j / system.k) * (rhs[d.control] - system.B_cf @ z)


def apply_L_adjoint(problem, tets, J, K, route="pde", operator=None):
    """L_O^*(J, K) as a vector over the control DOFs.

    route="pde" solves the adjoint system; route="matrix" returns
    ``M^H w`` from an assembled MeasurementOperator.
    """
    if route == "pde":
        return adjoint_pde(problem, tets, J, K)
    if route == "matrix":
        op = operator if operator is not None else assemble_measurement_matrix(problem, tets)
        return op.adjoint(op.observer.weigh(J, K))
    raise InvalidArgumentError(f"unknown adjoint route {route!r}")


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """Dense matrix of L_O: control DOFs -> weighted observations on O."""

    problem: object
    tets: np.ndarray
    matrix: np.ndarray
    observer: RegionObserver

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, f):
        return self.matrix @ np.asarray(f)

    def adjoint(self, w):
        return self.matrix.conj().T @ np.asarray(w)

    def energy(self, f):
        return float(np.linalg.norm(self.apply(f)) ** 2)

    @cached_property
    def gram(self):
        G = self.matrix.conj().T @ self.matrix
        return 0.5 * (G + G.conj().T)

    def weigh(self, J, K):
        return self.observer.weigh(J, K)


def control_responses(problem):
    """Full E vectors (n_edges, n_control) of the unit control data.

    Column j is the source-free solution for f = e_j; the columns share
    one factorization and are solved in chunks, optionally on several
    threads (EMLOC_THREADS).
    """
    system = problem.system
    d = system.dofmap
    nc = d.n_control
    if nc == 0:
        raise InvalidArgumentError("no control DOFs: the boundary patch is empty")
    fac = problem.factorization
    rhs = -system.B_fc.toarray()
    workers = max_workers()
    chunks = np.array_split(np.arange(nc), max(1, min(workers, nc)))

    def run(cols):
        return cols, fac.solve(rhs[:, cols]) if len(cols) else None

    X = np.zeros((d.n_dofs, nc), dtype=complex)
    X[d.control, np.arange(nc)] = 1.0
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    for cols, sol in results:
        if sol is not None:
            X[np.ix_(d.free, cols)] = sol
    return X


def assemble_measurement_matrix(problem, tets, responses=None):
    """MeasurementOperator of region ``tets``; reuses ``responses`` if given."""
    observer = RegionObserver(problem.system, tets)
    X = control_responses(problem) if responses is None else responses
    matrix = np.asarray(observer.operator @ X)
    return MeasurementOperator(problem, observer.tets, matrix, observer)

"""Lowest-order Nedelec (Whitney) edge elements on tetrahedra.

The local basis function of the local edge (i, j) is

    w_ij = lam_i grad(lam_j) - lam_j grad(lam_i),

with constant curl ``2 grad(lam_i) x grad(lam_j)``. Global DOFs are edge
circulations oriented from the lower to the higher vertex index; the
``Mesh.tet_signs`` table converts between the two orientations.

The discrete field is E = sum_e E_e w_e, the sesquilinear form is

    B(E, F) = int (mu^-1 curl E) . curl conj(F) - k^2 int (eps E) . conj(F),

and since the basis is real, B assembles to ``S - k^2 M`` with real
symmetric S (curl-curl) and M (eps-mass).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .errors import InvalidArgumentError, EmptyRegionError
from .materials import eval_material_many
from .mesh import LOCAL_EDGES

_LE = np.array(LOCAL_EDGES)
_DEGENERATE_TOL = 1e-14


# ---------------------------------------------------------------------------
# element geometry and local matrices
# ---------------------------------------------------------------------------

def tet_geometry(x):
    """Volumes and barycentric gradients of tets with vertices ``x`` (..., 4, 3)."""
    x = np.asarray(x, dtype=float)
    A = np.stack([x[..., 1, :] - x[..., 0, :], x[..., 2, :] - x[..., 0, :], x[..., 3, :] - x[..., 0, :]], axis=-1)
    det = np.linalg.det(A)
    scale = np.max(np.abs(A), axis=(-2, -1)) ** 3
    if np.any(np.abs(det) <= _DEGENERATE_TOL * scale):
        raise InvalidArgumentError("degenerate tetrahedron")
    inv = np.linalg.inv(A)  # rows are grad(lam_1..3)
    g0 = -inv.sum(axis=-2, keepdims=True)
    grads = np.concatenate([g0, inv], axis=-2)
    return det / 6.0, grads


def local_curls(grads):
    """Constant curls of the 6 local Whitney functions, shape (..., 6, 3)."""
    return 2.0 * np.cross(grads[..., _LE[:, 0], :], grads[..., _LE[:, 1], :])


def whitney_values(grads, lam):
    """Local Whitney functions at barycentric points.

    grads: (n, 4, 3); lam: (n, q, 4). Returns (n, q, 6, 3).
    """
    i, j = _LE[:, 0], _LE[:, 1]
    return (lam[..., i, None] * grads[:, None, j, :]
            - lam[..., j, None] * grads[:, None, i, :])


def _mass_batch(vol, grads, eps):
    # int lam_p lam_q = V (1 + delta_pq) / 20
    lam_int = (np.ones((4, 4)) + np.eye(4)) / 20.0
    geg = np.einsum("npa,nab,nqb->npq", grads, eps, grads)
    i, j = _LE[:, 0], _LE[:, 1]
    L = lam_int
    m = (L[i][:, i] * geg[:, j][:, :, j]
         - L[i][:, j] * geg[:, j][:, :, i]
         - L[j][:, i] * geg[:, i][:, :, j]
         + L[j][:, j] * geg[:, i][:, :, i])
    return vol[:, None, None] * m


def _curl_batch(vol, grads, mu_inv):
    c = local_curls(grads)
    return vol[:, None, None] * np.einsum("nai,nij,nbj->nab", c, mu_inv, c)


def local_matrices(tet, eps, mu):
    """6x6 curl-curl and mass matrices of one tet in local edge orientation.

    ``tet`` holds the four vertex coordinates. A negatively oriented tet is
    accepted; only its absolute volume enters.
    """
    x = np.asarray(tet, dtype=float)[None]
    vol, grads = tet_geometry(x)
    vol = np.abs(vol)
    eps = np.asarray(eps, dtype=float)[None]
    mu_inv = np.linalg.inv(np.asarray(mu, dtype=float))[None]
    return _curl_batch(vol, grads, mu_inv)[0], _mass_batch(vol, grads, eps)[0]


# ---------------------------------------------------------------------------
# DOF bookkeeping
# ---------------------------------------------------------------------------

FREE, CONTROL, CONSTRAINED = 0, 1, 2


@dataclass(frozen=True, eq=False)
class DofMap:
    """Partition of edge DOFs into free, control and constrained sets.

    Free DOFs are interior edges, control DOFs the patch-interior boundary
    edges carrying the boundary datum, constrained DOFs the remaining
    boundary edges (pinned to zero).
    """

    n_dofs: int
    free: np.ndarray
    control: np.ndarray
    constrained: np.ndarray
    kind: np.ndarray
    position: np.ndarray

    @property
    def n_free(self):
        return len(self.free)

    @property
    def n_control(self):
        return len(self.control)


def build_dofmap(mesh, patch=None):
    """DofMap for a mesh and an optional BoundaryPatch (None: closed cavity)."""
    bnd = mesh.boundary_edges()
    control = np.array([], dtype=np.int64) if patch is None else np.asarray(patch.edges, dtype=np.int64)
    kind = np.full(mesh.n_edges, FREE, dtype=np.int8)
    kind[bnd] = CONSTRAINED
    if control.size and np.any(kind[control] != CONSTRAINED):
        raise InvalidArgumentError("control edges must lie on the boundary")
    kind[control] = CONTROL
    free = np.flatnonzero(kind == FREE)
    constrained = np.flatnonzero(kind == CONSTRAINED)
    control = np.flatnonzero(kind == CONTROL)
    position = np.empty(mesh.n_edges, dtype=np.int64)
    for idx in (free, control, constrained):
        position[idx] = np.arange(len(idx))
    for a in (free, control, constrained, kind, position):
        a.setflags(write=False)
    return DofMap(mesh.n_edges, free, control, constrained, kind, position)


def trace_lift(dofmap, f):
    """Full DOF vector carrying ``f`` on the control edges and zero elsewhere."""
    f = np.asarray(f)
    if f.shape != (dofmap.n_control,):
        raise InvalidArgumentError(f"boundary datum has shape {f.shape}, expected ({dofmap.n_control},)")
    out = np.zeros(dofmap.n_dofs, dtype=np.result_type(f.dtype, np.complex128))
    out[dofmap.control] = f
    return out


def restrict_control(dofmap, E):
    return np.asarray(E)[dofmap.control]


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TetData:
    """Per-tet geometry and sampled material, shared by assembly routines."""

    vol: np.ndarray
    grads: np.ndarray
    eps: np.ndarray
    mu: np.ndarray
    mu_inv: np.ndarray

    @cached_property
    def curls(self):
        return local_curls(self.grads)

    @cached_property
    def unit_mass(self):
        """Local mass matrices with the identity coefficient (energy norm)."""
        return _mass_batch(self.vol, self.grads, np.broadcast_to(np.eye(3), self.eps.shape))


def tet_data(mesh, materials, mu_materials=None):
    """Geometry plus eps/mu sampled at barycenters.

    ``materials`` is either a pair (eps_field, mu_field) or a single field
    used for eps with ``mu_materials`` for mu.
    """
    eps_field, mu_field = _split_materials(materials, mu_materials)
    vol, grads = tet_geometry(mesh.vertices[mesh.tets])
    bary = mesh.barycenters()
    eps = eval_material_many(eps_field, bary)
    mu = eval_material_many(mu_field, bary)
    return TetData(vol, grads, eps, mu, np.linalg.inv(mu))


def _split_materials(materials, mu_materials=None):
    if mu_materials is not None:
        return materials, mu_materials
    eps_field, mu_field = materials
    return eps_field, mu_field


def _scatter(mesh, local, shape=None):
    s = mesh.tet_signs.astype(float)
    vals = local * s[:, :, None] * s[:, None, :]
    rows = np.repeat(mesh.tet_edges, 6, axis=1).ravel()
    cols = np.tile(mesh.tet_edges, (1, 6)).ravel()
    n = mesh.n_edges
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Global curl-curl and mass matrices with DOF blocks for wavenumber k."""

    mesh: object
    materials: tuple
    k: float
    dofmap: DofMap
    S: sp.csr_matrix
    M: sp.csr_matrix
    tets: TetData

    @cached_property
    def B(self):
        return (self.S - self.k ** 2 * self.M).tocsr()

    def block(self, matrix, rows, cols):
        d = self.dofmap
        pick = {"f": d.free, "c": d.control}
        return matrix[pick[rows]][:, pick[cols]]

    @cached_property
    def B_ff(self):
        return self.block(self.B, "f", "f").tocsc()

    @cached_property
    def B_fc(self):
        return self.block(self.B, "f", "c").tocsr()

    @cached_property
    def B_cf(self):
        return self.block(self.B, "c", "f").tocsr()

    @cached_property
    def S_ff(self):
        return self.block(self.S, "f", "f").tocsc()

    @cached_property
    def M_ff(self):
        return self.block(self.M, "f", "f").tocsc()

    def with_k(self, k):
        """Same matrices at another wavenumber (no reassembly)."""
        return AssembledSystem(self.mesh, self.materials, float(k), self.dofmap, self.S, self.M, self.tets)


def assemble(mesh, materials, k, dofmap):
    """Assemble S and M over all edges.

    ``materials`` is the pair (eps, mu) of MaterialFields.
    """
    k = float(k)
    if not (np.isfinite(k) and k > 0):
        raise InvalidArgumentError(f"wavenumber must be positive, got {k}")
    td = tet_data(mesh, materials)
    vol = np.abs(td.vol)
    S = _scatter(mesh, _curl_batch(vol, td.grads, td.mu_inv))
    M = _scatter(mesh, _mass_batch(vol, td.grads, td.eps))
    return AssembledSystem(mesh, tuple(materials), k, dofmap, S, M, td)


def _per_tet(v, n, name):
    if v is None:
        return np.zeros((n, 3), dtype=complex)
    a = np.asarray(v, dtype=complex)
    if a.shape == (3,):
        a = np.broadcast_to(a, (n, 3))
    if a.shape != (n, 3):
        raise InvalidArgumentError(f"{name} must have shape ({n}, 3), got {a.shape}")
    return a


def local_source_loads(td, k, J, K, tets=None):
    """Local load vectors ik int J.w_a + int (mu^-1 K).curl w_a, shape (n, 6)."""
    idx = slice(None) if tets is None else tets
    vol = np.abs(td.vol[idx])
    grads = td.grads[idx]
    i, j = _LE[:, 0], _LE[:, 1]
    # int w_ij = V/4 (grad lam_j - grad lam_i)
    wint = 0.25 * vol[:, None, None] * (grads[:, j] - grads[:, i])
    load = 1j * k * np.einsum("nai,ni->na", wint, J)
    muK = np.einsum("nij,nj->ni", td.mu_inv[idx], K)
    load += vol[:, None] * np.einsum("nai,ni->na", td.curls[idx], muK)
    return load


def assemble_rhs(system, J=None, K=None):
    """Load vector over all edge DOFs for piecewise-constant sources J, K."""
    mesh = system.mesh
    J = _per_tet(J, mesh.n_tets, "J")
    K = _per_tet(K, mesh.n_tets, "K")
    load = local_source_loads(system.tets, system.k, J, K) * mesh.tet_signs
    out = np.zeros(mesh.n_edges, dtype=complex)
    np.add.at(out, mesh.tet_edges.ravel(), load.ravel())
    return out


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldPair:
    """Edge-DOF electric field and per-tet constant magnetic field."""

    E: np.ndarray
    H: np.ndarray


def local_dofs(mesh, E, tets=None):
    """Edge DOFs seen in each tet's local orientation, shape (n, 6)."""
    idx = slice(None) if tets is None else tets
    return np.asarray(E)[mesh.tet_edges[idx]] * mesh.tet_signs[idx]


def tet_curls(mesh, td, E, tets=None):
    idx = slice(None) if tets is None else tets
    return np.einsum("na,nai->ni", local_dofs(mesh, E, tets), td.curls[idx])


def recover_H(system, E, K=None):
    """Per-tet H = -(i/k) mu^-1 (curl E - K)."""
    mesh, td, k = system.mesh, system.tets, system.k
    K = _per_tet(K, mesh.n_tets, "K")
    c = tet_curls(mesh, td, E) - K
    return (-1j / k) * np.einsum("nij,nj->ni", td.mu_inv, c)


def region_energy(system, tets, fields):
    """int_O |E|^2 + |H|^2 over the tet set ``tets``."""
    tets = np.asarray(tets, dtype=np.int64)
    if tets.size == 0:
        raise EmptyRegionError("region_energy needs a nonempty tet set")
    u = local_dofs(system.mesh, fields.E, tets)
    m = system.tets.unit_mass[tets]
    e_part = np.einsum("na,nab,nb->", u.conj(), m, u).real
    vol = np.abs(system.tets.vol[tets])
    h_part = np.sum(vol * np.sum(np.abs(fields.H[tets]) ** 2, axis=1))
    return float(e_part + h_part)


def gradient_matrix(mesh):
    """Sparse (n_edges, n_vertices) map from nodal values to edge differences."""
    ne = mesh.n_edges
    rows = np.repeat(np.arange(ne), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], ne)
    return sp.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.n_vertices))


# ---------------------------------------------------------------------------
# quadrature, interpolation and error norms
# ---------------------------------------------------------------------------

def tet_quadrature(n):
    """Collapsed Gauss-Jacobi rule on the reference tet, exact to degree 2n-1.

    Returns points (q, 3) and weights (q,) summing to 1/6.
    """
    ta, wa = roots_jacobi(n, 2.0, 0.0)
    tb, wb = roots_jacobi(n, 1.0, 0.0)
    tc, wc = np.polynomial.legendre.leggauss(n)
    a, b, c = (ta + 1) / 2, (tb + 1) / 2, (tc + 1) / 2
    wa, wb, wc = wa / 8, wb / 4, wc / 2
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    x = A
    y = B * (1 - A)
    z = C * (1 - A) * (1 - B)
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()]), W.ravel()


def interpolate_edges(mesh, field, order=6):
    """Edge circulations int_e F . t ds of a vector field ``field(points)``."""
    s, w = np.polynomial.legendre.leggauss(order)
    s, w = (s + 1) / 2, w / 2
    a = mesh.vertices[mesh.edges[:, 0]]
    d = mesh.vertices[mesh.edges[:, 1]] - a
    pts = a[:, None, :] + s[None, :, None] * d[:, None, :]
    vals = np.asarray(field(pts.reshape(-1, 3))).reshape(len(a), order, 3)
    return np.einsum("q,nqi,ni->n", w, vals, d)


def _quad_points(mesh, tets, n):
    ref, w = tet_quadrature(n)
    lam = np.column_stack([1 - ref.sum(axis=1), ref])
    x = mesh.vertices[mesh.tets[tets]]
    pts = np.einsum("qa,nai->nqi", lam, x)
    return lam, w, pts


def evaluate_E(mesh, td, E, tets, lam):
    """Discrete E at barycentric points ``lam`` (q, 4) in each of ``tets``."""
    u = local_dofs(mesh, E, tets)
    lam_b = np.broadcast_to(lam, (len(tets),) + lam.shape)
    basis = whitney_values(td.grads[tets], lam_b)
    return np.einsum("na,nqai->nqi", u, basis)


def l2_error(system, E, exact, tets=None, order=4):
    """Absolute and relative L2 error of the discrete E against ``exact(points)``."""
    mesh, td = system.mesh, system.tets
    tets = np.arange(mesh.n_tets) if tets is None else np.asarray(tets)
    lam, w, pts = _quad_points(mesh, tets, order)
    Eh = evaluate_E(mesh, td, E, tets, lam)
    Ex = np.asarray(exact(pts.reshape(-1, 3))).reshape(Eh.shape)
    jac = 6.0 * np.abs(td.vol[tets])
    err = np.sum(jac[:, None] * w[None, :] * np.sum(np.abs(Eh - Ex) ** 2, axis=2))
    ref = np.sum(jac[:, None] * w[None, :] * np.sum(np.abs(Ex) ** 2, axis=2))
    return float(np.sqrt(err)), float(np.sqrt(err / ref))

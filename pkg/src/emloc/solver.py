"""Forward Maxwell solves, cavity resonances and non-resonance checks."""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import EigenSolverError, InvalidArgumentError, ResonanceError
from .fem import (
    FieldPair,
    assemble,
    assemble_rhs,
    build_dofmap,
    recover_H,
    trace_lift,
)
from .materials import check_ellipticity
from .mesh import tag_boundary_patch

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEFAULT_REL_MARGIN = 1e-3
DEFAULT_SIGMA_TOL = 1e-8
KERNEL_TOL = 1e-8
DENSE_EIG_LIMIT = 8000


def _extreme_eig(matvec, n, dense):
    """Largest-magnitude eigenvalue of a real symmetric operator."""
    if n == 0:
        return 0.0
    if n <= 20:
        w = np.linalg.eigvalsh(dense())
        return float(w[np.argmax(np.abs(w))])
    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    w = spla.eigsh(op, k=1, which="LM", return_eigenvectors=False, v0=np.ones(n), tol=1e-6)
    return float(w[0])


class Factorization:
    """Sparse LU of the free-DOF block of ``S - k^2 M``, reusable across solves.

    The block is real for real k and is factored once; complex right-hand
    sides are solved as two real solves.
    """

    def __init__(self, system):
        self.system = system
        self.n = system.dofmap.n_free
        if self.n == 0:
            self._lu = None
            return
        try:
            self._lu = spla.splu(system.B_ff.astype(float), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise ResonanceError(
                f"resonant or near-resonant k={system.k}: factorization failed ({exc})", estimate=0.0
            ) from exc

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if self.n == 0:
            return np.zeros_like(rhs, dtype=complex)
        re = self._lu.solve(np.ascontiguousarray(rhs.real, dtype=float))
        if np.iscomplexobj(rhs):
            return re + 1j * self._lu.solve(np.ascontiguousarray(rhs.imag, dtype=float))
        return re.astype(complex)

    @cached_property
    def norm_estimate(self):
        B = self.system.B_ff
        return abs(_extreme_eig(lambda x: B @ x, self.n, lambda: B.toarray()))

    @cached_property
    def sigma_min_estimate(self):
        """Smallest singular value of the free block relative to its norm."""
        if self.n == 0:
            return 1.0
        inv_max = _extreme_eig(lambda x: self._lu.solve(np.asarray(x, dtype=float)), self.n,
                               lambda: np.linalg.inv(self.system.B_ff.toarray()))
        if inv_max == 0 or not np.isfinite(inv_max):
            return 0.0
        return float(1.0 / abs(inv_max) / self.norm_estimate)


def solve(system, f=None, J=None, K=None, factorization=None):
    """Solve the discrete system for boundary datum f and sources J, K.

    E = E0 + lift(f), where the free part solves
    B_ff E0 = rhs_f(J, K) - B_fc f. H is recovered per tet.
    """
    d = system.dofmap
    fac = factorization if factorization is not None else Factorization(system)
    f = np.zeros(d.n_control, dtype=complex) if f is None else np.asarray(f, dtype=complex)
    E = trace_lift(d, f)
    rhs = assemble_rhs(system, J, K)
    b = rhs[d.free] - system.B_fc @ f
    e0 = fac.solve(b)
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        res = np.linalg.norm(system.B_ff @ e0 - b) / bnorm
        if not res <= RESIDUAL_TOL:
            raise ResonanceError(
                f"resonant or near-resonant k={system.k}: relative residual {res:.3e}",
                estimate=fac.sigma_min_estimate,
            )
    E[d.free] = e0
    return FieldPair(E=E, H=recover_H(system, E, K))


# ---------------------------------------------------------------------------
# resonances
# ---------------------------------------------------------------------------

_SPECTRA = weakref.WeakKeyDictionary()


def cavity_spectrum(system):
    """All generalized eigenvalues of S x = lambda M x on the free DOFs.

    Ascending; the leading ones belong to the discrete gradient kernel.
    Cached per assembled system (only S and M enter, so k is irrelevant).
    """
    if system in _SPECTRA:
        return _SPECTRA[system]
    n = system.dofmap.n_free
    if n > DENSE_EIG_LIMIT:
        raise EigenSolverError(f"{n} free DOFs exceeds the dense eigensolver limit {DENSE_EIG_LIMIT}")
    if n == 0:
        w = np.zeros(0)
    else:
        try:
            w = sla.eigh(system.S_ff.toarray(), system.M_ff.toarray(), eigvals_only=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise EigenSolverError(f"generalized eigensolver failed: {exc}") from exc
    w.setflags(write=False)
    _SPECTRA[system] = w
    return w


def _kernel_threshold(w, k_max):
    top = float(np.max(np.abs(w))) if w.size else 0.0
    return max(KERNEL_TOL * k_max ** 2, 1e-10 * top)


def split_spectrum(system, k_max):
    """(kernel eigenvalues, physical eigenvalues) of the cavity problem."""
    w = cavity_spectrum(system)
    thr = _kernel_threshold(w, k_max)
    return w[w <= thr], w[w > thr]


def find_resonances(mesh, materials, k_max):
    """Discrete cavity resonances (all boundary edges pinned) up to ``k_max``."""
    if not k_max > 0:
        raise InvalidArgumentError("k_max must be positive")
    system = assemble(mesh, materials, 1.0, build_dofmap(mesh))
    return resonances_of(system, k_max)


def resonances_of(system, k_max):
    _, phys = split_spectrum(system, k_max)
    ks = np.sqrt(phys)
    return np.sort(ks[ks <= k_max])


@dataclass(frozen=True)
class NonresonanceReport:
    k: float
    nearest_resonance: float
    margin: float
    relative_margin: float
    sigma_min: float
    passed: bool


def check_nonresonance(system, k=None, rel_margin=DEFAULT_REL_MARGIN, sigma_tol=DEFAULT_SIGMA_TOL):
    """Distance of k to the discrete resonances and conditioning of B_ff.

    Passes iff the relative margin |k - k_res| / k_res and the relative
    smallest-singular-value estimate both exceed their thresholds. Never
    raises for resonant k; the report says so instead.
    """
    k = system.k if k is None else float(k)
    sys_k = system if k == system.k else system.with_k(k)
    k_max = 2.0 * k + 1.0
    _, phys = split_spectrum(sys_k, k_max)
    if phys.size:
        ks = np.sqrt(phys)
        j = int(np.argmin(np.abs(ks - k)))
        nearest = float(ks[j])
        margin = abs(k - nearest)
        rel = margin / nearest
    else:
        nearest, margin, rel = float("inf"), float("inf"), float("inf")
    try:
        sigma = Factorization(sys_k).sigma_min_estimate
    except ResonanceError:
        sigma = 0.0
    passed = bool(rel > rel_margin and sigma > sigma_tol)
    return NonresonanceReport(k, nearest, margin, rel, sigma, passed)


# ---------------------------------------------------------------------------
# problem context
# ---------------------------------------------------------------------------

class MaxwellProblem:
    """Mesh, materials, wavenumber and boundary patch, with lazy assembly.

    Acts as the shared context of the measurement operators: one assembly
    and one factorization serve every solve.
    """

    def __init__(self, mesh, eps, mu, k, gamma=None, patch=None):
        for field in (eps, mu):
            check_ellipticity(field)
        self.mesh = mesh
        self.eps = eps
        self.mu = mu
        self.k = float(k)
        if patch is None and gamma is not None:
            patch = tag_boundary_patch(mesh, gamma)
        self.patch = patch
        self.dofmap = build_dofmap(mesh, patch)

    @cached_property
    def system(self):
        return assemble(self.mesh, (self.eps, self.mu), self.k, self.dofmap)

    @cached_property
    def factorization(self):
        fac = Factorization(self.system)
        if fac.sigma_min_estimate <= DEFAULT_SIGMA_TOL:
            raise ResonanceError(
                f"resonant or near-resonant k={self.k}: relative sigma_min {fac.sigma_min_estimate:.3e}",
                estimate=fac.sigma_min_estimate,
            )
        return fac

    @property
    def n_control(self):
        return self.dofmap.n_control

    def solve(self, f=None, J=None, K=None):
        return solve(self.system, f, J, K, self.factorization)

    def check_nonresonance(self, **kw):
        return check_nonresonance(self.system, **kw)

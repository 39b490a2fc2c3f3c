"""Localized boundary data: concentrate energy on M, suppress it on D.

The energy ratio ||L_M f||^2 / ||L_D f||^2 is maximised as a generalized
Rayleigh quotient of the two Gram matrices, and the maximiser is rescaled
into the sequence f_l = f / (l ||L_D f||) whose shielded energy is exactly
1/l^2 while the target energy is ratio/l^2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import EigenSolverError, InvalidArgumentError
from .fem import region_energy
from .measurement import assemble_measurement_matrix, control_responses
from .mesh import select_region

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
DEFAULT_DELTA_FACTOR = 1e-12
TIE_TOL = 1e-12
RANK_TOL = 1e-10
DEFAULT_RANGE_TOL = 1e-4


def _check_hermitian(G, name):
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise InvalidArgumentError(f"{name} must be square")
    scale = max(np.linalg.norm(G), 1e-300)
    if np.linalg.norm(G - G.conj().T) > HERMITIAN_TOL * scale:
        raise InvalidArgumentError(f"{name} is not Hermitian")
    return 0.5 * (G + G.conj().T)


def fix_phase(v):
    """Scale v so that its largest-magnitude entry is real and positive."""
    j = int(np.argmax(np.abs(v)))
    if v[j] == 0:
        return v
    out = v * (abs(v[j]) / v[j])
    out[j] = abs(v[j])
    return out


def default_delta(G_D):
    n = G_D.shape[0]
    return DEFAULT_DELTA_FACTOR * float(np.trace(G_D).real) / n


def max_ratio(G_M, G_D, delta=0.0, basis=None):
    """Top generalized eigenpair of G_M f = lam (G_D + delta I) f.

    Returns (lam, f) with f of unit norm. Ties in the top eigenvalue are
    broken by the smallest eigensolver index; the phase of f makes its
    largest entry real positive. With ``basis`` (orthonormal columns V)
    the maximisation runs over f = V y only.
    """
    G_M = _check_hermitian(G_M, "G_M")
    G_D = _check_hermitian(G_D, "G_D")
    if G_M.shape != G_D.shape:
        raise InvalidArgumentError("Gram matrices must have the same size")
    if delta < 0:
        raise InvalidArgumentError("delta must be nonnegative")
    if basis is not None:
        Q = np.asarray(basis)
        if Q.ndim != 2 or Q.shape[0] != G_M.shape[0]:
            raise InvalidArgumentError("basis rows must match the Gram size")
        G_M = Q.conj().T @ G_M @ Q
        G_D = Q.conj().T @ G_D @ Q
        G_M = 0.5 * (G_M + G_M.conj().T)
        G_D = 0.5 * (G_D + G_D.conj().T)
    B = G_D + delta * np.eye(G_D.shape[0])
    try:
        w, V = sla.eigh(G_M, B)
    except (sla.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"generalized eigensolver failed: {exc}") from exc
    top = w[-1]
    j = int(np.flatnonzero(w >= top - TIE_TOL * max(abs(top), 1.0))[0])
    f = V[:, j] if basis is None else Q @ V[:, j]
    f = fix_phase(f / np.linalg.norm(f))
    return float(w[j]), f


def resolved_range(M_D, range_tol=DEFAULT_RANGE_TOL):
    """Orthonormal basis of the data whose shielded response is resolvable.

    Right singular vectors of M_D with sigma > range_tol * sigma_max. The
    discarded directions produce shielded energies at or below roundoff,
    where neither the ratio nor the energy laws can be evaluated.
    """
    _, s, Vh = np.linalg.svd(np.asarray(M_D), full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise InvalidArgumentError("shielded operator is zero")
    r = int(np.sum(s > range_tol * s[0]))
    return Vh[:r].conj().T


def localized_sequence(f_tilde, M_D, L):
    """Rows f_l = f / (l ||M_D f||), l = 1..L.

    If M_D f = 0 the shielded energy is identically zero and the rows are
    l * f instead.
    """
    if L < 1:
        raise InvalidArgumentError("sequence length must be >= 1")
    f = np.asarray(f_tilde)
    ells = np.arange(1, L + 1)
    nd = np.linalg.norm(np.asarray(M_D) @ f)
    if nd == 0:
        return ells[:, None] * f[None, :]
    return f[None, :] / (ells[:, None] * nd)


@dataclass(frozen=True)
class RangeLemmaResult:
    """Outcome of the norm-bound test ||A1 x|| <= C ||A2 x||.

    bounded: whether such a C exists; constant: the smallest one when
    bounded; witness: x with ||A2 x|| ~ 0 and ||A1 x|| = 1 otherwise.
    """

    bounded: bool
    constant: float | None
    witness: np.ndarray | None


def verify_range_lemma(A1, A2):
    """Decide ran(A1^H) <= ran(A2^H), i.e. whether ||A1 x|| <= C ||A2 x|| for all x."""
    A1 = np.atleast_2d(np.asarray(A1))
    A2 = np.atleast_2d(np.asarray(A2))
    if A1.shape[1] != A2.shape[1]:
        raise InvalidArgumentError(f"column counts differ: {A1.shape[1]} vs {A2.shape[1]}")
    stacked = np.vstack([A2, A1])
    s_all = np.linalg.svd(stacked, compute_uv=False)
    smax = s_all[0] if s_all.size else 0.0
    thr = RANK_TOL * smax
    if smax == 0:
        return RangeLemmaResult(True, 0.0, None)
    _, s2, Vh2 = np.linalg.svd(A2)
    r2 = int(np.sum(s2 > thr))
    r_all = int(np.sum(s_all > thr))
    if r_all == r2:
        if r2 == 0:
            return RangeLemmaResult(True, 0.0, None)
        V = Vh2[:r2].conj().T
        C = np.linalg.norm(A1 @ V / s2[:r2], 2)
        return RangeLemmaResult(True, float(C), None)
    N = Vh2[r2:].conj().T  # null space of A2
    _, s, Vh = np.linalg.svd(A1 @ N)
    x = N @ Vh[0].conj()
    x = x / s[0]
    return RangeLemmaResult(False, None, x)


@dataclass(frozen=True, eq=False)
class LocalizationResult:
    """Localized boundary data and the energies they produce.

    eigenvalue is the regularised Rayleigh maximum; ratio is the measured
    ||M_M f||^2 / ||M_D f||^2 of the optimiser. energies_matrix and
    energies_solve are (L, 2) arrays of (energy on M, energy on D) for each
    f_l, from the assembled operators and from independent full solves.
    """

    ratio: float
    eigenvalue: float
    delta: float
    f_tilde: np.ndarray
    sequence: np.ndarray
    energies_matrix: np.ndarray
    energies_solve: np.ndarray
    tets_M: np.ndarray
    tets_D: np.ndarray

    @property
    def ells(self):
        return np.arange(1, len(self.sequence) + 1)


def sequence_energies(op_M, op_D, sequence):
    return np.array([[op_M.energy(f), op_D.energy(f)] for f in sequence])


def solved_energies(problem, tets_M, tets_D, sequence):
    out = []
    for f in sequence:
        fields = problem.solve(f)
        out.append([region_energy(problem.system, tets_M, fields),
                    region_energy(problem.system, tets_D, fields)])
    return np.array(out)


def run_localization(problem, M_region, D_region, L=10, delta=None, allow_overlap=False,
                     range_tol=DEFAULT_RANGE_TOL):
    """Assemble both operators, maximise the ratio and build the sequence.

    range_tol restricts the maximisation to resolved_range(M_D); pass
    None to search the full control space.
    """
    mesh = problem.mesh
    tets_M = select_region(mesh, M_region)
    tets_D = select_region(mesh, D_region)
    if not allow_overlap and np.intersect1d(tets_M, tets_D).size:
        raise InvalidArgumentError("M and D must be disjoint tet sets")
    X = control_responses(problem)
    op_M = assemble_measurement_matrix(problem, tets_M, X)
    op_D = assemble_measurement_matrix(problem, tets_D, X)
    G_M, G_D = op_M.gram, op_D.gram
    if delta is None:
        delta = default_delta(G_D)
    basis = None if range_tol is None else resolved_range(op_D.matrix, range_tol)
    lam, f = max_ratio(G_M, G_D, delta, basis)
    e_M, e_D = op_M.energy(f), op_D.energy(f)
    ratio = e_M / e_D if e_D > 0 else float("inf")
    seq = localized_sequence(f, op_D.matrix, L)
    result = LocalizationResult(
        ratio=float(ratio),
        eigenvalue=lam,
        delta=float(delta),
        f_tilde=f,
        sequence=seq,
        energies_matrix=sequence_energies(op_M, op_D, seq),
        energies_solve=solved_energies(problem, tets_M, tets_D, seq),
        tets_M=tets_M,
        tets_D=tets_D,
    )
    log.info("localization: ratio %.6g (eigenvalue %.6g, delta %.3g)", ratio, lam, delta)
    return result

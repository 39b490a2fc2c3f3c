"""Runge approximation of local solutions by boundary-driven fields.

A target (e, h) on a region O is matched in the energy norm by
Tikhonov-regularised least squares over the boundary data:

    f_alpha = argmin ||M_O f - t||^2 + alpha ||f||^2,

where t is the weighted observation vector of the target. Sweeping alpha
downwards gives the approximating sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidArgumentError
from .fem import interpolate_edges, local_dofs
from .localization import localized_sequence, sequence_energies, solved_energies
from .measurement import assemble_measurement_matrix, control_responses
from .mesh import select_region
from .oracles import PlaneWave, plane_wave_fields

IMPROVEMENT = 0.01


@dataclass(frozen=True, eq=False)
class RungeFit:
    alpha: float
    f: np.ndarray
    residual: float
    f_norm: float


def target_observation(op, e, h):
    """Observation vector of a per-tet constant target (e, h) on op's region.

    ||op.matrix @ f - t|| is then the L2(O) distance between the field of
    f and the target, exactly.
    """
    return op.weigh(e, h)


def field_target(op, E_fn, H_fn):
    """Observation of closed-form fields: edge interpolant of E, H at barycenters."""
    mesh = op.problem.mesh
    E = interpolate_edges(mesh, E_fn)
    u = local_dofs(mesh, E, op.tets)
    obs = op.observer
    e_part = np.einsum("nba,nb->na", obs.chol, u)
    h_vals = np.asarray(H_fn(mesh.barycenters()[op.tets]))
    return obs._pack(e_part, h_vals)


def runge_fit(op, target, alpha):
    """Tikhonov fit via the regularised normal equations (G + alpha I) f = M^H t."""
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    M = op.matrix if hasattr(op, "matrix") else np.asarray(op)
    G = op.gram if hasattr(op, "gram") else M.conj().T @ M
    t = np.asarray(target)
    rhs = M.conj().T @ t
    A = G + alpha * np.eye(G.shape[0])
    f = sla.cho_solve(sla.cho_factor(A, lower=True), rhs)
    tn = np.linalg.norm(t)
    residual = np.linalg.norm(M @ f - t) / tn if tn > 0 else 0.0
    return RungeFit(float(alpha), f, float(residual), float(np.linalg.norm(f)))


def select_alpha(fits):
    """Index of the smallest alpha still improving the residual by >= 1%."""
    chosen = 0
    for i in range(1, len(fits)):
        prev, cur = fits[i - 1].residual, fits[i].residual
        if prev > 0 and (prev - cur) / prev >= IMPROVEMENT:
            chosen = i
    return chosen


def runge_sweep(op, target, alphas):
    """Fits for a strictly decreasing list of alphas, plus the selected index."""
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise InvalidArgumentError("alpha list is empty")
    if any(a <= 0 for a in alphas) or any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise InvalidArgumentError("alphas must be positive and strictly decreasing")
    fits = [runge_fit(op, target, a) for a in alphas]
    return fits, select_alpha(fits)


def geometric_alphas(start=1e-2, stop=1e-10, per_decade=1):
    """Decreasing alphas from start down to (at least) stop, per_decade per factor 10."""
    if not 0 < stop < start:
        raise InvalidArgumentError("need 0 < stop < start")
    e0 = np.log10(start)
    n = int(np.floor(np.log10(start / stop) * per_decade + 1e-9)) + 1
    return [float(10.0 ** (e0 - i / per_decade)) for i in range(n)]


@dataclass(frozen=True, eq=False)
class RungeLocalization:
    """Runge-derived localized sequence (duck-compatible with LocalizationResult)."""

    ratio: float
    alpha: float
    fits: list
    selected: int
    f_tilde: np.ndarray
    sequence: np.ndarray
    energies_matrix: np.ndarray
    energies_solve: np.ndarray
    tets_M: np.ndarray
    tets_D: np.ndarray

    @property
    def ells(self):
        return np.arange(1, len(self.sequence) + 1)


def runge_implies_localization(problem, M_region, D_region, alphas=None, L=10,
                               wave=None, local_target=None):
    """Localization through Runge approximation of (wave on M, 0 on D).

    The target is a plane wave on M (valid for homogeneous material there)
    extended by zero on D; ``local_target`` may supply per-tet (e, h) on M
    instead. The fit of the selected alpha is rescaled as in the
    localization construction.
    """
    mesh = problem.mesh
    tets_M = select_region(mesh, M_region)
    tets_D = select_region(mesh, D_region)
    if np.intersect1d(tets_M, tets_D).size:
        raise InvalidArgumentError("M and D must be disjoint tet sets")
    tets_O = np.concatenate([tets_M, tets_D])
    X = control_responses(problem)
    op_O = assemble_measurement_matrix(problem, tets_O, X)
    op_M = assemble_measurement_matrix(problem, tets_M, X)
    op_D = assemble_measurement_matrix(problem, tets_D, X)

    if local_target is None:
        wave = wave or PlaneWave(problem.k, (0.0, 0.0, 1.0), (1.0, 0.0, 0.0))
        e_M, h_M = plane_wave_fields(wave, mesh.barycenters()[tets_M])
    else:
        e_M, h_M = local_target
    e = np.zeros((len(tets_O), 3), dtype=complex)
    h = np.zeros_like(e)
    e[: len(tets_M)] = e_M
    h[: len(tets_M)] = h_M
    t = target_observation(op_O, e, h)

    fits, sel = runge_sweep(op_O, t, alphas or geometric_alphas())
    f = fits[sel].f
    if not np.any(f):
        zeros = np.zeros((L, len(f)), dtype=complex)
        nil = np.zeros((L, 2))
        return RungeLocalization(0.0, fits[sel].alpha, fits, sel, f, zeros, nil, nil, tets_M, tets_D)
    e_M_f, e_D_f = op_M.energy(f), op_D.energy(f)
    seq = localized_sequence(f, op_D.matrix, L)
    return RungeLocalization(
        ratio=e_M_f / e_D_f if e_D_f > 0 else float("inf"),
        alpha=fits[sel].alpha,
        fits=fits,
        selected=sel,
        f_tilde=f,
        sequence=seq,
        energies_matrix=sequence_energies(op_M, op_D, seq),
        energies_solve=solved_energies(problem, tets_M, tets_D, seq),
        tets_M=tets_M,
        tets_D=tets_D,
    )

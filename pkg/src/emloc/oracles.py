"""Closed-form reference fields for solver verification.

Plane waves solve the homogeneous vacuum system exactly. Manufactured
solutions take any smooth E with a known curl and produce the current J
that makes it an exact solution (with K = 0) in a given medium.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fem import interpolate_edges, tet_data
from .materials import MaterialField
from .mesh import RegionSpec


@dataclass(frozen=True)
class PlaneWave:
    k: float
    direction: tuple
    polarization: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        p = np.asarray(self.polarization, dtype=complex)
        if not self.k > 0:
            raise InvalidArgumentError("plane wave needs k > 0")
        nd = np.linalg.norm(d)
        if nd == 0:
            raise InvalidArgumentError("plane wave direction is zero")
        d = d / nd
        if abs(np.dot(p, d)) > 1e-14 * max(np.linalg.norm(p), 1.0):
            raise InvalidArgumentError("polarization must be orthogonal to the direction")
        object.__setattr__(self, "direction", tuple(d))
        object.__setattr__(self, "polarization", tuple(p))

    @property
    def d(self):
        return np.asarray(self.direction)

    @property
    def p(self):
        return np.asarray(self.polarization)

    def E(self, x):
        return plane_wave_fields(self, x)[0]

    def H(self, x):
        return plane_wave_fields(self, x)[1]

    def curl_E(self, x):
        return 1j * self.k * self.H(x)


def plane_wave_fields(pw, x):
    """E = p exp(ik d.x) and H = (d x p) exp(ik d.x) at points ``x`` (..., 3)."""
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * pw.k * (x @ pw.d))[..., None]
    return pw.p * phase, np.cross(pw.d, pw.p) * phase


def manufactured_sources(mesh, materials, k, E_exact, curl_E_exact, h_fd=None):
    """Per-tet currents (J, K) for which ``E_exact`` is an exact solution.

    H_exact = -(i/k) mu^-1 curl E_exact with K = 0, and
    J = curl H_exact + ik eps E_exact at each barycenter. The curl of
    H_exact is taken by central differences with the tet's own mu, so a
    material jump between neighbouring tets never enters a stencil.
    """
    td = tet_data(mesh, materials)
    x = mesh.barycenters()
    h = 1e-5 * mesh.diameter if h_fd is None else float(h_fd)

    def H_tet(p):
        return (-1j / k) * np.einsum("nij,nj->ni", td.mu_inv, curl_E_exact(p))

    # dH[:, a, :] = d/dx_a of H
    dH = np.empty((len(x), 3, 3), dtype=complex)
    for a in range(3):
        step = np.zeros(3)
        step[a] = h
        dH[:, a, :] = (H_tet(x + step) - H_tet(x - step)) / (2 * h)
    curl_H = np.stack([
        dH[:, 1, 2] - dH[:, 2, 1],
        dH[:, 2, 0] - dH[:, 0, 2],
        dH[:, 0, 1] - dH[:, 1, 0],
    ], axis=1)
    J = curl_H + 1j * k * np.einsum("nij,nj->ni", td.eps, E_exact(x))
    K = np.zeros_like(J)
    return J, K


def boundary_datum(mesh, dofmap, E_exact):
    """Control-edge circulations of ``E_exact`` (its discrete tangential trace)."""
    return interpolate_edges(mesh, E_exact)[dofmap.control]


def smooth_field(x):
    """Test field E = (z sin y, cos(x + z), x y) for manufactured solutions."""
    x = np.asarray(x, dtype=float)
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([np.sin(Y) * Z, np.cos(X + Z), X * Y], axis=-1).astype(complex)


def smooth_field_curl(x):
    x = np.asarray(x, dtype=float)
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([X + np.sin(X + Z), np.sin(Y) - Y, -np.sin(X + Z) - np.cos(Y) * Z],
                    axis=-1).astype(complex)


def two_region_media(bounds=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), eps=(2.0, 1.0, 1.0), mu=(1.0, 3.0, 1.0)):
    """(eps, mu) with an anisotropic lower half y < mid and vacuum above.

    With the default mu only the yy entry differs across the interface
    y = mid, so H = -(i/k) mu^-1 curl E of a smooth E keeps a continuous
    tangential trace and the manufactured pair is an exact solution.
    """
    lo, hi = np.asarray(bounds[0], float), np.asarray(bounds[1], float)
    mid = hi.copy()
    mid[1] = 0.5 * (lo[1] + hi[1])
    half = RegionSpec(lo, mid)
    return (MaterialField(((half, np.diag(eps)),)), MaterialField(((half, np.diag(mu)),)))

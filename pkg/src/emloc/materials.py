"""Piecewise-constant anisotropic permittivity and permeability."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticityError, InvalidArgumentError
from .mesh import RegionSpec

_SYM_TOL = 1e-14


def _as_matrix(a):
    m = np.array(a, dtype=float)
    if m.ndim == 1 and m.shape == (3,):
        m = np.diag(m)
    if m.shape != (3, 3):
        raise InvalidArgumentError(f"material matrix must be 3x3 (or a diagonal of 3), got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("material matrix has non-finite entries")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Matrix-valued coefficient: box regions over a default matrix.

    Lookup is first-match over ``regions``; points outside every box get
    ``default``.
    """

    regions: tuple = ()
    default: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        regs = []
        for spec, mat in self.regions:
            if not isinstance(spec, RegionSpec):
                spec = RegionSpec(*spec)
            regs.append((spec, _as_matrix(mat)))
        object.__setattr__(self, "regions", tuple(regs))
        object.__setattr__(self, "default", _as_matrix(self.default))

    @classmethod
    def uniform(cls, matrix=None):
        return cls((), np.eye(3) if matrix is None else matrix)

    def scaled(self, factor):
        return MaterialField(
            tuple((s, factor * m) for s, m in self.regions), factor * self.default
        )

    def matrices(self):
        """All (label, matrix) pairs, default last."""
        out = [(f"region {i} {s.lower}..{s.upper}", m) for i, (s, m) in enumerate(self.regions)]
        out.append(("default", self.default))
        return out


def eval_material(field, point):
    p = np.asarray(point, dtype=float)
    for spec, mat in field.regions:
        if spec.contains(p):
            return mat
    return field.default


def eval_material_many(field, points):
    """Vectorised ``eval_material`` over an (n, 3) array, returns (n, 3, 3)."""
    pts = np.asarray(points, dtype=float)
    out = np.broadcast_to(field.default, (len(pts), 3, 3)).copy()
    done = np.zeros(len(pts), dtype=bool)
    for spec, mat in field.regions:
        hit = spec.contains(pts) & ~done
        out[hit] = mat
        done |= hit
    return out


def check_ellipticity(field):
    """Smallest and largest eigenvalue over every matrix of the field.

    Raises EllipticityError naming the first matrix that is not symmetric
    or not positive definite.
    """
    lows, highs = [], []
    for label, m in field.matrices():
        scale = np.linalg.norm(m)
        if np.linalg.norm(m - m.T) > _SYM_TOL * scale:
            raise EllipticityError(f"ellipticity violated: {label} is not symmetric", region=label)
        w = np.linalg.eigvalsh(m)
        if w[0] <= 0:
            raise EllipticityError(
                f"ellipticity violated: {label} has eigenvalue {w[0]:.6g} <= 0", region=label
            )
        lows.append(w[0])
        highs.append(w[-1])
    return float(min(lows)), float(max(highs))

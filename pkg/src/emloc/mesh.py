"""Structured tetrahedral meshes of axis-aligned boxes.

Each hexahedral cell is split into six tetrahedra sharing the main
diagonal from its lowest to its highest corner (Kuhn subdivision). The
split is conforming across neighbouring cells because every cell face is
cut along the diagonal through its lowest corner.

Edges are globally oriented from the lower to the higher vertex index.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import EmptyGammaError, EmptyRegionError, InvalidArgumentError

# Local edge numbering shared by every element routine.
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))

# Outward-normal tags of the six box faces.
FACE_TAGS = ("x-", "x+", "y-", "y+", "z-", "z+")

_REL_TOL = 1e-9


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned box used for volumetric regions and boundary patches.

    ``kind`` is ``"volume"`` for subregions of the domain (M, D, O) and
    ``"boundary"`` for a patch of the boundary (Gamma). A boundary patch may
    be flat in one axis.
    """

    lower: tuple
    upper: tuple
    kind: str = "volume"

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != 3 or len(hi) != 3:
            raise InvalidArgumentError("region corners must be 3D")
        if not all(np.isfinite(lo + hi)):
            raise InvalidArgumentError("region corners must be finite")
        if self.kind not in ("volume", "boundary"):
            raise InvalidArgumentError(f"unknown region kind {self.kind!r}")
        if any(h < l for l, h in zip(lo, hi)):
            raise InvalidArgumentError(f"region box is inverted: {lo} > {hi}")
        if self.kind == "volume" and any(h <= l for l, h in zip(lo, hi)):
            raise InvalidArgumentError("volumetric region box is degenerate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, points, tol=0.0):
        p = np.asarray(points, dtype=float)
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.all((p >= lo) & (p <= hi), axis=-1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable tetrahedral mesh of a box.

    Attributes:
        vertices: (nv, 3) coordinates.
        tets: (nt, 4) vertex indices, positively oriented.
        edges: (ne, 2) sorted vertex pairs (i < j), lexicographically ordered.
        tet_edges: (nt, 6) global edge index of each local edge.
        tet_signs: (nt, 6) +1 where the local edge direction agrees with the
            global one, -1 otherwise.
        faces: (nf, 3) sorted vertex triples of all faces.
        boundary_faces: (nb, 3) boundary triangles, ordered so the right-hand
            normal points outward.
        boundary_normals: (nb, 3) outward unit normals.
        boundary_tags: (nb,) index into ``FACE_TAGS``.
    """

    bounds: tuple
    divisions: tuple
    vertices: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray
    tet_signs: np.ndarray
    faces: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    boundary_tags: np.ndarray

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_tets(self):
        return len(self.tets)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def diameter(self):
        lo, hi = self.bounds
        return float(np.linalg.norm(np.subtract(hi, lo)))

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces - self.n_tets

    def signed_volumes(self):
        x = self.vertices[self.tets]
        a = x[:, 1] - x[:, 0]
        b = x[:, 2] - x[:, 0]
        c = x[:, 3] - x[:, 0]
        return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0

    def barycenters(self):
        return self.vertices[self.tets].mean(axis=1)

    def edge_index(self, pairs):
        """Global edge indices of vertex pairs given in either order."""
        p = np.sort(np.atleast_2d(np.asarray(pairs, dtype=np.int64)), axis=1)
        keys = p[:, 0] * self.n_vertices + p[:, 1]
        table = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
        idx = np.searchsorted(table, keys)
        if np.any(idx >= len(table)) or np.any(table[np.minimum(idx, len(table) - 1)] != keys):
            raise InvalidArgumentError("vertex pair is not a mesh edge")
        return idx

    def boundary_edges(self):
        """Sorted indices of edges lying on the boundary."""
        f = self.boundary_faces
        pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [0, 2]]])
        return np.unique(self.edge_index(pairs))

    def boundary_vertices(self):
        return np.unique(self.boundary_faces)

    def interior_vertices(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices()] = False
        return np.flatnonzero(mask)


def build_box_mesh(bounds, divisions):
    """Kuhn-subdivided tetrahedral mesh of ``bounds = (lower, upper)``."""
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.shape != (3,) or hi.shape != (3,):
        raise InvalidArgumentError("bounds must be a pair of 3D corners")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi <= lo):
        raise InvalidArgumentError(f"degenerate box {lo.tolist()} .. {hi.tolist()}")
    div = tuple(int(n) for n in divisions)
    if len(div) != 3 or any(n < 1 for n in div):
        raise InvalidArgumentError(f"divisions must be three positive integers, got {divisions!r}")
    nx, ny, nz = div

    axes = [np.linspace(lo[d], hi[d], div[d] + 1) for d in range(3)]
    gz, gy, gx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def vid(i, j, l):
        return i + (nx + 1) * (j + (ny + 1) * l)

    ci, cj, cl = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    # cells ordered x fastest, then y, then z
    ci, cj, cl = (a.transpose(2, 1, 0).ravel() for a in (ci, cj, cl))

    unit = np.eye(3, dtype=np.int64)
    tets = []
    for perm in permutations(range(3)):
        steps = [np.zeros(3, dtype=np.int64)]
        for axis in perm:
            steps.append(steps[-1] + unit[axis])
        corners = [vid(ci + s[0], cj + s[1], cl + s[2]) for s in steps]
        tets.append(np.stack(corners, axis=1))
    # (6, ncells, 4) -> cell-major ordering
    tets = np.stack(tets, axis=1).reshape(-1, 4)

    x = vertices[tets]
    vol = np.einsum("ij,ij->i", x[:, 1] - x[:, 0], np.cross(x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]))
    neg = vol < 0
    tets[neg] = tets[neg][:, [0, 1, 3, 2]]

    return _finish_mesh((tuple(lo), tuple(hi)), div, vertices, tets)


def _finish_mesh(bounds, divisions, vertices, tets):
    nv = len(vertices)
    local = np.array(LOCAL_EDGES)
    pairs = tets[:, local]  # (nt, 6, 2)
    sorted_pairs = np.sort(pairs, axis=2)
    keys = sorted_pairs[..., 0] * nv + sorted_pairs[..., 1]
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
    edges = np.column_stack([uniq // nv, uniq % nv])
    tet_edges = inverse.reshape(keys.shape)
    tet_signs = np.where(pairs[..., 0] < pairs[..., 1], 1, -1).astype(np.int8)

    lf = np.array(LOCAL_FACES)
    face_vs = tets[:, lf]  # (nt, 4, 3)
    fsorted = np.sort(face_vs, axis=2).reshape(-1, 3)
    faces, first, counts = np.unique(fsorted, axis=0, return_index=True, return_counts=True)
    on_boundary = counts == 1
    bidx = first[on_boundary]
    tet_of = bidx // 4
    opposite = tets[tet_of, bidx % 4]
    tri = face_vs.reshape(-1, 3)[bidx].copy()
    p = vertices[tri]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    inward = np.einsum("ij,ij->i", n, vertices[opposite] - p[:, 0]) > 0
    tri[inward] = tri[inward][:, [0, 2, 1]]
    n[inward] *= -1
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    axis = np.argmax(np.abs(n), axis=1)
    tags = 2 * axis + (n[np.arange(len(n)), axis] > 0)

    return Mesh(
        bounds=bounds,
        divisions=divisions,
        vertices=_frozen(vertices),
        tets=_frozen(tets.astype(np.int64)),
        edges=_frozen(edges.astype(np.int64)),
        tet_edges=_frozen(tet_edges.astype(np.int64)),
        tet_signs=_frozen(tet_signs),
        faces=_frozen(faces.astype(np.int64)),
        boundary_faces=_frozen(tri.astype(np.int64)),
        boundary_normals=_frozen(n),
        boundary_tags=_frozen(tags.astype(np.int64)),
    )


@dataclass(frozen=True, eq=False)
class BoundaryPatch:
    """Tagged boundary faces and the edges strictly inside the patch."""

    faces: np.ndarray
    edges: np.ndarray


def tag_boundary_patch(mesh, gamma):
    """Faces of ``mesh`` inside the patch box, and the patch-interior edges.

    A boundary edge counts as patch-interior only when every boundary face
    containing it is tagged, which keeps edges on the rim of the patch
    pinned to zero.
    """
    if gamma.kind != "boundary":
        raise InvalidArgumentError("gamma must be a boundary RegionSpec")
    tol = _REL_TOL * mesh.diameter
    inside = gamma.contains(mesh.vertices, tol)
    tagged = np.all(inside[mesh.boundary_faces], axis=1)
    faces = np.flatnonzero(tagged)
    if faces.size == 0:
        raise EmptyGammaError(f"empty Gamma: no boundary face lies in {gamma.lower}..{gamma.upper}")

    f = mesh.boundary_faces
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [0, 2]]])
    eidx = mesh.edge_index(pairs)
    flags = np.tile(tagged, 3)
    all_tagged = np.ones(mesh.n_edges, dtype=bool)
    on_bnd = np.zeros(mesh.n_edges, dtype=bool)
    np.logical_and.at(all_tagged, eidx, flags)
    on_bnd[eidx] = True
    edges = np.flatnonzero(on_bnd & all_tagged)
    return BoundaryPatch(faces=_frozen(faces), edges=_frozen(edges))


def select_region(mesh, region):
    """Indices of tets whose barycenter lies in the (closed) region box."""
    if region.kind != "volume":
        raise InvalidArgumentError("select_region needs a volumetric RegionSpec")
    tol = _REL_TOL * mesh.diameter
    sel = np.flatnonzero(region.contains(mesh.barycenters(), tol))
    if sel.size == 0:
        raise EmptyRegionError(f"empty region: no tet barycenter in {region.lower}..{region.upper}")
    return _frozen(sel)


def whole_boundary(mesh):
    """RegionSpec covering all of the mesh boundary."""
    lo, hi = mesh.bounds
    return RegionSpec(lo, hi, kind="boundary")

"""Legacy ASCII VTK (v2.0) export of meshes and cell-wise fields."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import OutputError
from .fem import local_dofs, tet_geometry, whitney_values

VTK_TETRA = 10


def _fmt(x):
    return format(float(x), ".17g")


def barycentric_E(mesh, E):
    """Discrete E at every tet barycenter, shape (nt, 3)."""
    _, grads = tet_geometry(mesh.vertices[mesh.tets])
    lam = np.full((mesh.n_tets, 1, 4), 0.25)
    basis = whitney_values(grads, lam)[:, 0]
    return np.einsum("na,nai->ni", local_dofs(mesh, E), basis)


def vtk_text(mesh, fields=None, title="emloc"):
    lines = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [" ".join(_fmt(v) for v in p) for p in mesh.vertices]
    nt = mesh.n_tets
    lines.append(f"CELLS {nt} {5 * nt}")
    lines += ["4 " + " ".join(str(int(v)) for v in t) for t in mesh.tets]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TETRA)] * nt
    if fields is not None:
        E = barycentric_E(mesh, fields.E)
        H = np.asarray(fields.H)
        lines.append(f"CELL_DATA {nt}")
        for name, arr in (("E_re", E.real), ("E_im", E.imag), ("H_re", H.real), ("H_im", H.imag)):
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(v) for v in row) for row in arr]
    return "\n".join(lines) + "\n"


def export_vtk(mesh, fields, path, title="emloc"):
    """Write the mesh (and E, H cell vectors when ``fields`` is given) to ``path``."""
    path = Path(path)
    text = vtk_text(mesh, fields, title)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write VTK file {path}: {exc}") from exc
    return path

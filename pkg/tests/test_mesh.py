import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emloc.errors import EmptyGammaError, EmptyRegionError, InvalidArgumentError
from emloc.mesh import RegionSpec, build_box_mesh, select_region, tag_boundary_patch, whole_boundary

from conftest import UNIT, unit_mesh

divs = st.tuples(*(st.integers(1, 3),) * 3)


def brute_edges(tets):
    return {tuple(sorted(p)) for t in tets for p in itertools.combinations(t, 2)}


def brute_faces(tets):
    count = {}
    for t in tets:
        for f in itertools.combinations(sorted(t), 3):
            count[f] = count.get(f, 0) + 1
    return count


def test_single_cell_counts_against_enumeration():
    m = unit_mesh(1)
    assert (m.n_vertices, m.n_edges, m.n_tets) == (8, 19, 6)
    assert len(brute_edges(m.tets.tolist())) == 19


def test_two_cells_per_axis():
    m = unit_mesh(2)
    assert (m.n_vertices, m.n_tets) == (27, 48)


@given(divs)
def test_counts_match_brute_force(d):
    m = build_box_mesh(UNIT, d)
    assert m.n_tets == 6 * np.prod(d)
    assert m.n_vertices == np.prod(np.add(d, 1))
    assert {tuple(e) for e in m.edges.tolist()} == brute_edges(m.tets.tolist())


@given(divs)
def test_euler_characteristic_is_one(d):
    assert build_box_mesh(UNIT, d).euler_characteristic() == 1


@given(divs)
def test_face_sharing(d):
    m = build_box_mesh(UNIT, d)
    count = brute_faces(m.tets.tolist())
    assert set(count.values()) <= {1, 2}
    boundary = {f for f, c in count.items() if c == 1}
    assert boundary == {tuple(sorted(f)) for f in m.boundary_faces.tolist()}


@given(divs, st.tuples(*(st.floats(0.5, 3.0),) * 3))
def test_volumes_positive_and_equal(d, size):
    bounds = ((0.0, -1.0, 2.0), (size[0], size[1] - 1.0, size[2] + 2.0))
    m = build_box_mesh(bounds, d)
    vol = m.signed_volumes()
    cell = np.prod(size) / np.prod(d)
    assert np.all(vol > 0)
    np.testing.assert_allclose(vol, cell / 6, rtol=1e-12)
    assert abs(vol.sum() - np.prod(size)) <= 1e-12 * np.prod(size)


def test_global_orientation_and_signs():
    m = unit_mesh(2)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    local = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    for t, (tet, ed, sg) in enumerate(zip(m.tets, m.tet_edges, m.tet_signs)):
        a, b = tet[local[:, 0]], tet[local[:, 1]]
        np.testing.assert_array_equal(np.sort(np.column_stack([a, b]), axis=1), m.edges[ed])
        np.testing.assert_array_equal(sg, np.where(a < b, 1, -1))


def test_boundary_normals_point_outward():
    m = unit_mesh(2)
    centre = np.full(3, 0.5)
    p = m.vertices[m.boundary_faces].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", m.boundary_normals, p - centre) > 0)
    f = m.vertices[m.boundary_faces]
    right_hand = np.cross(f[:, 1] - f[:, 0], f[:, 2] - f[:, 0])
    assert np.all(np.einsum("ij,ij->i", right_hand, m.boundary_normals) > 0)


def test_refinement_multiplies_tets_by_eight():
    for n in (1, 2, 3):
        assert unit_mesh(2 * n).n_tets == 8 * unit_mesh(n).n_tets


def test_deterministic():
    a, b = unit_mesh(3), unit_mesh(3)
    for name in ("vertices", "tets", "edges", "tet_edges", "tet_signs", "boundary_faces"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1)])
def test_rejects_bad_divisions(bad):
    with pytest.raises(InvalidArgumentError):
        build_box_mesh(UNIT, bad)


def test_rejects_degenerate_box():
    with pytest.raises(InvalidArgumentError):
        build_box_mesh(((0, 0, 0), (1, 0, 1)), (1, 1, 1))


def test_face_patch_z0():
    m = unit_mesh(2)
    patch = tag_boundary_patch(m, RegionSpec((0, 0, 0), (1, 1, 0), kind="boundary"))
    assert len(patch.faces) == 8
    # interior edges of the 2x2 face grid, with diagonals: 16 face edges minus 8 on the rim
    assert len(patch.edges) == 8
    assert np.all(m.vertices[m.edges[patch.edges]][..., 2] == 0)


def test_patch_missing_boundary_is_empty():
    m = unit_mesh(2)
    with pytest.raises(EmptyGammaError):
        tag_boundary_patch(m, RegionSpec((0.4, 0.4, 0.4), (0.6, 0.6, 0.6), kind="boundary"))


def test_whole_boundary_controls_every_boundary_edge():
    m = unit_mesh(2)
    patch = tag_boundary_patch(m, whole_boundary(m))
    np.testing.assert_array_equal(patch.edges, m.boundary_edges())
    assert len(patch.faces) == len(m.boundary_faces)


def test_select_region_examples():
    m = unit_mesh(2)
    assert len(select_region(m, RegionSpec(*UNIT))) == m.n_tets
    assert len(select_region(m, RegionSpec((0, 0, 0), (0.5, 0.5, 0.5)))) == 6
    with pytest.raises(EmptyRegionError):
        select_region(m, RegionSpec((2, 2, 2), (3, 3, 3)))


def test_region_kinds_are_checked():
    with pytest.raises(InvalidArgumentError):
        RegionSpec((0, 0, 0), (1, 1, 0))
    m = unit_mesh(1)
    with pytest.raises(InvalidArgumentError):
        select_region(m, RegionSpec((0, 0, 0), (1, 1, 0), kind="boundary"))

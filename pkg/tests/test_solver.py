import numpy as np
import pytest

from emloc.errors import ResonanceError
from emloc.fem import assemble, assemble_rhs, build_dofmap, region_energy
from emloc.materials import MaterialField
from emloc.mesh import whole_boundary
from emloc.oracles import boundary_datum, manufactured_sources, smooth_field, smooth_field_curl, two_region_media
from emloc.solver import (
    RESIDUAL_TOL,
    MaxwellProblem,
    check_nonresonance,
    find_resonances,
    split_spectrum,
)
from emloc.fem import l2_error

from conftest import FACE_Z0, unit_mesh, vacuum


def test_zero_data_gives_zero_fields(face_problem3):
    F = face_problem3.solve()
    assert not np.any(F.E) and not np.any(F.H)


def test_linearity(face_problem3, rng):
    p = face_problem3
    nt = p.mesh.n_tets
    f = rng.standard_normal(p.n_control) + 1j * rng.standard_normal(p.n_control)
    J = rng.standard_normal((nt, 3)) + 1j * rng.standard_normal((nt, 3))
    K = rng.standard_normal((nt, 3))
    a = p.solve(f, J, K)
    b = p.solve(2 * f, 2 * J, 2 * K)
    assert np.linalg.norm(b.E - 2 * a.E) <= 1e-12 * np.linalg.norm(b.E)
    assert np.linalg.norm(b.H - 2 * a.H) <= 1e-12 * np.linalg.norm(b.H)


def test_residual_within_tolerance(face_problem3, rng):
    p = face_problem3
    f = rng.standard_normal(p.n_control) + 0j
    F = p.solve(f)
    s, d = p.system, p.dofmap
    rhs = -(s.B_fc @ f)
    assert np.linalg.norm(s.B_ff @ F.E[d.free] - rhs) <= RESIDUAL_TOL * np.linalg.norm(rhs)
    np.testing.assert_array_equal(F.E[d.control], f)
    assert not np.any(F.E[d.constrained])


def test_manufactured_convergence_two_region():
    eps, mu = two_region_media()
    errs = []
    for n in (2, 4):
        m = unit_mesh(n)
        p = MaxwellProblem(m, eps, mu, 1.0, gamma=whole_boundary(m))
        J, K = manufactured_sources(m, (eps, mu), 1.0, smooth_field, smooth_field_curl)
        F = p.solve(boundary_datum(m, p.dofmap, smooth_field), J, K)
        errs.append(l2_error(p.system, F.E, smooth_field)[1])
    assert errs[1] / errs[0] <= 0.6


def test_resonances_scale_with_permittivity():
    m = unit_mesh(3)
    base = find_resonances(m, vacuum(), 12.0)
    eps4 = MaterialField.uniform(4 * np.eye(3))
    scaled = find_resonances(m, (eps4, MaterialField.uniform()), 6.0)
    n = len(scaled)
    assert n >= 3
    np.testing.assert_allclose(scaled, base[:n] / 2, rtol=1e-10)


def test_kernel_count_is_interior_vertices():
    m = unit_mesh(4)
    s = assemble(m, vacuum(), 1.0, build_dofmap(m))
    kernel, phys = split_spectrum(s, 6.0)
    assert len(kernel) == len(m.interior_vertices())
    assert phys[0] > 1.0


def test_nonresonance_report():
    m = unit_mesh(3)
    s = assemble(m, vacuum(), 1.0, build_dofmap(m))
    ok = check_nonresonance(s, 1.0)
    assert ok.passed and ok.sigma_min > 1e-8
    k_res = find_resonances(m, vacuum(), 6.0)[0]
    bad = check_nonresonance(s, k_res)
    assert not bad.passed and bad.relative_margin < 1e-10
    margins = [check_nonresonance(s, k_res * (1 - t)).margin for t in (0.3, 0.1, 0.03, 0.01)]
    assert all(b < a for a, b in zip(margins, margins[1:]))


def test_resonant_k_raises_with_estimate():
    m = unit_mesh(3)
    k_res = find_resonances(m, vacuum(), 6.0)[0]
    p = MaxwellProblem(m, *vacuum(), k_res, gamma=FACE_Z0)
    with pytest.raises(ResonanceError) as exc:
        p.solve(np.ones(p.n_control))
    assert exc.value.estimate is not None and exc.value.estimate <= 1e-8


def test_reciprocity_of_boundary_response(face_problem3, rng):
    """Control-row residuals of two source-free solves pair symmetrically."""
    p = face_problem3
    s, d = p.system, p.dofmap

    def response(f):
        E = p.solve(f).E
        return s.B[d.control] @ E

    f = rng.standard_normal(p.n_control)
    g = rng.standard_normal(p.n_control)
    a, b = f @ response(g), g @ response(f)
    assert abs(a - b) <= 1e-10 * max(abs(a), abs(b))


def test_energy_nonnegative(face_problem3, rng):
    p = face_problem3
    F = p.solve(rng.standard_normal(p.n_control) + 0j)
    assert region_energy(p.system, np.arange(p.mesh.n_tets), F) > 0

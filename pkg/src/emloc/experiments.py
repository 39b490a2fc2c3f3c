"""Experiment drivers behind the command line: one per experiment kind.

Each driver writes a versioned CSV report (RFC 4180, CRLF line ends) and
optionally a VTK file into the output directory, and returns a Report
whose ``failures`` list the internal checks that did not hold.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import OutputError
from .fem import l2_error
from .localization import run_localization
from .materials import MaterialField, eval_material_many
from .measurement import assemble_measurement_matrix
from .mesh import build_box_mesh, select_region, whole_boundary
from .oracles import (
    PlaneWave,
    boundary_datum,
    manufactured_sources,
    plane_wave_fields,
    smooth_field,
    smooth_field_curl,
)
from .runge import geometric_alphas, runge_implies_localization, runge_sweep, target_observation
from .solver import MaxwellProblem, find_resonances
from .vtk import export_vtk

log = logging.getLogger(__name__)

CSV_VERSION = 1
CSV_HEADERS = {
    "verify": ("divisions", "h", "error", "ratio"),
    "resonances": ("index", "k"),
    "localize": ("ell", "energy_M", "energy_D", "ratio"),
    "runge": ("alpha", "residual", "f_norm"),
    "runge-localize": ("ell", "energy_M", "energy_D", "ratio"),
}

D_LAW_TOL = 1e-10
M_LAW_TOL = 1e-8
ROUTE_TOL = 1e-8
MONOTONE_SLACK = 1e-12


@dataclass
class Report:
    kind: str
    rows: list
    csv_path: Path | None = None
    vtk_path: Path | None = None
    failures: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.failures


def csv_name(kind):
    return f"{kind.replace('-', '_')}_v{CSV_VERSION}.csv"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
    except OSError as exc:
        raise OutputError(f"cannot write CSV file {path}: {exc}") from exc
    return Path(path)


def _mesh(cfg):
    return build_box_mesh(cfg.bounds(), cfg.divisions())


# ---------------------------------------------------------------------------

def convergence_study(case, divisions, k, materials=None, wave=None, bounds=None):
    """Rows (n, h, relative L2 error of E, ratio to previous) for a refinement list.

    case "plane_wave" drives the full boundary with the wave's trace;
    case "manufactured" adds the current making ``smooth_field`` exact in
    ``materials``.
    """
    bounds = bounds or ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    rows, last = [], None
    for n in divisions:
        mesh = build_box_mesh(bounds, (n, n, n))
        eps, mu = materials or (MaterialField.uniform(), MaterialField.uniform())
        problem = MaxwellProblem(mesh, eps, mu, k, gamma=whole_boundary(mesh))
        if case == "plane_wave":
            exact = wave.E
            J = K = None
        else:
            exact = smooth_field
            J, K = manufactured_sources(mesh, (eps, mu), k, smooth_field, smooth_field_curl)
        fields = problem.solve(boundary_datum(mesh, problem.dofmap, exact), J, K)
        err = l2_error(problem.system, fields.E, exact)[1]
        h = float(np.linalg.norm(np.subtract(bounds[1], bounds[0])) / n)
        rows.append((n, h, err, err / last if last else None))
        last = err
        final = (mesh, fields)
    return rows, final


def run_verify(cfg, out):
    v = cfg["verify"]
    eps, mu = cfg.materials()
    k = cfg["physics"]["k"]
    wave = None
    if v["case"] == "plane_wave":
        pol = np.asarray(v["polarization"]) + 1j * np.asarray(v["polarization_im"])
        wave = PlaneWave(k, tuple(v["direction"]), tuple(pol))
    rows, (mesh, fields) = convergence_study(v["case"], v["divisions"], k, (eps, mu), wave, cfg.bounds())
    rep = Report("verify", rows)
    for n, _, err, ratio in rows[1:]:
        if not ratio <= v["max_ratio"]:
            rep.failures.append(f"error ratio {ratio:.4g} at divisions {n} exceeds {v['max_ratio']}")
    rep.summary = {"final_error": rows[-1][2]}
    if cfg["output"]["vtk"]:
        rep.vtk_path = export_vtk(mesh, fields, out / "verify.vtk")
    return rep


def run_resonances(cfg, out):
    mesh = _mesh(cfg)
    ks = find_resonances(mesh, cfg.materials(), cfg["resonances"]["k_max"])
    ks = ks[: cfg["resonances"]["count"]]
    rep = Report("resonances", [(i + 1, float(kk)) for i, kk in enumerate(ks)])
    if ks.size == 0:
        log.warning("no resonances below k_max = %g", cfg["resonances"]["k_max"])
    rep.summary = {"first": float(ks[0]) if ks.size else None}
    if cfg["output"]["vtk"]:
        rep.vtk_path = export_vtk(mesh, None, out / "resonances_mesh.vtk")
    return rep


def _problem(cfg):
    mesh = _mesh(cfg)
    eps, mu = cfg.materials()
    return MaxwellProblem(mesh, eps, mu, cfg["physics"]["k"], gamma=cfg.gamma())


def _check_nonresonance(problem, rep):
    nr = problem.check_nonresonance()
    rep.summary["nearest_resonance"] = nr.nearest_resonance
    if not nr.passed:
        rep.failures.append(
            f"k = {nr.k} is too close to resonance (relative margin {nr.relative_margin:.3g}, "
            f"sigma_min {nr.sigma_min:.3g})"
        )
    return nr.passed


def _energy_rows(result):
    ells = result.ells
    em = result.energies_matrix
    return [(int(l), float(m), float(d), float(m / d) if d > 0 else float("inf"))
            for l, (m, d) in zip(ells, em)]


def _check_laws(result, rep, ratio):
    ells = result.ells.astype(float)
    em, es = result.energies_matrix, result.energies_solve
    d_err = float(np.max(np.abs(em[:, 1] * ells ** 2 - 1.0)))
    if not d_err <= D_LAW_TOL:
        rep.failures.append(f"shielded energy law off by {d_err:.3g} (tolerance {D_LAW_TOL})")
    m_err = float(np.max(np.abs(em[:, 0] * ells ** 2 / ratio - 1.0)))
    if not m_err <= M_LAW_TOL:
        rep.failures.append(f"target energy law off by {m_err:.3g} (tolerance {M_LAW_TOL})")
    route = float(np.max(np.abs(es - em) / np.abs(em)))
    rep.summary["route_mismatch"] = route
    if not route <= ROUTE_TOL:
        rep.failures.append(f"full-solve energies differ from matrix energies by {route:.3g}")


def run_localize(cfg, out):
    problem = _problem(cfg)
    rep = Report("localize", [])
    if not _check_nonresonance(problem, rep):
        return rep
    loc = cfg["localize"]
    res = run_localization(problem, cfg.region("M"), cfg.region("D"), L=loc["L"],
                           delta=loc["delta"], range_tol=loc["range_tol"])
    rep.rows = _energy_rows(res)
    rep.summary.update(ratio=res.ratio, eigenvalue=res.eigenvalue, delta=res.delta)
    _check_laws(res, rep, res.ratio)
    if cfg["output"]["vtk"]:
        rep.vtk_path = export_vtk(problem.mesh, problem.solve(res.sequence[0]), out / "localize.vtk")
    return rep


def _alphas(cfg):
    r = cfg["runge"]
    return geometric_alphas(r["alpha_start"], r["alpha_stop"], r["per_decade"])


def run_runge(cfg, out):
    problem = _problem(cfg)
    rep = Report("runge", [])
    if not _check_nonresonance(problem, rep):
        return rep
    r = cfg["runge"]
    mesh = problem.mesh
    tets = select_region(mesh, cfg.region("O"))
    x = mesh.barycenters()[tets]
    for fld in (problem.eps, problem.mu):
        if not np.allclose(eval_material_many(fld, x), np.eye(3)):
            log.warning("plane-wave target on a non-vacuum region is not a local solution")
            break
    wave = PlaneWave(problem.k, tuple(r["direction"]), tuple(r["polarization"]))
    op = assemble_measurement_matrix(problem, tets)
    t = target_observation(op, *plane_wave_fields(wave, x))
    fits, sel = runge_sweep(op, t, _alphas(cfg))
    rep.rows = [(f.alpha, f.residual, f.f_norm) for f in fits]
    rep.summary.update(selected_alpha=fits[sel].alpha, final_residual=fits[-1].residual)
    for a, b in zip(fits, fits[1:]):
        if b.residual > a.residual + MONOTONE_SLACK:
            rep.failures.append(f"residual increased from alpha {a.alpha:.3g} to {b.alpha:.3g}")
        if b.f_norm < a.f_norm * (1 - MONOTONE_SLACK):
            rep.failures.append(f"|f| decreased from alpha {a.alpha:.3g} to {b.alpha:.3g}")
    if cfg["output"]["vtk"]:
        rep.vtk_path = export_vtk(mesh, problem.solve(fits[sel].f), out / "runge.vtk")
    return rep


def run_runge_localize(cfg, out):
    problem = _problem(cfg)
    rep = Report("runge-localize", [])
    if not _check_nonresonance(problem, rep):
        return rep
    r = cfg["runge"]
    wave = PlaneWave(problem.k, tuple(r["direction"]), tuple(r["polarization"]))
    res = runge_implies_localization(problem, cfg.region("M"), cfg.region("D"), _alphas(cfg),
                                     L=cfg["localize"]["L"], wave=wave)
    rep.rows = _energy_rows(res)
    rep.summary.update(ratio=res.ratio, selected_alpha=res.alpha)
    _check_laws(res, rep, res.ratio)
    if cfg["output"]["vtk"]:
        rep.vtk_path = export_vtk(problem.mesh, problem.solve(res.sequence[0]), out / "runge_localize.vtk")
    return rep


DRIVERS = {
    "verify": run_verify,
    "resonances": run_resonances,
    "localize": run_localize,
    "runge": run_runge,
    "runge-localize": run_runge_localize,
}


def run_experiment(cfg, out_dir=None):
    """Run the configured experiment and write its reports; returns the Report."""
    out = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out}: {exc}") from exc
    rep = DRIVERS[cfg.kind](cfg, out)
    rep.csv_path = write_csv(out / csv_name(cfg.kind), CSV_HEADERS[cfg.kind], rep.rows)
    return rep

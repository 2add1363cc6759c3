"""Acceptance suite: eight go/no-go checks for the assembled solver.

Run with `pytest -v tests/test_acceptance.py -s` to see one line per
criterion.  Each test prints `criterion N ...: PASS` on success; a pytest
FAILED line is the corresponding fail marker.  The shipped configs in
configs/ pin the inclusion geometry (centered circles, radius 0.25 for Q1
and 0.30 for Q2); the error tables depend on that choice.
"""

import time
from pathlib import Path

import numpy as np

from twoscale_heat.cells import compatibility_residuals, solve_cell
from twoscale_heat.config import parse_config
from twoscale_heat.fem import (
    apply_dirichlet,
    assemble_load,
    assemble_stiffness,
    isotropic_conductivity,
    recover_gradient,
    solve_spd,
    ScalarField,
)
from twoscale_heat.mesh import Inclusion, UnitCellSpec, generate_unit_cell_mesh


def config_path(name):
    return Path(__file__).resolve().parents[1] / "configs" / name


def _pass(line):
    print(f"\n{line}: PASS")


def test_criterion_1_homogeneous_exactness(homogeneous_run):
    result, elapsed = homogeneous_run
    sol = result.cell_solutions["Q1"]
    peak = max(np.abs(f.values).max() for f in sol.first_order)
    for row in sol.second_order:
        for f in row:
            peak = max(peak, np.abs(f.values).max())
    assert peak < 1e-9
    assert np.abs(sol.k_eff - 100.0 * np.eye(2)).max() < 1e-8
    assert result.report.Terror2 < 1e-6
    assert result.report.TError2 < 1e-6
    assert elapsed < 10.0
    _pass("criterion 1 (homogeneous medium: correctors vanish, k_eff = 100 I, "
          f"errors {result.report.TError2:.1e} % in {elapsed:.1f} s)")


def test_criterion_2_compatibility_integral():
    worst = 0.0
    for name in ("example1.cfg", "example2.cfg", "homogeneous.cfg", "sweep_single.cfg"):
        cfg = parse_config(config_path(name))
        for spec in cfg.cells.values():
            sol = solve_cell(spec, cfg.tolerance)
            res = compatibility_residuals(sol.mesh, sol.conductivity,
                                          sol.first_order, sol.k_eff)
            worst = max(worst, np.abs(np.asarray(res)).max())
    assert worst < 1e-8
    _pass(f"criterion 2 (second-order solvability integral, worst residual {worst:.1e})")


def test_criterion_3_symmetry_cancellation():
    spec = UnitCellSpec("S", 32, Inclusion("square", (0.5, 0.5), 0.5), 1.0, 0.01)
    sol = solve_cell(spec, 1e-12)
    k = sol.k_eff
    assert abs(k[0, 1]) < 1e-6 * k[0, 0]
    n = spec.divisions
    idx = np.arange(sol.mesh.n_nodes)
    ix, iy = idx % (n + 1), idx // (n + 1)
    mirror_x = iy * (n + 1) + (n - ix)
    mirror_y = (n - iy) * (n + 1) + ix
    m1 = sol.first_order[0].values
    m2 = sol.first_order[1].values
    anti = max(np.abs(m1 + m1[mirror_x]).max(), np.abs(m2 + m2[mirror_y]).max())
    assert anti < 1e-8
    _pass(f"criterion 3 (mirror-symmetric cell: |k12| = {abs(k[0, 1]):.1e}, "
          f"corrector antisymmetry {anti:.1e})")


def _check_reproduction_bands(report):
    assert report.Terror2 < 1.5
    assert 2.0 <= report.Terror0 <= 15.0
    assert 2.0 <= report.Terror1 <= 15.0
    assert report.TError2 < 15.0
    assert report.TError0 > 80.0
    assert report.TError1 > 80.0


def test_criterion_4_first_example_reproduction(example1_run):
    result, elapsed = example1_run
    _check_reproduction_bands(result.report)
    assert elapsed < 300.0
    r = result.report
    _pass("criterion 4 (checkerboard run 1: "
          f"L2 {r.Terror0:.2f}/{r.Terror1:.2f}/{r.Terror2:.4f} %, "
          f"H1 {r.TError0:.2f}/{r.TError1:.2f}/{r.TError2:.4f} % in {elapsed:.1f} s)")


def test_criterion_5_second_example_reproduction(example2_run):
    result, elapsed = example2_run
    _check_reproduction_bands(result.report)
    assert elapsed < 600.0
    r = result.report
    _pass("criterion 5 (checkerboard run 2: "
          f"L2 {r.Terror0:.2f}/{r.Terror1:.2f}/{r.Terror2:.4f} %, "
          f"H1 {r.TError0:.2f}/{r.TError1:.2f}/{r.TError2:.4f} % in {elapsed:.1f} s)")


def test_criterion_6_convergence_trend(eps_sweep):
    result, _ = eps_sweep
    errors = [run.report.TError2 for run in result.runs]
    assert all(run.report is not None for run in result.runs)
    assert errors[0] > errors[1] > errors[2]
    assert result.slope >= 0.4
    _pass("criterion 6 (period sweep 1/4, 1/8, 1/16: TError2 = "
          + "/".join(f"{e:.2f}" for e in errors)
          + f" %, slope {result.slope:.2f})")


def test_criterion_7_cost_asymmetry(example1_run):
    result, _ = example1_run
    counts = result.counts
    sots_dof = counts["macro"][1] + sum(
        counts[key][1] for key in counts if key.startswith("cell ")
    )
    ref_dof = counts["reference"][1]
    assert sots_dof < 0.6 * ref_dof
    t = result.timings
    sots_time = t["cells"] + t["macro"] + t["second_order"] + t["reconstruct"]
    assert sots_time < 0.5 * t["reference"]
    _pass(f"criterion 7 (cost: {sots_dof}/{ref_dof} dof = {100 * sots_dof / ref_dof:.0f} %, "
          f"solve time ratio {100 * sots_time / t['reference']:.0f} %)")


def test_criterion_8_fem_property_suite():
    start = time.perf_counter()
    mesh = generate_unit_cell_mesh(UnitCellSpec("Q", 8, Inclusion(), 1.0, 1.0))
    k = isotropic_conductivity(mesh, {0: 1.0})
    system = assemble_stiffness(mesh, k)

    dense = system.matrix.toarray()
    assert np.abs(dense - dense.T).max() == 0.0
    free = np.setdiff1d(np.arange(mesh.n_nodes), mesh.dirichlet_nodes)
    np.linalg.cholesky(dense[np.ix_(free, free)])

    bn = mesh.dirichlet_nodes
    lin = apply_dirichlet(system.with_rhs(np.zeros(mesh.n_nodes)), bn, mesh.nodes[bn, 0])
    solution = solve_spd(lin, 1e-12)
    assert np.abs(solution - mesh.nodes[:, 0]).max() < 1e-9

    tol = 1e-10
    rhs = assemble_load(mesh, lambda x, y: 4.0)
    sysd = apply_dirichlet(system.with_rhs(rhs), bn, np.zeros(bn.size))
    sol = solve_spd(sysd, tol)
    residual = sysd.matrix @ sol - sysd.rhs
    assert np.linalg.norm(residual[free]) <= tol * np.linalg.norm(sysd.rhs[free])

    field = ScalarField(mesh, 3.0 * mesh.nodes[:, 0] - mesh.nodes[:, 1])
    grad = recover_gradient(field)
    assert np.abs(grad - np.array([3.0, -1.0])).max() < 1e-12

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _pass(f"criterion 8 (P1 core: exactness, SPD, residual, recovery in {elapsed:.2f} s)")

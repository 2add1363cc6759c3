import numpy as np
import pytest

from twoscale_heat.macro import HomogenizedModel, solve_homogenized
from twoscale_heat.mesh import (
    Inclusion,
    Rect,
    SubdomainSpec,
    UnitCellSpec,
    generate_fine_mesh,
)
from twoscale_heat.reference import fine_conductivity, solve_reference

UNIT = Rect(0, 0, 1, 1)
SINGLE = [SubdomainSpec(UNIT, "Q1", 0.25)]


def specs(k_inclusion=0.01, n=8):
    return {"Q1": UnitCellSpec("Q1", n, Inclusion("circle", (0.5, 0.5), 0.25), 1.0, k_inclusion)}


def test_fine_conductivity_per_phase():
    cs = specs()
    mesh = generate_fine_mesh(UNIT, SINGLE, cs, 8)
    k = fine_conductivity(mesh, SINGLE, cs)
    inc = mesh.phase == 1
    assert np.allclose(k.tensors[inc], 0.01 * np.eye(2))
    assert np.allclose(k.tensors[~inc], 1.0 * np.eye(2))


def test_equal_phases_match_homogenized_solve():
    # with no contrast the reference problem IS the homogenized problem on
    # the same mesh, so the two solvers must agree to solver precision
    cs = specs(k_inclusion=1.0)
    mesh = generate_fine_mesh(UNIT, SINGLE, cs, 8)
    source = lambda x, y: 40.0
    dirichlet = lambda x, y: 300.0
    te = solve_reference(mesh, SINGLE, cs, source, dirichlet, rel_tol=1e-13)
    model = HomogenizedModel(
        mesh=mesh, tensors={0: np.eye(2)}, source=source, dirichlet=dirichlet
    )
    t0 = solve_homogenized(model, 1e-13)
    assert np.abs(te.values - t0.values).max() < 1e-9


def test_l2_norm_cauchy_under_mesh_doubling():
    cs = specs()
    norms = []
    for d in (8, 16, 32):
        mesh = generate_fine_mesh(UNIT, SINGLE, cs, d)
        te = solve_reference(mesh, SINGLE, cs, lambda x, y: 50.0,
                             lambda x, y: 300.0, rel_tol=1e-12)
        mid = te.values[mesh.elements].mean(axis=1)
        norms.append(np.sqrt(np.sum(mesh.areas * mid**2)))
    assert abs(norms[2] - norms[1]) < abs(norms[1] - norms[0])


def test_reference_oscillates_with_cell_period(example1_run):
    # autocorrelation of the (reference - order0) residual along a gridline
    # peaks at a lag of one period in each subdomain
    result, _ = example1_run
    mesh = result.fine_mesh
    residual = result.reference.values - result.samples[0].values
    h = min(sd.epsilon for sd in result.config.subdomains) / result.config.fine_per_cell_divisions
    rows = [
        (0.5 + 7 * h, 0.0, 1.0, result.config.subdomains[0].epsilon),
        (0.5 - 7 * h, 1.0, 2.0, result.config.subdomains[1].epsilon),
    ]
    for y_row, x_lo, x_hi, eps in rows:
        sel = (np.abs(mesh.nodes[:, 1] - y_row) < 1e-9) \
            & (mesh.nodes[:, 0] > x_lo + 1e-9) & (mesh.nodes[:, 0] < x_hi - 1e-9)
        xs = mesh.nodes[sel, 0]
        v = residual[sel][np.argsort(xs)]
        v = v - v.mean()
        period = int(round(eps / h))
        best_lag, best = None, -np.inf
        for lag in range(period // 2, 2 * period):
            a, b = v[:-lag], v[lag:]
            c = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
            if c > best:
                best, best_lag = c, lag
        assert abs(best_lag - period) <= 1
        assert best > 0.9


def test_reference_maximum_principle(example1_run):
    result, _ = example1_run
    assert result.reference.values.min() == pytest.approx(373.15, abs=1e-8)


def test_reference_solution_deterministic():
    cs = specs()
    mesh = generate_fine_mesh(UNIT, SINGLE, cs, 8)
    a = solve_reference(mesh, SINGLE, cs, lambda x, y: 50.0, lambda x, y: 300.0, rel_tol=1e-12)
    b = solve_reference(mesh, SINGLE, cs, lambda x, y: 50.0, lambda x, y: 300.0, rel_tol=1e-12)
    assert np.array_equal(a.values, b.values)

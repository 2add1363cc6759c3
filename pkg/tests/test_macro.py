import numpy as np
import pytest

from twoscale_heat.fem import (
    ScalarField,
    assemble_load,
    assemble_stiffness,
    interpolate,
)
from twoscale_heat.macro import HomogenizedModel, derivatives_of_t0, solve_homogenized
from twoscale_heat.mesh import Rect, SubdomainSpec, generate_macro_mesh

FOUR = [
    SubdomainSpec(Rect(0, 0, 1, 1), "Q1", 0.25),
    SubdomainSpec(Rect(1, 0, 2, 1), "Q1", 0.25),
    SubdomainSpec(Rect(1, 1, 2, 2), "Q1", 0.25),
    SubdomainSpec(Rect(0, 1, 1, 2), "Q1", 0.25),
]


def identity_model(mesh, source, dirichlet, scale=1.0):
    tags = sorted(set(mesh.subdomain.tolist()))
    return HomogenizedModel(
        mesh=mesh,
        tensors={s: scale * np.eye(2) for s in tags},
        source=source,
        dirichlet=dirichlet,
    )


def test_linear_dirichlet_no_source_is_exact():
    mesh = generate_macro_mesh(Rect(0, 0, 2, 2), FOUR, 8)
    model = identity_model(mesh, None, lambda x, y: x, scale=3.0)
    t0 = solve_homogenized(model, 1e-12)
    assert np.abs(t0.values - mesh.nodes[:, 0]).max() < 1e-9


def test_maximum_principle_floor_on_boundary():
    mesh = generate_macro_mesh(Rect(0, 0, 2, 2), FOUR, 16)
    model = identity_model(mesh, lambda x, y: 100.0, lambda x, y: 373.15)
    t0 = solve_homogenized(model, 1e-12)
    assert t0.values.min() == pytest.approx(373.15, abs=1e-9)
    interior = np.setdiff1d(np.arange(mesh.n_nodes), mesh.dirichlet_nodes)
    assert (t0.values[interior] > 373.15).all()


def test_refinement_is_cauchy_at_shared_nodes():
    fields = {}
    for res in (8, 16, 32):
        mesh = generate_macro_mesh(Rect(0, 0, 2, 2), FOUR, res)
        model = identity_model(mesh, lambda x, y: 100.0, lambda x, y: 373.15)
        fields[res] = solve_homogenized(model, 1e-12)
    coarse = fields[8].mesh
    v8 = fields[8].values
    v16 = np.array([interpolate(fields[16], p) for p in coarse.nodes])
    v32 = np.array([interpolate(fields[32], p) for p in coarse.nodes])
    d1 = np.abs(v16 - v8).max()
    d2 = np.abs(v32 - v16).max()
    assert d2 < d1


def test_flux_balance():
    # reactions at Dirichlet nodes balance the volumetric source
    mesh = generate_macro_mesh(Rect(0, 0, 2, 2), FOUR, 16)
    model = identity_model(mesh, lambda x, y: 100.0, lambda x, y: 373.15, scale=2.5)
    t0 = solve_homogenized(model, 1e-12)
    system = assemble_stiffness(mesh, model.conductivity())
    load = assemble_load(mesh, model.source)
    reactions = system.matrix @ t0.values - load
    total = reactions[mesh.dirichlet_nodes].sum()
    assert total == pytest.approx(-400.0, rel=1e-6)


def test_solution_symmetric_under_quarter_turn_layout():
    # equal tensors and symmetric data: T0 must be invariant under the
    # 180-degree rotation of the domain
    mesh = generate_macro_mesh(Rect(0, 0, 2, 2), FOUR, 12)
    model = identity_model(mesh, lambda x, y: 50.0, lambda x, y: 300.0)
    t0 = solve_homogenized(model, 1e-12)
    rotated = np.array([interpolate(t0, (2.0 - p[0], 2.0 - p[1])) for p in mesh.nodes])
    scale = np.abs(t0.values).max()
    assert np.abs(rotated - t0.values).max() < 1e-8 * scale


def test_hessian_of_quadratic_interior():
    sds = [SubdomainSpec(Rect(0, 0, 1, 1), "Q1", 0.25)]
    mesh = generate_macro_mesh(Rect(0, 0, 1, 1), sds, 16)
    f = ScalarField(mesh, mesh.nodes[:, 0] ** 2)
    hess = derivatives_of_t0(f).hessian[0]
    h = 1.0 / 16
    inner = np.all((mesh.nodes > 2 * h + 1e-9) & (mesh.nodes < 1 - 2 * h - 1e-9), axis=1)
    assert np.abs(hess[inner, 0, 0] - 2.0).max() < 0.05 * 2.0
    assert np.abs(hess[inner, 0, 1]).max() < 1e-10
    assert np.abs(hess[inner, 1, 1]).max() < 1e-10


def test_hessian_of_linear_vanishes():
    sds = [SubdomainSpec(Rect(0, 0, 1, 1), "Q1", 0.25)]
    mesh = generate_macro_mesh(Rect(0, 0, 1, 1), sds, 8)
    f = ScalarField(mesh, 3.0 * mesh.nodes[:, 0] - mesh.nodes[:, 1] + 7.0)
    hess = derivatives_of_t0(f).hessian[0]
    assert np.nanmax(np.abs(hess)) < 1e-10


def test_hessian_is_symmetrized():
    sds = [SubdomainSpec(Rect(0, 0, 1, 1), "Q1", 0.25)]
    mesh = generate_macro_mesh(Rect(0, 0, 1, 1), sds, 12)
    f = ScalarField(mesh, np.sin(mesh.nodes[:, 0]) * mesh.nodes[:, 1] ** 2)
    hess = derivatives_of_t0(f).hessian[0]
    assert np.array_equal(hess[:, 0, 1], hess[:, 1, 0])


def test_gradient_recovery_respects_subdomain_interfaces():
    # a field with a kink on the interface x=1 recovers one-sided slopes
    mesh = generate_macro_mesh(Rect(0, 0, 2, 2), FOUR, 8)
    x = mesh.nodes[:, 0]
    f = ScalarField(mesh, np.where(x < 1.0, x, 2.0 - x))
    grads = derivatives_of_t0(f).gradient
    on_iface = np.abs(x - 1.0) < 1e-12
    # subdomain 0 is [0,1]^2: its one-sided recovery sees slope +1 only
    g0 = grads[0][on_iface & (mesh.nodes[:, 1] < 1.0 - 1e-12) & (mesh.nodes[:, 1] > 1e-12), 0]
    g1 = grads[1][on_iface & (mesh.nodes[:, 1] < 1.0 - 1e-12) & (mesh.nodes[:, 1] > 1e-12), 0]
    assert np.abs(g0 - 1.0).max() < 1e-12
    assert np.abs(g1 + 1.0).max() < 1e-12

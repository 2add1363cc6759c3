"""Backend equivalence: the compiled kernels must agree with the numpy ones.

Comparisons use allclose, not bitwise equality; the two backends sum in the
same order but compilers may fuse operations differently.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from twoscale_heat import kernels
from twoscale_heat.kernels import _pykernels
from twoscale_heat.mesh import Inclusion, UnitCellSpec, generate_unit_cell_mesh

HAVE_C = kernels.BACKEND == "c"
needs_c = pytest.mark.skipif(not HAVE_C, reason="compiled kernels unavailable")


@pytest.fixture(scope="module")
def mesh():
    spec = UnitCellSpec("Q", 24, Inclusion("circle", (0.5, 0.5), 0.25), 1.0, 0.01)
    return generate_unit_cell_mesh(spec)


@pytest.fixture(scope="module")
def tensors(mesh):
    rng = np.random.default_rng(0)
    t = np.zeros((mesh.n_elements, 2, 2))
    t[:, 0, 0] = 1.0 + rng.random(mesh.n_elements)
    t[:, 1, 1] = 1.0 + rng.random(mesh.n_elements)
    t[:, 0, 1] = t[:, 1, 0] = 0.2 * rng.random(mesh.n_elements)
    return t


@needs_c
def test_tri_geometry_matches(mesh):
    a1, g1 = kernels.tri_geometry(mesh.nodes, mesh.elements)
    a2, g2 = _pykernels.tri_geometry(mesh.nodes, mesh.elements)
    assert np.allclose(a1, a2, rtol=1e-14, atol=0)
    assert np.allclose(g1, g2, rtol=1e-13, atol=1e-15)


@needs_c
def test_local_stiffness_matches(mesh, tensors):
    k1 = kernels.local_stiffness(mesh.areas, mesh.basis_grads, tensors)
    k2 = _pykernels.local_stiffness(mesh.areas, mesh.basis_grads, tensors)
    assert np.allclose(k1, k2, rtol=1e-12, atol=1e-15)


@needs_c
def test_element_gradients_matches(mesh):
    rng = np.random.default_rng(1)
    values = rng.standard_normal(mesh.n_nodes)
    g1 = kernels.element_gradients(mesh.basis_grads, mesh.elements, values)
    g2 = _pykernels.element_gradients(mesh.basis_grads, mesh.elements, values)
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-14)


@needs_c
def test_accumulate_weighted_matches(mesh):
    rng = np.random.default_rng(2)
    ev = rng.standard_normal((mesh.n_elements, 2))
    mask = mesh.phase == 0
    for m in (None, mask):
        s1, t1 = kernels.accumulate_weighted(mesh.elements, mesh.areas, ev, mesh.n_nodes, m)
        s2, t2 = _pykernels.accumulate_weighted(mesh.elements, mesh.areas, ev, mesh.n_nodes, m)
        assert np.allclose(s1, s2, rtol=1e-12, atol=1e-16)
        assert np.allclose(t1, t2, rtol=1e-13, atol=0)


@needs_c
def test_locate_points_identical_tie_breaks(mesh):
    from twoscale_heat.mesh import locate_many

    rng = np.random.default_rng(3)
    pts = rng.uniform(0.0, 1.0, (500, 2))
    # include edge and node hits
    pts = np.vstack([pts, mesh.nodes[:50], mesh.centroids[:50]])
    e_active, b_active = locate_many(mesh, pts)
    idx = mesh._bins
    e_py, b_py = _pykernels.locate_points(
        mesh.nodes, mesh.elements, idx.starts, idx.items, idx.nbx, idx.nby,
        idx.x0, idx.y0, idx.bw, idx.bh, np.ascontiguousarray(pts),
    )
    assert np.array_equal(e_active, e_py)
    assert np.allclose(b_active, b_py, atol=1e-12)


def test_forced_python_backend_runs():
    env = dict(os.environ, TWOSCALE_HEAT_KERNELS="py")
    code = (
        "from twoscale_heat import kernels\n"
        "assert kernels.BACKEND == 'py', kernels.BACKEND\n"
        "from twoscale_heat.mesh import Inclusion, UnitCellSpec\n"
        "from twoscale_heat.cells import solve_cell\n"
        "spec = UnitCellSpec('Q', 8, Inclusion('circle', (0.5, 0.5), 0.25), 1.0, 0.01)\n"
        "sol = solve_cell(spec, 1e-10)\n"
        "assert sol.k_eff[0, 0] > 0\n"
    )
    subprocess.run([sys.executable, "-c", code], env=env, check=True)


@needs_c
def test_backends_agree_on_homogenized_tensor():
    code = (
        "from twoscale_heat.mesh import Inclusion, UnitCellSpec\n"
        "from twoscale_heat.cells import solve_cell\n"
        "spec = UnitCellSpec('Q', 16, Inclusion('circle', (0.5, 0.5), 0.25), 1.0, 0.01)\n"
        "k = solve_cell(spec, 1e-12).k_eff\n"
        "print('%.17g %.17g' % (k[0, 0], k[0, 1]))\n"
    )
    out = {}
    for backend in ("py", "c"):
        env = dict(os.environ, TWOSCALE_HEAT_KERNELS=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env,
                              check=True, capture_output=True, text=True)
        out[backend] = [float(tok) for tok in proc.stdout.split()]
    assert out["py"][0] == pytest.approx(out["c"][0], rel=1e-10)
    assert out["py"][1] == pytest.approx(out["c"][1], abs=1e-12)

"""Compare the compiled kernels against the numpy fallback.

Times the per-element hot paths on a fine-mesh-sized problem and prints the
speedup plus the largest numerical deviation between backends.

    python3 benchmarks/bench_kernels.py [divisions-per-side]
"""

import sys
import time

import numpy as np

from twoscale_heat.kernels import _pykernels

try:
    from twoscale_heat.kernels import _ckernels
except ImportError:
    _ckernels = None

from twoscale_heat.mesh import Inclusion, Rect, SubdomainSpec, UnitCellSpec, generate_fine_mesh


def build_mesh(n):
    spec = {"Q1": UnitCellSpec("Q1", 20, Inclusion("circle", (0.5, 0.5), 0.25), 1.0, 0.001)}
    sds = [SubdomainSpec(Rect(0, 0, 1, 1), "Q1", 1.0 / (n // 20))]
    return generate_fine_mesh(Rect(0, 0, 1, 1), sds, spec, 20)


def timed(fn, *args, repeat=5):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 240
    mesh = build_mesh(n)
    print(f"mesh: {mesh.n_elements} elements, {mesh.n_nodes} nodes")
    if _ckernels is None:
        print("compiled kernels not built; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    tensors = np.tile(np.eye(2), (mesh.n_elements, 1, 1))
    tensors[:, 0, 0] += rng.random(mesh.n_elements)
    tensors[:, 1, 1] += rng.random(mesh.n_elements)
    values = rng.standard_normal(mesh.n_nodes)
    elem_vals = rng.standard_normal((mesh.n_elements, 2))
    pts = rng.uniform(0.0, 1.0, (20000, 2))
    bins = mesh._bins

    cases = [
        ("tri_geometry", (mesh.nodes, mesh.elements)),
        ("local_stiffness", (mesh.areas, mesh.basis_grads, tensors)),
        ("element_gradients", (mesh.basis_grads, mesh.elements, values)),
        ("accumulate_weighted", (mesh.elements, mesh.areas, elem_vals, mesh.n_nodes, None)),
        ("locate_points", (mesh.nodes, mesh.elements, bins.starts, bins.items,
                           bins.nbx, bins.nby, bins.x0, bins.y0, bins.bw, bins.bh, pts)),
    ]

    header = f"{'kernel':<22s}{'numpy':>12s}{'compiled':>12s}{'speedup':>10s}{'max diff':>12s}"
    print(header)
    print("-" * len(header))
    for name, args in cases:
        t_py, out_py = timed(getattr(_pykernels, name), *args)
        t_c, out_c = timed(getattr(_ckernels, name), *args)
        diff = max_diff(out_py, out_c)
        print(f"{name:<22s}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
              f"{t_py / t_c:>9.1f}x{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

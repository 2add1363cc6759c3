"""End-to-end experiment pipeline.

Stage order follows the method: mesh generation, first-order cell solves
plus the homogenized tensors, the homogenized macro solve, second-order
cell solves, two-scale reconstruction on the fine mesh, the fine reference
solve, and finally the error metrics.

Timings go to ``timings.txt``; ``report.txt``/``report.csv`` contain only
deterministic content so identical configs reproduce identical bytes.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from filelock import FileLock, Timeout

from .cells import CellSolutionSet, solve_cell
from .config import ExperimentConfig
from .errors import LockError, StageError
from .fem import ScalarField
from .macro import HomogenizedModel, derivatives_of_t0, solve_homogenized
from .mesh import Mesh2D, generate_fine_mesh, generate_macro_mesh, owning_subdomain
from .metrics import ErrorReport, compare, format_csv, format_error_table, format_size_table
from .reconstruct import MultiscaleSolution, sample_all_orders
from .reference import solve_reference
from .vtkio import write_mesh_vtk, write_tensor_txt

STAGE_ORDER = ("mesh", "cells", "macro", "second_order", "reconstruct", "reference", "metrics")

STAGE_DEPENDENCIES = {
    "mesh": (),
    "cells": ("mesh",),
    "macro": ("cells",),
    "second_order": ("macro",),
    "reconstruct": ("second_order",),
    "reference": ("mesh",),
    "metrics": ("reconstruct", "reference"),
}

# exit codes: 0 ok, 1 usage/config, 2 output dir locked, then one per stage
STAGE_EXIT_CODES = {name: 3 + i for i, name in enumerate(STAGE_ORDER)}
LOCK_EXIT_CODE = 2


def thread_count() -> int:
    """Worker count for the independent cell solves (env override only)."""
    raw = os.environ.get("TWOSCALE_HEAT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class RunResult:
    config: ExperimentConfig
    stages_run: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    counts: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    macro_mesh: Optional[Mesh2D] = None
    fine_mesh: Optional[Mesh2D] = None
    cell_solutions: Dict[str, CellSolutionSet] = field(default_factory=dict)
    t0: Optional[ScalarField] = None
    solution: Optional[MultiscaleSolution] = None
    samples: Optional[Tuple[ScalarField, ScalarField, ScalarField]] = None
    reference: Optional[ScalarField] = None
    report: Optional[ErrorReport] = None
    artifacts: List[Path] = field(default_factory=list)

    @property
    def k_eff(self) -> Dict[str, np.ndarray]:
        return {cid: sol.k_eff for cid, sol in self.cell_solutions.items()}


def _select_stages(stages) -> List[str]:
    if stages is None:
        return list(STAGE_ORDER)
    requested = list(stages)
    unknown = set(requested) - set(STAGE_ORDER)
    if unknown:
        raise StageError("mesh", f"unknown stage names: {sorted(unknown)}")
    chosen = set(requested)
    for name in requested:
        missing = [d for d in STAGE_DEPENDENCIES[name] if d not in chosen]
        if missing:
            raise StageError(name, f"stage {name!r} needs {missing} to run first")
    return [s for s in STAGE_ORDER if s in chosen]


def run_experiment(config: ExperimentConfig, out_dir=None, stages=None,
                   rel_tol: Optional[float] = None,
                   cell_cache: Optional[Dict[str, CellSolutionSet]] = None) -> RunResult:
    """Run the pipeline, optionally writing artifacts into ``out_dir``.

    Only one run may write a given output directory at a time (lock file).
    ``cell_cache`` lets sweeps reuse cell solutions, which do not depend on
    the period length.
    """
    tol = config.tolerance if rel_tol is None else rel_tol
    result = RunResult(config=config)
    selected = _select_stages(stages)

    lock = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        lock = FileLock(out_dir / ".lock")
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise LockError(f"output directory {out_dir} is locked by another run") from None
    try:
        _run_stages(config, result, selected, tol, cell_cache)
        if out_dir is not None:
            _write_artifacts(result, out_dir)
    finally:
        if lock is not None:
            lock.release()
    return result


def _timed(result: RunResult, name: str, fn):
    start = time.perf_counter()
    try:
        out = fn()
    except Exception as exc:
        raise StageError(name, exc) from exc
    result.timings[name] = time.perf_counter() - start
    result.stages_run.append(name)
    return out


def _run_stages(config, result, selected, tol, cell_cache):
    cfg = config
    cell_meshes = {}

    if "mesh" in selected:
        def _mesh():
            result.macro_mesh = generate_macro_mesh(
                cfg.domain, cfg.subdomains, cfg.macro_resolution, cfg.neumann_sides
            )
            result.fine_mesh = generate_fine_mesh(
                cfg.domain, cfg.subdomains, cfg.cells, cfg.fine_per_cell_divisions,
                cfg.neumann_sides,
            )
            result.counts["macro"] = (result.macro_mesh.n_elements, result.macro_mesh.n_nodes)
            result.counts["reference"] = (result.fine_mesh.n_elements, result.fine_mesh.n_nodes)
        _timed(result, "mesh", _mesh)

    if "cells" in selected:
        def _cells():
            used = sorted({sd.cell_id for sd in cfg.subdomains})
            def one(cid):
                if cell_cache is not None and cid in cell_cache:
                    return cell_cache[cid]
                return solve_cell(cfg.cells[cid], tol)
            workers = min(thread_count(), len(used))
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    solved = list(pool.map(one, used))
            else:
                solved = [one(cid) for cid in used]
            for cid, sol in zip(used, solved):
                result.cell_solutions[cid] = sol
                result.counts[f"cell {cid}"] = (sol.mesh.n_elements, sol.mesh.n_nodes)
                if cell_cache is not None:
                    cell_cache[cid] = sol
        _timed(result, "cells", _cells)

    if "macro" in selected:
        def _macro():
            tensors = {
                s: result.cell_solutions[sd.cell_id].k_eff
                for s, sd in enumerate(cfg.subdomains)
            }
            model = HomogenizedModel(
                mesh=result.macro_mesh,
                tensors=tensors,
                source=cfg.source,
                dirichlet=cfg.dirichlet,
                neumann_flux=cfg.neumann_flux,
            )
            result.t0 = solve_homogenized(model, tol)
        _timed(result, "macro", _macro)

    if "second_order" in selected:
        # second-order correctors were produced with the cells; this stage
        # simply assembles the evaluable solution in method order
        def _second():
            derivs = derivatives_of_t0(result.t0)
            result.solution = MultiscaleSolution(
                domain=cfg.domain,
                subdomains=list(cfg.subdomains),
                cells=result.cell_solutions,
                t0=result.t0,
                derivatives=derivs,
            )
        _timed(result, "second_order", _second)

    if "reconstruct" in selected:
        def _reconstruct():
            result.samples = sample_all_orders(result.solution, result.fine_mesh)
        _timed(result, "reconstruct", _reconstruct)

    if "reference" in selected:
        def _reference():
            result.reference = solve_reference(
                result.fine_mesh, cfg.subdomains, cfg.cells, cfg.source,
                cfg.dirichlet, cfg.neumann_flux, tol,
            )
        _timed(result, "reference", _reference)

    if "metrics" in selected:
        def _metrics():
            report = compare(result.reference, *result.samples)
            report.counts = dict(result.counts)
            report.timings = dict(result.timings)
            result.report = report
        _timed(result, "metrics", _metrics)


def _write_artifacts(result: RunResult, out_dir: Path):
    cfg = result.config
    paths = result.artifacts
    for cid, sol in result.cell_solutions.items():
        point_data = {}
        for a in range(2):
            point_data[f"corrector_1_{'xy'[a]}"] = sol.first_order[a].values
        for a in range(2):
            for b in range(2):
                point_data[f"corrector_2_{'xy'[a]}{'xy'[b]}"] = sol.second_order[a][b].values
        p = out_dir / f"cell_{cid}.vtk"
        write_mesh_vtk(p, sol.mesh, point_data, {"phase": sol.mesh.phase},
                       title=f"unit cell {cid}")
        paths.append(p)
        p = out_dir / f"khat_{cid}.txt"
        write_tensor_txt(p, sol.k_eff)
        paths.append(p)
    if result.t0 is not None:
        point_data = {"T0": result.t0.values}
        if result.solution is not None:
            derivs = result.solution.derivatives
            own = owning_subdomain(cfg.domain, cfg.subdomains, result.macro_mesh.nodes)
            for name, comp in (("dT0_dx", (0,)), ("dT0_dy", (1,))):
                vals = np.zeros(result.macro_mesh.n_nodes)
                for s in range(len(cfg.subdomains)):
                    mask = own == s
                    vals[mask] = derivs.gradient[s][mask][(slice(None),) + comp]
                point_data[name] = vals
            for name, comp in (("d2T0_dxdx", (0, 0)), ("d2T0_dxdy", (0, 1)),
                               ("d2T0_dydy", (1, 1))):
                vals = np.zeros(result.macro_mesh.n_nodes)
                for s in range(len(cfg.subdomains)):
                    mask = own == s
                    vals[mask] = derivs.hessian[s][mask][(slice(None),) + comp]
                point_data[name] = vals
        p = out_dir / "macro.vtk"
        write_mesh_vtk(p, result.macro_mesh, point_data,
                       {"subdomain": result.macro_mesh.subdomain}, title="homogenized solve")
        paths.append(p)
    if result.fine_mesh is not None:
        point_data = {}
        if result.reference is not None:
            point_data["T_reference"] = result.reference.values
        if result.samples is not None:
            for order, f in enumerate(result.samples):
                point_data[f"T_order{order}"] = f.values
        p = out_dir / "fine.vtk"
        write_mesh_vtk(p, result.fine_mesh, point_data,
                       {"phase": result.fine_mesh.phase,
                        "subdomain": result.fine_mesh.subdomain},
                       title="fine reference mesh")
        paths.append(p)
    if result.report is not None:
        p = out_dir / "report.txt"
        with open(p, "w") as f:
            f.write(format_report_text(result))
        paths.append(p)
        p = out_dir / "report.csv"
        with open(p, "w") as f:
            f.write(format_csv(result.report))
        paths.append(p)
    p = out_dir / "timings.txt"
    with open(p, "w") as f:
        for name in STAGE_ORDER:
            if name in result.timings:
                f.write(f"{name:<14s}{result.timings[name]:12.3f} s\n")
    paths.append(p)


def format_report_text(result: RunResult) -> str:
    """Deterministic report: tensors, mesh sizes, error table."""
    lines = [f"two-scale reconstruction report: {result.config.name}", ""]
    for cid in sorted(result.cell_solutions):
        k = result.cell_solutions[cid].k_eff
        lines.append(f"homogenized conductivity of cell {cid} (W/(cm K))")
        for row in k:
            lines.append("  " + "  ".join(f"{v:.17g}" for v in row))
    lines.append("")
    lines.append(format_size_table(result.counts))
    if result.report is not None:
        lines.append("")
        lines.append(format_error_table(result.report))
    lines.append("")
    return "\n".join(lines)


@dataclass
class SweepRun:
    epsilon: float
    report: Optional[ErrorReport] = None
    error: Optional[str] = None


@dataclass
class SweepResult:
    runs: List[SweepRun] = field(default_factory=list)
    slope: Optional[float] = None
    artifacts: List[Path] = field(default_factory=list)


def sweep_epsilon(config: ExperimentConfig, eps_values, out_dir=None,
                  rel_tol: Optional[float] = None) -> SweepResult:
    """Repeat the experiment over period lengths, reusing cell solutions.

    Individual failures are recorded and the sweep continues; the fitted
    slope is d log(TError2) / d log(eps) over the successful runs.
    """
    result = SweepResult()
    cache: Dict[str, CellSolutionSet] = {}
    for eps in eps_values:
        eps = float(eps)
        run = SweepRun(epsilon=eps)
        try:
            cfg = config.with_epsilon(eps)
            out = run_experiment(cfg, out_dir=None, rel_tol=rel_tol, cell_cache=cache)
            run.report = out.report
        except Exception as exc:  # noqa: BLE001 - recorded per run
            run.error = str(exc)
        result.runs.append(run)
    good = [(r.epsilon, r.report.TError2) for r in result.runs if r.report is not None]
    if len(good) >= 2:
        eps = np.log([g[0] for g in good])
        err = np.log([g[1] for g in good])
        result.slope = float(np.polyfit(eps, err, 1)[0])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        lock = FileLock(out_dir / ".lock")
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise LockError(f"output directory {out_dir} is locked by another run") from None
        try:
            p = out_dir / "sweep.txt"
            with open(p, "w") as f:
                f.write(format_sweep_text(result, config.name))
            result.artifacts.append(p)
            p = out_dir / "sweep.csv"
            with open(p, "w") as f:
                f.write(format_sweep_csv(result))
            result.artifacts.append(p)
        finally:
            lock.release()
    return result


def format_sweep_text(result: SweepResult, name: str) -> str:
    lines = [f"period sweep: {name}", ""]
    header = f"{'eps_max':>12s}" + "".join(
        f"{c:>12s}" for c in ("Terror0", "Terror1", "Terror2", "TError0", "TError1", "TError2")
    )
    lines.append(header)
    for run in result.runs:
        if run.report is None:
            lines.append(f"{run.epsilon:>12.6g}      failed: {run.error}")
        else:
            r = run.report
            lines.append(
                f"{run.epsilon:>12.6g}"
                + "".join(f"{v:>12.4f}" for v in (*r.l2_row(), *r.h1_row()))
            )
    lines.append("")
    if result.slope is not None:
        lines.append(f"fitted H1 convergence slope (order 2): {result.slope:.4f}")
    lines.append("")
    return "\n".join(lines)


def format_sweep_csv(result: SweepResult) -> str:
    lines = ["eps_max,Terror0,Terror1,Terror2,TError0,TError1,TError2,status"]
    for run in result.runs:
        if run.report is None:
            lines.append(f"{run.epsilon:.10g},,,,,,,failed")
        else:
            r = run.report
            vals = ",".join(f"{v:.4f}" for v in (*r.l2_row(), *r.h1_row()))
            lines.append(f"{run.epsilon:.10g},{vals},ok")
    return "\n".join(lines) + "\n"

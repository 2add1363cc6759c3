"""Relative error metrics of the reconstructed fields against the reference.

Terror<k> is the relative L2 error of the order-k reconstruction in percent,
TError<k> the relative H1-seminorm error in percent, both measured on the
fine mesh.  Reports print the percentages with four decimals.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple


from .errors import SpecError
from .fem import ScalarField, norms


@dataclass
class ErrorReport:
    Terror0: float
    Terror1: float
    Terror2: float
    TError0: float
    TError1: float
    TError2: float
    counts: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    def l2_row(self):
        return (self.Terror0, self.Terror1, self.Terror2)

    def h1_row(self):
        return (self.TError0, self.TError1, self.TError2)


def compare(reference: ScalarField, order0: ScalarField, order1: ScalarField,
            order2: ScalarField) -> ErrorReport:
    """Build the error table from the four fields on the fine mesh."""
    rows = []
    for approx in (order0, order1, order2):
        n = norms(reference, approx)
        if n.l2_first == 0.0:
            raise SpecError("reference field has zero L2 norm; relative errors undefined")
        if n.h1_first == 0.0:
            raise SpecError("reference field has zero H1 seminorm; relative errors undefined")
        rows.append((100.0 * n.l2_diff / n.l2_first, 100.0 * n.h1_diff / n.h1_first))
    (t0, e0), (t1, e1), (t2, e2) = rows
    return ErrorReport(t0, t1, t2, e0, e1, e2)


def format_error_table(report: ErrorReport) -> str:
    lines = [
        "relative errors vs fine reference (percent)",
        f"{'':14s}{'order-0':>12s}{'order-1':>12s}{'order-2':>12s}",
        f"{'L2':14s}" + "".join(f"{v:>12.4f}" for v in report.l2_row()),
        f"{'H1':14s}" + "".join(f"{v:>12.4f}" for v in report.h1_row()),
    ]
    return "\n".join(lines)


def format_size_table(counts: Dict[str, Tuple[int, int]]) -> str:
    lines = [
        "mesh sizes",
        f"{'solve':<24s}{'elements':>12s}{'nodes':>12s}",
    ]
    for name, (ne, nn) in counts.items():
        lines.append(f"{name:<24s}{ne:>12d}{nn:>12d}")
    return "\n".join(lines)


def format_csv(report: ErrorReport) -> str:
    lines = [
        "metric,order0,order1,order2",
        "Terror_pct," + ",".join(f"{v:.4f}" for v in report.l2_row()),
        "TError_pct," + ",".join(f"{v:.4f}" for v in report.h1_row()),
    ]
    return "\n".join(lines) + "\n"

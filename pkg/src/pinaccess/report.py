"""Per-testcell DRC summaries plus library histograms and run metrics."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .drc import DISPLAY_NAMES, DrcViolation
from .techlib import LibraryProfile

CELL_COLUMN = 20
COUNT_COLUMN = 11
MASTER_COLUMN = 37


@dataclass(frozen=True)
class TestcellResult:
    id: str
    violations: tuple[DrcViolation, ...] = ()

    __test__ = False

    @property
    def drc_count(self) -> int:
        return len(self.violations)

    @property
    def masters(self) -> tuple[str, ...]:
        return tuple(sorted({m for v in self.violations for m in v.masters}))

    @property
    def types(self) -> tuple[str, ...]:
        return tuple(sorted({DISPLAY_NAMES[v.rule] for v in self.violations}))


def tcl_list(items: Iterable[str]) -> str:
    return " ".join("{" + item + "}" for item in items)


def _column(text: str, width: int) -> str:
    # always leave at least one blank so over-long values stay separable
    return text.ljust(width - 1) + " "


def render_summary(results: Sequence[TestcellResult]) -> str:
    """DRC summary text: clean testcells first, then the ones with violations."""
    clean = [r for r in results if r.drc_count == 0]
    dirty = [r for r in results if r.drc_count > 0]
    lines = [
        "=====",
        "SCRIPT-Info: Printing DRC Summary ...",
        "=====",
        f"##### {len(clean)} cells without DRC errors #####",
        "-----",
        "Cell".ljust(CELL_COLUMN) + "DRC count".ljust(COUNT_COLUMN)
        + "Master Cells with DRC".ljust(MASTER_COLUMN) + "DRC Types",
        "-----",
    ]
    for r in clean:
        lines.append(_column(r.id, CELL_COLUMN) + "0")
    lines.append(f"##### {len(dirty)} cells with DRC errors #####")
    for r in dirty:
        row = (_column(r.id, CELL_COLUMN) + _column(str(r.drc_count), COUNT_COLUMN)
               + _column(" ".join(r.masters), MASTER_COLUMN) + tcl_list(r.types))
        lines.append(row)
    return "\n".join(lines) + "\n"


def summary_csv(results: Sequence[TestcellResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["testcell_id", "drc_count", "masters", "types"])
    for r in results:
        writer.writerow([r.id, r.drc_count, " ".join(r.masters), ";".join(r.types)])
    return buf.getvalue()


# --------------------------------------------------------------------------- histogram


def width_histogram(profile: LibraryProfile, bucket=1) -> list[tuple[Fraction, Fraction]]:
    """(upper edge, fraction) per non-empty bucket of width / minimum width.

    Bucket k holds normalized widths in ((k-1)*bucket, k*bucket]. Fractions
    are exact and sum to one.
    """
    if len(profile) == 0:
        raise ValueError("histogram of an empty library")
    bucket = Fraction(bucket)
    if bucket <= 0:
        raise ValueError("bucket must be positive")
    counts: Counter = Counter()
    for w in profile.normalized_widths.values():
        counts[math.ceil(w / bucket) * bucket] += 1
    total = len(profile)
    return [(edge, Fraction(counts[edge], total)) for edge in sorted(counts)]


def cumulative_fraction(histogram: Sequence[tuple[Fraction, Fraction]], upto) -> Fraction:
    return sum((f for edge, f in histogram if edge <= upto), Fraction(0))


def histogram_csv(histogram: Sequence[tuple[Fraction, Fraction]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bucket", "fraction"])
    for edge, frac in histogram:
        writer.writerow([str(edge), str(frac)])
    return buf.getvalue()


# --------------------------------------------------------------------------- metrics


@dataclass
class RunSummary:
    testcells: list[TestcellResult] = field(default_factory=list)
    per_cell: dict[str, int] = field(default_factory=dict)
    wall_time_seconds: float = 0.0
    output_bytes: int = 0
    cells_with_violations: int = 0

    @property
    def total_attributions(self) -> int:
        return sum(len(v.masters) for r in self.testcells for v in r.violations)


def collect_metrics(results: Sequence[TestcellResult], wall_time_seconds: float = 0.0,
                    output_bytes: int = 0, library_size: int | None = None) -> RunSummary:
    per_cell: Counter = Counter()
    for r in results:
        for v in r.violations:
            per_cell.update(v.masters)
    dirty = sum(1 for n in per_cell.values() if n)
    if library_size is not None and dirty > library_size:
        raise ValueError("more dirty cells than the library holds")
    return RunSummary(list(results), dict(sorted(per_cell.items())), wall_time_seconds,
                      output_bytes, dirty)


def metrics_csv(summary: RunSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "value"])
    writer.writerow(["wall_time_seconds", f"{summary.wall_time_seconds:.3f}"])
    writer.writerow(["output_bytes", summary.output_bytes])
    writer.writerow(["cells_with_violations", summary.cells_with_violations])
    return buf.getvalue()


def per_cell_csv(summary: RunSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["master", "violations"])
    for master, n in summary.per_cell.items():
        writer.writerow([master, n])
    return buf.getvalue()

"""End-to-end run: library file in, per-testcell files and summaries out.

Phases run in order: parse, profile, enumerate, connect, emit, plan straps,
route, check, attribute, report. Testcells are independent after
enumeration, so they are mapped over a process pool whose results come back
in submission order; the output never depends on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .drc import DrcViolation, attribute, check_drc, normalize_ignore
from .formats import emit_def, emit_verilog
from .geometry import Rect
from .report import (TestcellResult, collect_metrics, histogram_csv, metrics_csv, per_cell_csv,
                     render_summary, summary_csv, width_histogram)
from .router import RouteConfig, build_grid, extract_connectivity, plan_straps, route
from .techlib import (CellMaster, LibraryProfile, TechRules, parse_library, profile_library,
                      scale_rules, serialize_library)
from .testgen import METHODS, MODES, STRATEGIES, TestcellSpec, assign_connectivity, enumerate_testcells

log = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_FAILURE = 1
EXIT_VIOLATIONS = 2
MANIFEST = "manifest.csv"
TESTCELL_DIR = "testcells"


@dataclass(frozen=True)
class RunConfig:
    library_path: str
    method: str = "proposed"
    mode: str = "all"
    connectivity: str = "aligned"
    seed: int = 0
    straps: bool = False
    margin_scale: Fraction = Fraction(1)
    workers: int = 1
    out_dir: str = "pinaccess_out"
    ignore: tuple[str, ...] = ()
    max_iterations: int = 20
    incremental: bool = False
    dump_routes: bool = False

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.connectivity not in STRATEGIES:
            raise ValueError(f"unknown connectivity {self.connectivity!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if Fraction(self.margin_scale) < 1:
            raise ValueError("margin_scale must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        normalize_ignore(self.ignore)


@dataclass
class Plan:
    rules: TechRules
    cells: dict[str, CellMaster]
    profile: LibraryProfile
    specs: list[TestcellSpec]
    hashes: dict[str, str] = field(default_factory=dict)


# --------------------------------------------------------------------------- planning


def _config_key(config: RunConfig) -> str:
    return "|".join(str(x) for x in (config.method, config.mode, config.connectivity, config.seed,
                                     config.straps, Fraction(config.margin_scale),
                                     sorted(normalize_ignore(config.ignore)), config.max_iterations))


def testcell_hash(spec: TestcellSpec, cells, rules: TechRules, config: RunConfig) -> str:
    """Digest of everything one testcell's result depends on."""
    h = hashlib.sha256()
    h.update(_config_key(config).encode())
    h.update(serialize_library(rules, [cells[m] for m in spec.masters]).encode())
    h.update(repr((spec.id, spec.instances, spec.die_area, spec.nets)).encode())
    return h.hexdigest()


def prepare(config: RunConfig, library_text: Optional[str] = None) -> Plan:
    if library_text is None:
        library_text = Path(config.library_path).read_text()
    rules, cell_list = parse_library(library_text)
    profile = profile_library(cell_list)
    cells = profile.by_name
    specs = [assign_connectivity(s, cells, config.connectivity, config.seed)
             for s in enumerate_testcells(profile, rules, config.method, config.mode)]
    specs.sort(key=lambda s: s.id)
    hashes = {s.id: testcell_hash(s, cells, rules, config) for s in specs}
    return Plan(rules, cells, profile, specs, hashes)


def read_manifest(path: Path) -> dict[str, str]:
    rows = list(csv.reader(io.StringIO(path.read_text())))
    if not rows or rows[0] != ["testcell_id", "input_hash"]:
        raise ValueError("manifest header missing")
    out = {}
    for row in rows[1:]:
        if len(row) != 2 or len(row[1]) != 64:
            raise ValueError(f"malformed manifest row {row!r}")
        out[row[0]] = row[1]
    return out


def write_manifest(hashes: dict[str, str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["testcell_id", "input_hash"])
    for tid in sorted(hashes):
        writer.writerow([tid, hashes[tid]])
    return buf.getvalue()


def incremental_scope(config: RunConfig, manifest: Optional[Path] = None,
                      plan: Optional[Plan] = None) -> list[str]:
    """Ids of testcells whose inputs differ from the previous run's manifest.

    A missing manifest means a cold start; a corrupt one is reported and
    treated the same way.
    """
    plan = plan or prepare(config)
    manifest = manifest if manifest is not None else Path(config.out_dir) / MANIFEST
    if not manifest.exists():
        return [s.id for s in plan.specs]
    try:
        previous = read_manifest(manifest)
    except (ValueError, OSError, csv.Error) as exc:
        log.warning("ignoring corrupt manifest %s (%s); running everything", manifest, exc)
        return [s.id for s in plan.specs]
    out_dir = manifest.parent / TESTCELL_DIR
    return [s.id for s in plan.specs
            if previous.get(s.id) != plan.hashes[s.id] or not (out_dir / f"{s.id}.drc").exists()]


# --------------------------------------------------------------------------- per-testcell work


def violation_lines(violations: Sequence[DrcViolation]) -> str:
    lines = []
    for v in violations:
        m = v.marker
        lines.append("\t".join([v.rule, v.layer, str(m.x1), str(m.y1), str(m.x2), str(m.y2),
                                ",".join(v.nets), ",".join(v.masters)]))
    return "".join(line + "\n" for line in lines)


def parse_violation_lines(text: str) -> tuple[DrcViolation, ...]:
    out = []
    for line in text.splitlines():
        parts = line.split("\t")
        if len(parts) != 8:
            raise ValueError(f"malformed violation record {line!r}")
        rule, layer, x1, y1, x2, y2, nets, masters = parts
        out.append(DrcViolation(rule, layer, Rect(int(x1), int(y1), int(x2), int(y2)),
                                tuple(n for n in nets.split(",") if n),
                                tuple(n for n in masters.split(",") if n)))
    return tuple(out)


@dataclass(frozen=True)
class _Job:
    spec: TestcellSpec
    cells: dict
    rules: TechRules
    drc_rules: TechRules
    seed: int
    straps: bool
    ignore: frozenset
    max_iterations: int


@dataclass(frozen=True)
class TestcellOutput:
    id: str
    verilog: str
    def_text: str
    routes: str
    violations: tuple[DrcViolation, ...]

    __test__ = False


def process_testcell(job: _Job) -> TestcellOutput:
    spec, cells, rules = job.spec, job.cells, job.rules
    verilog = emit_verilog(spec, cells)
    def_text = emit_def(spec, cells, rules)
    plan = plan_straps(spec.die_area, rules, job.seed, job.straps, spec.id)
    grid = build_grid(spec, cells, rules, plan)
    db = route(spec, grid, rules, RouteConfig(max_iterations=job.max_iterations))
    verdicts = extract_connectivity(db).verdicts
    if verdicts != db.statuses():
        raise RuntimeError(f"{spec.id}: router bookkeeping disagrees with extracted connectivity")
    found = check_drc(spec, db, cells, job.drc_rules, job.ignore)
    violations = tuple(attribute(found, spec, cells, rules))
    return TestcellOutput(spec.id, verilog, def_text, db.dump(), violations)


def _map(jobs: list[_Job], workers: int) -> list[TestcellOutput]:
    if workers <= 1 or len(jobs) <= 1:
        return [process_testcell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(process_testcell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# --------------------------------------------------------------------------- run


@dataclass
class RunResult:
    exit_code: int
    results: list[TestcellResult]
    summary_text: str
    executed: list[str]
    cells_with_violations: int


def _write(path: Path, text: str) -> int:
    data = text.encode()
    if not path.exists() or path.read_bytes() != data:
        path.write_bytes(data)
    return len(data)


def run_pipeline(config: RunConfig, library_text: Optional[str] = None) -> RunResult:
    """Run every phase and write the artifacts; see the module docstring."""
    config.validate()
    started = time.perf_counter()
    plan = prepare(config, library_text)
    out = Path(config.out_dir)
    tdir = out / TESTCELL_DIR
    tdir.mkdir(parents=True, exist_ok=True)

    todo = {s.id for s in plan.specs}
    if config.incremental:
        todo = set(incremental_scope(config, out / MANIFEST, plan))
    drc_rules = scale_rules(plan.rules, Fraction(config.margin_scale))
    ignore = normalize_ignore(config.ignore)
    jobs = []
    for spec in plan.specs:
        if spec.id in todo:
            cells = {m: plan.cells[m] for m in spec.masters}
            jobs.append(_Job(spec, cells, plan.rules, drc_rules, config.seed, config.straps, ignore,
                             config.max_iterations))
    outputs = {o.id: o for o in _map(jobs, config.workers)}

    results = []
    output_bytes = 0
    for spec in plan.specs:
        if spec.id in outputs:
            o = outputs[spec.id]
            output_bytes += _write(tdir / f"{spec.id}.v", o.verilog)
            output_bytes += _write(tdir / f"{spec.id}.def", o.def_text)
            _write(tdir / f"{spec.id}.drc", violation_lines(o.violations))
            if config.dump_routes:
                _write(tdir / f"{spec.id}.routes", o.routes)
            violations = o.violations
        else:
            violations = parse_violation_lines((tdir / f"{spec.id}.drc").read_text())
            output_bytes += (tdir / f"{spec.id}.v").stat().st_size + (tdir / f"{spec.id}.def").stat().st_size
        results.append(TestcellResult(spec.id, violations))

    elapsed = time.perf_counter() - started
    summary = collect_metrics(results, elapsed, output_bytes, len(plan.profile))
    text = render_summary(results)
    _write(out / "summary.txt", text)
    _write(out / "summary.csv", summary_csv(results))
    _write(out / "histogram.csv", histogram_csv(width_histogram(plan.profile)))
    _write(out / "per_cell.csv", per_cell_csv(summary))
    _write(out / "metrics.csv", metrics_csv(summary))
    _write(out / MANIFEST, write_manifest(plan.hashes))
    dirty = any(r.drc_count for r in results)
    log.info("%d testcells, %d run, %d with violations", len(results), len(jobs),
             sum(1 for r in results if r.drc_count))
    return RunResult(EXIT_VIOLATIONS if dirty else EXIT_CLEAN, results, text,
                     sorted(outputs), summary.cells_with_violations)


def seed_from_env(default: int = 0) -> int:
    value = os.environ.get("PINACCESS_SEED")
    return int(value, 0) if value else default

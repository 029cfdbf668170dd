"""Comparison reports and their CSV form.

Every CSV starts with the schema line ``# potentia-csv v1`` followed by one
comment line holding the resolved scenario config as JSON.  Numbers are
written with ``repr``-level precision so that identical runs give identical
bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .kernels import KernelG
from .renewal import RenewalSolution
from .simulator import EstimateCI

SCHEMA = "# potentia-csv v1"

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_VALIDITY = 3


@dataclass
class Gate:
    name: str
    value: float
    threshold: str
    passed: bool
    category: str = "tolerance"  # or "validity"
    reason: str = ""
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        if not self.passed and not self.reason:
            self.reason = f"{self.name}_failed"


@dataclass
class Row:
    """One abscissa of a scenario: the three methods side by side."""

    t: float
    x: tuple[float, ...]
    tail: float = math.nan
    prediction: float = math.nan
    renewal: float = math.nan
    mc: float = math.nan
    mc_stderr: float = math.nan
    reference: float = math.nan
    status: str = "info"
    reason: str = ""
    series: str = ""

    def fail(self, reason: str) -> None:
        self.status, self.reason = "fail", reason

    def ok(self) -> None:
        if self.status != "fail":
            self.status = "pass"


RATIOS = (
    ("ratio_renewal_prediction", "renewal", "prediction"),
    ("ratio_mc_prediction", "mc", "prediction"),
    ("ratio_mc_renewal", "mc", "renewal"),
    ("ratio_renewal_tail", "renewal", "tail"),
    ("ratio_mc_tail", "mc", "tail"),
    ("ratio_prediction_tail", "prediction", "tail"),
    ("ratio_mc_reference", "mc", "reference"),
)

ROW_COLUMNS = ["series", "t", "x", "tail", "prediction", "renewal", "mc", "mc_stderr", "reference",
               *[r[0] for r in RATIOS], "status", "reason"]


def _ratio(a: float, b: float) -> float:
    if not (math.isfinite(a) and math.isfinite(b)) or b == 0:
        return math.nan
    return a / b


def fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return ";".join(fmt(float(e)) for e in v)
    try:
        return fmt(float(v))
    except (TypeError, ValueError):
        return str(v)


@dataclass
class ComparisonReport:
    scenario: str
    config: dict
    rows: list[Row] = field(default_factory=list)
    gates: list[Gate] = field(default_factory=list)
    estimates: list[tuple[str, EstimateCI]] = field(default_factory=list)
    solutions: dict[str, RenewalSolution] = field(default_factory=dict)
    kernel: KernelG | None = None
    tables: dict[str, tuple[list[str], list[list[Any]]]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def gate(self, name: str, value: float, threshold: str, passed: bool, category: str = "tolerance",
             reason: str = "", detail: str = "") -> Gate:
        g = Gate(name, float(value), threshold, passed, category, reason, detail)
        self.gates.append(g)
        return g

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    @property
    def exit_code(self) -> int:
        if any(not g.passed and g.category == "validity" for g in self.gates):
            return EXIT_VALIDITY
        if any(not g.passed for g in self.gates):
            return EXIT_TOLERANCE
        return EXIT_PASS

    def failed(self) -> list[Gate]:
        return [g for g in self.gates if not g.passed]

    def summary(self) -> str:
        lines = [f"scenario {self.scenario}: {'PASS' if self.passed else 'FAIL'}"]
        for g in self.gates:
            mark = "ok  " if g.passed else "FAIL"
            extra = f" [{g.reason}]" if not g.passed else ""
            lines.append(f"  {mark} {g.name}: {g.value:.6g} ({g.threshold}){extra}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


# ---------------------------------------------------------------- writing


def _header(config: dict, extra: dict | None = None) -> str:
    meta = dict(config)
    if extra:
        meta = {**meta, "table": extra}
    return SCHEMA + "\n# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def _table(config: dict, columns: Sequence[str], rows: Sequence[Sequence[Any]], name: str) -> str:
    buf = io.StringIO()
    buf.write(_header(config, {"name": name}))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def report_rows(report: ComparisonReport) -> list[list[Any]]:
    out = []
    for r in report.rows:
        ratios = [_ratio(getattr(r, a), getattr(r, b)) for _, a, b in RATIOS]
        out.append([r.series, r.t, r.x, r.tail, r.prediction, r.renewal, r.mc, r.mc_stderr, r.reference,
                    *ratios, r.status, r.reason])
    return out


def render(report: ComparisonReport) -> dict[str, str]:
    """File name to CSV text for every artifact of ``report``."""
    cfg = report.config
    files = {
        "report.csv": _table(cfg, ROW_COLUMNS, report_rows(report), "report"),
        "gates.csv": _table(cfg, ["gate", "value", "threshold", "passed", "category", "reason", "detail"],
                            [[g.name, g.value, g.threshold, g.passed, g.category, g.reason, g.detail]
                             for g in report.gates], "gates"),
    }
    if report.estimates:
        files["mc.csv"] = _table(
            cfg, ["scenario", "x", "estimator", "estimate", "stderr", "n_paths", "horizon",
                  "bias_proxy", "seed", "label"],
            [[report.scenario, e.x, e.kind, e.estimate, e.stderr, e.n_paths, e.horizon,
              e.bias_proxy, e.seed, label] for label, e in report.estimates], "mc")
    for name, sol in report.solutions.items():
        files[f"renewal_{name}.csv"] = sol.to_csv({"scenario": report.scenario, "config": cfg})
    if report.kernel is not None:
        files["kernel.csv"] = report.kernel.to_csv()
    for name, (cols, rows) in report.tables.items():
        files[f"{name}.csv"] = _table(cfg, cols, rows, name)
    return files


def write_report(report: ComparisonReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in render(report).items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths


# ---------------------------------------------------------------- reading


@dataclass(frozen=True)
class CsvTable:
    meta: dict
    columns: list[str]
    rows: list[dict[str, str]]

    def column(self, name: str) -> list[float]:
        out = []
        for r in self.rows:
            try:
                out.append(float(r[name]))
            except (KeyError, ValueError):
                out.append(math.nan)
        return out


def read_csv(path: str | Path) -> CsvTable:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != SCHEMA:
        raise ValueError(f"{path}: missing schema line '{SCHEMA}'")
    meta: dict = {}
    body_start = 1
    while body_start < len(text) and text[body_start].startswith("#"):
        line = text[body_start][1:].strip()
        if line.startswith("{"):
            meta = json.loads(line)
        body_start += 1
    reader = csv.DictReader(text[body_start:])
    rows = list(reader)
    return CsvTable(meta, list(reader.fieldnames or []), rows)

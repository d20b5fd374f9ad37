"""Report assembly and serialization (CSV and JSON)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from . import __version__

CSV_COLUMNS = ("suite", "case_id", "model", "params", "lhs", "rhs", "margin", "tol", "pass")
SUITE_ORDER = ("lemmas", "thm1", "decomp", "thm2", "thm3", "linearize", "bl", "bl-quant", "poincare")


def num(v) -> str:
    """17 significant digits; exact round trip for doubles."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _jsonable(v):
    if isinstance(v, float):
        return v if math.isfinite(v) else num(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):  # numpy scalars
        return _jsonable(v.item())
    return v


def _order(rec):
    s = SUITE_ORDER.index(rec.suite) if rec.suite in SUITE_ORDER else len(SUITE_ORDER)
    return (s, rec.suite, rec.case_id)


@dataclass
class VerificationReport:
    config: dict
    records: list = field(default_factory=list)
    complete: bool = True
    error: str = ""
    version: str = __version__

    def add(self, recs) -> None:
        self.records.extend(recs)
        self.records.sort(key=_order)

    @property
    def passed(self) -> bool:
        return self.complete and all(r.passed for r in self.records)

    def summary(self) -> dict:
        out = {}
        for r in self.records:
            s = out.setdefault(r.suite, {"cases": 0, "passed": 0, "worst_margin": math.inf})
            s["cases"] += 1
            s["passed"] += int(r.passed)
            m = r.margin
            if not math.isnan(m):
                s["worst_margin"] = min(s["worst_margin"], m)
        return out

    def to_dict(self) -> dict:
        recs = []
        for r in self.records:
            recs.append({"suite": r.suite, "case_id": r.case_id, "model": r.model,
                         "params": r.params, "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin,
                         "tol": r.tol, "pass": r.passed, "extra": r.extra, "runtime": r.runtime})
        return _jsonable({"tool": "convex_transport", "version": self.version, "config": self.config,
                          "complete": self.complete, "error": self.error, "records": recs,
                          "summary": self.summary()})


def emit_table(report: VerificationReport, fmt: str = "json", path=None) -> str:
    """Serialize the report; write it to ``path`` when given.  Returns the text."""
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=1, sort_keys=False) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.records:
            params = json.dumps(_jsonable(r.params), sort_keys=True)
            w.writerow([r.suite, r.case_id, r.model, params, num(r.lhs), num(r.rhs), num(r.margin),
                        num(r.tol), "true" if r.passed else "false"])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text

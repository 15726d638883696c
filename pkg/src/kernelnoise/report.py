"""Check reports and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .stats import SE_BAND, ComplexMCEstimate, MCEstimate

COLUMNS = ("case", "exact", "estimate", "std_error", "tolerance", "pass")

REPORT_SCHEMA = {
    "type": "object",
    "required": ["meta", "rows"],
    "additionalProperties": False,
    "properties": {
        "meta": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": list(COLUMNS),
                "properties": {
                    "case": {"type": "string"},
                    "exact": {"type": ["number", "null"]},
                    "estimate": {"type": ["number", "null"]},
                    "std_error": {"type": ["number", "null"]},
                    "tolerance": {"type": "number", "minimum": 0},
                    "pass": {"type": "boolean"},
                },
            },
        },
        "extra": {"type": "object"},
    },
}


@dataclass
class Row:
    case: str
    exact: float | None
    estimate: float | None
    std_error: float | None
    tolerance: float
    passed: bool

    @classmethod
    def check(cls, case, exact, estimate, tolerance) -> "Row":
        ok = _finite(exact, estimate) and abs(estimate - exact) <= tolerance
        return cls(case, float(exact), float(estimate), None, float(tolerance), bool(ok))

    @classmethod
    def at_most(cls, case, value, bound) -> "Row":
        """One-sided ``value <= bound``; reported as the excess over ``bound``."""
        excess = max(float(value) - float(bound), 0.0) if math.isfinite(value) else math.inf
        return cls(case, 0.0, excess, None, 0.0, excess <= 0.0)

    @classmethod
    def small(cls, case, value, tolerance) -> "Row":
        """One-sided check of a nonnegative gap; negative values clamp to 0."""
        v = max(float(value), 0.0) if math.isfinite(value) else math.inf
        return cls(case, 0.0, v, None, float(tolerance), v <= tolerance)

    @classmethod
    def mc(cls, case, est: MCEstimate, k: float = SE_BAND) -> "Row":
        tol = k * est.std_error
        ok = _finite(est.estimate, est.reference) and abs(est.estimate - est.reference) <= tol
        return cls(case, float(est.reference), float(est.estimate),
                   float(est.std_error), float(tol), bool(ok))

    @classmethod
    def mc_complex(cls, case, est: ComplexMCEstimate, k: float = SE_BAND) -> list["Row"]:
        re = MCEstimate(est.estimate.real, est.se_real, est.reference.real, est.n)
        im = MCEstimate(est.estimate.imag, est.se_imag, est.reference.imag, est.n)
        return [cls.mc(f"{case}.re", re, k), cls.mc(f"{case}.im", im, k)]

    @classmethod
    def failed(cls, case, message: str = "") -> "Row":
        return cls(case + (f" [{message}]" if message else ""), None, None, None, 0.0, False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for k in ("exact", "estimate", "std_error"):
            if d[k] is not None and not math.isfinite(d[k]):
                d[k] = None
        return d


def _finite(*vals) -> bool:
    return all(v is not None and math.isfinite(v) for v in vals)


@dataclass
class Report:
    command: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, row):
        if isinstance(row, list):
            self.rows.extend(row)
        else:
            self.rows.append(row)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_json_obj(self) -> dict:
        obj = {"meta": dict(self.meta, command=self.command),
               "rows": [r.as_dict() for r in self.rows]}
        if self.extra:
            obj["extra"] = self.extra
        return obj

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in sorted(dict(self.meta, command=self.command).items()):
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            d = r.as_dict()
            w.writerow([_fmt(d[c]) for c in COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def validate_report(obj: dict):
    jsonschema.validate(obj, REPORT_SCHEMA)


def emit(report: Report, fmt: str = "csv", path=None) -> str:
    """Serialize a report; write it to ``path`` when given.

    The body carries no timestamps, so identical runs give identical bytes.
    """
    if fmt == "csv":
        text = report.to_csv()
    elif fmt == "json":
        obj = report.to_json_obj()
        validate_report(obj)
        text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False,
                          default=_json_default) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def _json_default(o):
    import numpy as np

    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")

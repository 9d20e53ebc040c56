"""Result records and their JSONL / CSV serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

RECORD_COLUMNS = [
    "experiment", "metric", "analytic", "empirical", "se", "p_value",
    "tol_kind", "tol_value", "passed",
]
COMPARISON_COLUMNS = ["experiment", "metric", "x", "analytic", "empirical", "se", "lower", "upper"]
TOL_KINDS = ("sigma", "p_value", "abs", "rel", "upper")


def module_versions() -> dict:
    out = {}
    for name in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


@dataclass
class ResultRecord:
    """One analytic-versus-empirical comparison.

    ``tol_kind`` is ``"sigma"`` (``|analytic - empirical| <= tol_value * se``),
    ``"p_value"`` (``p_value > tol_value``), ``"abs"``, ``"rel"`` or
    ``"upper"`` (``empirical <= tol_value``, no analytic value); records
    without a tolerance are informational and carry ``passed = None``.
    """

    experiment: str
    metric: str
    analytic: float | None
    empirical: float | None
    se: float | None = None
    p_value: float | None = None
    tol_kind: str | None = None
    tol_value: float | None = None
    passed: bool | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("analytic", "empirical", "se", "p_value", "tol_value"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, float(val))
        if self.tol_kind is None:
            self.passed = None
            return
        if self.tol_kind not in TOL_KINDS:
            raise ValueError(f"unknown tolerance kind {self.tol_kind!r}")
        self.passed = self._evaluate()
        self.provenance = {**self.provenance, "tolerance": {self.tol_kind: self.tol_value}}

    def _evaluate(self) -> bool:
        tol = self.tol_value
        if self.tol_kind == "p_value":
            return bool(self.p_value is not None and self.p_value > tol)
        if self.tol_kind == "upper":
            return bool(self.empirical is not None and self.empirical <= tol)
        if self.analytic is None or self.empirical is None:
            return False
        diff = abs(self.analytic - self.empirical)
        if math.isnan(diff):
            return False
        if self.tol_kind == "sigma":
            return bool(self.se is not None and diff <= tol * self.se)
        if self.tol_kind == "abs":
            return bool(diff <= tol)
        return bool(diff <= tol * abs(self.analytic))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        d = dict(d)
        passed = d.pop("passed", None)
        rec = cls(**d)
        if rec.tol_kind is None:
            rec.passed = passed
        return rec

    def summary(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]
        parts = [f"[{status}] {self.experiment}: {self.metric}"]
        if self.analytic is not None:
            parts.append(f"analytic={self.analytic:.6g}")
        if self.empirical is not None:
            parts.append(f"empirical={self.empirical:.6g}")
        if self.se is not None:
            parts.append(f"se={self.se:.3g}")
        if self.p_value is not None:
            parts.append(f"p={self.p_value:.3g}")
        if self.tol_kind is not None:
            parts.append(f"tol={self.tol_kind}:{self.tol_value:g}")
        return " ".join(parts)


def moment_record(experiment, metric, analytic, empirical, se, sigma=3.0, **prov) -> ResultRecord:
    return ResultRecord(experiment, metric, analytic, empirical, se=se, tol_kind="sigma",
                        tol_value=sigma, provenance=prov)


def pvalue_record(experiment, metric, statistic, p_value, threshold=0.01, **prov) -> ResultRecord:
    return ResultRecord(experiment, metric, None, statistic, p_value=p_value, tol_kind="p_value",
                        tol_value=threshold, provenance=prov)


def abs_record(experiment, metric, analytic, empirical, tol, **prov) -> ResultRecord:
    return ResultRecord(experiment, metric, analytic, empirical, tol_kind="abs", tol_value=tol,
                        provenance=prov)


def rel_record(experiment, metric, analytic, empirical, tol, **prov) -> ResultRecord:
    return ResultRecord(experiment, metric, analytic, empirical, tol_kind="rel", tol_value=tol,
                        provenance=prov)


def info_record(experiment, metric, analytic=None, empirical=None, se=None, **prov) -> ResultRecord:
    return ResultRecord(experiment, metric, analytic, empirical, se=se, provenance=prov)


def all_passed(records) -> bool:
    """True iff every record with a declared tolerance passed."""
    return all(r.passed for r in records if r.tol_kind is not None)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, np.generic):
        return x.item()
    return x


def emit_results(records, out_dir, stem: str = "results", comparisons=None) -> dict:
    """Write ``<stem>.jsonl``, ``<stem>_summary.csv`` and ``<stem>_comparison.csv``.

    ``comparisons`` is a list of dicts with the ``COMPARISON_COLUMNS`` keys
    (``t`` or ``s`` in ``x``, error band ``empirical +- 3 se``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "jsonl": out / f"{stem}.jsonl",
        "summary": out / f"{stem}_summary.csv",
        "comparison": out / f"{stem}_comparison.csv",
    }
    with open(paths["jsonl"], "w") as fh:
        for r in records:
            fh.write(json.dumps(_jsonable(r.to_dict()), sort_keys=True) + "\n")
    with open(paths["summary"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            d = r.to_dict()
            w.writerow(["" if d[c] is None else d[c] for c in RECORD_COLUMNS])
    with open(paths["comparison"], "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COMPARISON_COLUMNS)
        w.writeheader()
        for row in comparisons or []:
            w.writerow({c: row.get(c, "") for c in COMPARISON_COLUMNS})
    return paths


def read_jsonl(path) -> list[ResultRecord]:
    with open(path) as fh:
        return [ResultRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def comparison_row(experiment, metric, x, analytic, empirical, se, sigma=3.0) -> dict:
    se = 0.0 if se is None else float(se)
    return {
        "experiment": experiment, "metric": metric, "x": float(x),
        "analytic": float(analytic), "empirical": float(empirical), "se": se,
        "lower": float(empirical) - sigma * se, "upper": float(empirical) + sigma * se,
    }

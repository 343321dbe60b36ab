"""Evaluation reports: uniquely keyed metric rows plus a provenance block.

A row is keyed by (task, snr_db, separator, router, alpha); duplicate keys
are a bug and rejected. Reports serialize to JSON lines (provenance first)
and render as a text grid with one column per SNR, so conditions across the
noise range sit side by side.
"""

from __future__ import annotations

import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

PathLike = Union[str, Path]

RowKey = tuple[str, float, str, str, float]


@dataclass(frozen=True)
class ReportRow:
    task: str
    snr_db: float
    separator: str
    router: str
    alpha: float
    metrics: dict
    n_items: int = 0
    n_excluded: int = 0

    @property
    def key(self) -> RowKey:
        return (self.task, self.snr_db, self.separator, self.router, self.alpha)

    def to_obj(self) -> dict:
        return {
            "task": self.task,
            "snr_db": "inf" if math.isinf(self.snr_db) else self.snr_db,
            "separator": self.separator,
            "router": self.router,
            "alpha": self.alpha,
            "metrics": {
                k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in sorted(self.metrics.items())
            },
            "n_items": self.n_items,
            "n_excluded": self.n_excluded,
        }


@dataclass
class EvalReport:
    provenance: dict
    rows: list = field(default_factory=list)
    _keys: set = field(default_factory=set, repr=False)

    def add_row(self, row: ReportRow) -> None:
        if row.key in self._keys:
            raise ValueError(f"duplicate report row key {row.key}")
        self._keys.add(row.key)
        self.rows.append(row)

    def write_jsonl(self, path: PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                json.dumps({"provenance": self.provenance}, sort_keys=True) + "\n"
            )
            for row in sorted(self.rows, key=lambda r: _sort_key(r)):
                fh.write(json.dumps(row.to_obj(), sort_keys=True) + "\n")

    def render_text(self) -> str:
        """One grid per (task, metric): SNR columns, condition rows."""
        if not self.rows:
            return "(no rows)\n"
        snrs = sorted({r.snr_db for r in self.rows}, reverse=True)
        lines = []
        tasks = sorted({r.task for r in self.rows})
        for task in tasks:
            task_rows = [r for r in self.rows if r.task == task]
            metrics = sorted({m for r in task_rows for m in r.metrics})
            conds = sorted({(r.separator, r.router, r.alpha) for r in task_rows})
            for metric in metrics:
                lines.append(f"[{task}] {metric}")
                header = f"{'condition':<34}" + "".join(
                    f"{_fmt_snr(s):>9}" for s in snrs
                )
                lines.append(header)
                for sep, router, alpha in conds:
                    by_snr = {
                        r.snr_db: r
                        for r in task_rows
                        if (r.separator, r.router, r.alpha) == (sep, router, alpha)
                    }
                    cells = []
                    for s in snrs:
                        row = by_snr.get(s)
                        v = row.metrics.get(metric) if row else None
                        cells.append(f"{_fmt_val(v):>9}")
                    label = f"{sep}/{router} a={alpha:g}"
                    lines.append(f"{label:<34}" + "".join(cells))
                lines.append("")
        return "\n".join(lines) + "\n"


def _sort_key(row: ReportRow):
    snr = row.snr_db if math.isfinite(row.snr_db) else 1e9
    return (row.task, row.separator, row.router, row.alpha, -snr)


def _fmt_snr(snr: float) -> str:
    return "clean" if math.isinf(snr) else f"{snr:g} dB"


def _fmt_val(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.4f}"
    return str(v)


def make_provenance(config_digest: str, seed: int, extra: Optional[dict] = None) -> dict:
    import numpy
    import scipy

    from . import __version__

    prov = {
        "config_hash": config_digest,
        "seed": seed,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }
    if extra:
        prov.update(extra)
    return prov


def read_report_jsonl(path: PathLike) -> EvalReport:
    provenance = {}
    rows: list[ReportRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "provenance" in obj:
                provenance = obj["provenance"]
                continue
            snr = obj["snr_db"]
            metrics = {
                k: (math.nan if v is None else v) for k, v in obj["metrics"].items()
            }
            rows.append(
                ReportRow(
                    task=obj["task"],
                    snr_db=math.inf if snr == "inf" else float(snr),
                    separator=obj["separator"],
                    router=obj["router"],
                    alpha=float(obj["alpha"]),
                    metrics=metrics,
                    n_items=int(obj.get("n_items", 0)),
                    n_excluded=int(obj.get("n_excluded", 0)),
                )
            )
    report = EvalReport(provenance=provenance)
    for r in rows:
        report.add_row(r)
    return report

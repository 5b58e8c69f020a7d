from __future__ import annotations

import csv
import io
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Sequence, Tuple

import numpy as np

from .logging_setup import write_json


logger = logging.getLogger(__name__)


OutputFormat = Literal["csv", "json"]

# Column sets are part of the output contract; change them only with a version bump.
TABLE_COLUMNS: Dict[str, Tuple[str, ...]] = {
    "weak_values": (
        "observable",
        "final_label",
        "post_selection_prob",
        "weak_value_re",
        "weak_value_im",
        "anomalous",
        "skipped",
    ),
    "quasi_probabilities": ("observable", "final_label", "eigenvalue", "q_re", "q_im"),
    "joint_quasi_distribution": ("observable", "final_label", "eigenvalue", "p_re", "p_im"),
    "conditional_uncertainty": (
        "observable",
        "final_label",
        "post_selection_prob",
        "weak_mean_re",
        "weak_mean_im",
        "weak_second_moment_re",
        "weak_second_moment_im",
        "uncertainty_re",
        "uncertainty_im",
        "imag_flagged",
    ),
    "uncertainty_budget": (
        "observable",
        "mean",
        "total_variance",
        "weak_value_variance",
        "avg_conditional_re",
        "avg_conditional_im",
        "decomposition_residual",
        "skipped",
    ),
    "identity_checks": ("check", "observable", "value", "tolerance", "passed"),
    "pointer_records": (
        "observable",
        "final_label",
        "g",
        "readout",
        "kept_shots",
        "post_selection_rate",
        "mean_reading",
        "stderr",
        "rescaled_mean",
        "rescaled_stderr",
    ),
    "extrapolation": (
        "observable",
        "final_label",
        "readout",
        "estimate",
        "ci",
        "curvature",
        "response",
        "exact",
        "within_3ci",
    ),
    "reconstruction": ("final_label", "mode", "source", "max_abs_error", "max_ci", "trace_error", "within_budget"),
    "reconstructed_matrix": ("final_label", "row", "col", "re", "im", "target_re", "target_im"),
    "basis_weak_values": ("final_label", "element", "estimate_re", "estimate_im", "ci"),
}


def format_value(v: Any) -> str:
    """Text form used in CSV cells; finite floats carry 17 significant digits."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".16e") if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if v is None:
        return ""
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass
class Table:
    name: str
    columns: Tuple[str, ...]
    rows: List[Tuple[Any, ...]] = field(default_factory=list)

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"table {self.name}: expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(tuple(_plain(v) for v in values))

    def column(self, name: str) -> List[Any]:
        idx = self.columns.index(name)
        return [r[idx] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(v) for v in r])
        return buf.getvalue()

    def to_json(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "columns": list(self.columns),
            "rows": [[_json_value(v) for v in r] for r in self.rows],
        }


def _plain(v: Any) -> Any:
    """numpy scalars to builtin bool/int/float."""
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass
class ReportBundle:
    command: str
    metadata: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, Table] = field(default_factory=dict)
    identity_passed: bool = True
    summary_lines: List[str] = field(default_factory=list)

    def table(self, name: str) -> Table:
        if name not in self.tables:
            self.tables[name] = Table(name=name, columns=TABLE_COLUMNS[name])
        return self.tables[name]

    def merge(self, other: "ReportBundle") -> None:
        for name, t in other.tables.items():
            self.table(name).rows.extend(t.rows)
        self.identity_passed = self.identity_passed and other.identity_passed
        self.summary_lines.extend(other.summary_lines)
        for k, v in other.metadata.items():
            self.metadata.setdefault(k, v)


class ReportStore:
    """Writes bundles under one output directory; one table per file plus manifest.json."""

    def __init__(self, out_dir: Path, fmt: OutputFormat = "csv"):
        self._out_dir = out_dir
        self._fmt = fmt
        self._lock = threading.Lock()

    @property
    def out_dir(self) -> Path:
        return self._out_dir

    def write(self, bundle: ReportBundle) -> List[Path]:
        with self._lock:
            return self._write_locked(bundle)

    def _write_locked(self, bundle: ReportBundle) -> List[Path]:
        self._out_dir.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []
        entries = []
        for name, t in bundle.tables.items():
            path = self._out_dir / f"{name}.{self._fmt}"
            if self._fmt == "csv":
                path.write_text(t.to_csv(), encoding="utf-8", newline="")
            else:
                write_json(path, t.to_json())
            written.append(path)
            entries.append({"name": name, "file": path.name, "columns": list(t.columns), "rows": len(t.rows)})

        manifest = {
            "command": bundle.command,
            "format": self._fmt,
            "identity_checks_passed": bundle.identity_passed,
            "metadata": bundle.metadata,
            "tables": entries,
        }
        manifest_path = self._out_dir / "manifest.json"
        write_json(manifest_path, manifest)
        written.append(manifest_path)
        logger.info("wrote %d tables to %s", len(entries), self._out_dir)
        return written


def read_csv_table(path: Path) -> Tuple[Sequence[str], List[List[str]]]:
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]

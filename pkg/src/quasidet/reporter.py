from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence

from .report_store import ReportBundle, Table


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReporterConfig:
    precision: int = 6
    max_rows: int = 40
    # tables shown on the terminal; None shows every table in the bundle
    tables: Optional[Sequence[str]] = None


class Reporter:
    """Fixed-width terminal tables. Machine-readable output goes through ReportStore instead."""

    def __init__(self, cfg: ReporterConfig = ReporterConfig()):
        self._cfg = cfg

    def cell(self, v: Any) -> str:
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            if math.isnan(v):
                return "-"
            return f"{v:.{self._cfg.precision}g}"
        return str(v)

    def render_table(self, table: Table) -> str:
        rows = table.rows[: self._cfg.max_rows]
        cells = [[self.cell(v) for v in r] for r in rows]
        widths = [len(c) for c in table.columns]
        for r in cells:
            widths = [max(w, len(c)) for w, c in zip(widths, r)]

        lines = [f"== {table.name} =="]
        lines.append("  ".join(c.ljust(w) for c, w in zip(table.columns, widths)))
        lines.append("  ".join("-" * w for w in widths))
        for r in cells:
            lines.append("  ".join(c.rjust(w) if _numeric(c) else c.ljust(w) for c, w in zip(r, widths)))
        hidden = len(table.rows) - len(rows)
        if hidden > 0:
            lines.append(f"... {hidden} more rows")
        return "\n".join(lines)

    def render_bundle(self, bundle: ReportBundle) -> str:
        names: Iterable[str] = self._cfg.tables if self._cfg.tables is not None else bundle.tables.keys()
        blocks: List[str] = []
        for name in names:
            t = bundle.tables.get(name)
            if t is not None and t.rows:
                blocks.append(self.render_table(t))
        if bundle.summary_lines:
            blocks.append("\n".join(bundle.summary_lines))
        verdict = "all identity checks passed" if bundle.identity_passed else "IDENTITY CHECK FAILED"
        blocks.append(f"[{bundle.command}] {verdict}")
        return "\n\n".join(blocks)


def _numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True

"""Time-indexed learning records and their CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

TRACE_COLUMNS = ("time_or_iter", "residual_inf", "nashconv_total", "lyapunov", "wall_ms")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


@dataclass
class LearningTrace:
    """Rows keyed by :data:`TRACE_COLUMNS`; ``constants`` are repeated as extra columns.

    ``wall_ms`` is only filled in when ``record_wall_time`` is set, so traces of
    seeded runs stay byte-identical across repeats.
    """

    rows: list[dict] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    status: str = "running"
    record_wall_time: bool = False
    info: dict = field(default_factory=dict)

    def add(self, time_or_iter, residual_inf=None, nashconv_total=None, lyapunov=None,
            wall_ms=None) -> None:
        self.rows.append({
            "time_or_iter": time_or_iter,
            "residual_inf": residual_inf,
            "nashconv_total": nashconv_total,
            "lyapunov": lyapunov,
            "wall_ms": wall_ms if self.record_wall_time else None,
        })

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def values(self, name: str) -> list[float]:
        """Non-empty entries of a column, in order."""
        return [r[name] for r in self.rows if r[name] is not None]

    @property
    def columns(self) -> tuple[str, ...]:
        return TRACE_COLUMNS + ("status",) + tuple(self.constants)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(self.columns)
            extra = [_cell(v) for v in self.constants.values()]
            for r in self.rows:
                out.writerow([_cell(r[c]) for c in TRACE_COLUMNS] + [self.status] + extra)

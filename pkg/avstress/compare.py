# avstress/compare.py
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Sequence

from rich.console import Console
from rich.table import Table

from .config import Defaults, read_json_object
from .errors import ConfigError
from .output_json import build_compare_json, compare_row

console = Console()

OutFormat = Literal["text", "csv", "json"]

COMPARE_COLUMNS = [
    "source",
    "scenario",
    "solver",
    "seed",
    "outcome",
    "calls_total",
    "calls_at_first_collision",
    "reward",
    "reward_without_noise",
]


@dataclass(frozen=True)
class LoadedSummary:
    source: str
    data: Dict[str, Any]


def _summary_path(p: Path) -> Path:
    # a run directory or the summary file itself
    return p / Defaults.summary_file_name if p.is_dir() else p


def load_summaries(refs: Sequence[str]) -> List[LoadedSummary]:
    if len(refs) == 0:
        raise ConfigError("compare needs at least two run directories or summary files")
    if len(refs) < 2:
        raise ConfigError("compare needs at least two summaries (pass the same one twice to see a single row pair)")
    out: List[LoadedSummary] = []
    for ref in refs:
        data = read_json_object(_summary_path(Path(ref)))
        if "calls_to_step" not in data or "solver" not in data:
            raise ConfigError(f"{ref}: not a run summary")
        out.append(LoadedSummary(source=ref, data=data))
    return out


def compare_rows(summaries: Sequence[LoadedSummary]) -> List[Dict[str, Any]]:
    return [compare_row(s.source, s.data) for s in summaries]


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def rows_to_csv(rows: Sequence[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r[k] is None else r[k] for k in COMPARE_COLUMNS})
    return buf.getvalue()


def render_table(rows: Sequence[Dict[str, Any]]) -> Table:
    t = Table(title="Stress-test results", show_lines=False)
    t.add_column("Source", style="bold")
    t.add_column("Scenario")
    t.add_column("Solver")
    t.add_column("Seed", justify="right")
    t.add_column("Outcome")
    t.add_column("Calls to step", justify="right")
    t.add_column("First collision", justify="right")
    t.add_column("Reward", justify="right")
    t.add_column("Reward w/o noise", justify="right")
    for r in rows:
        t.add_row(*[_fmt(r[k]) for k in COMPARE_COLUMNS])
    return t


def compare_runs(refs: Sequence[str], out_format: OutFormat = "text", csv_path: Path | None = None) -> int:
    rows = compare_rows(load_summaries(refs))
    if csv_path is not None:
        csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
    if out_format == "json":
        console.print_json(json.dumps(build_compare_json(rows)))
    elif out_format == "csv":
        console.out(rows_to_csv(rows), end="")
    else:
        console.print(render_table(rows))
    return 0

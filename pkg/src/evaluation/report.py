"""
Result tables in the published layout: per-task and combined Acc/F1 in percent.
"""
import csv
import io
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict

from src.domain.models import ALL_TASKS, TaskKind
from src.evaluation.metrics import MetricsResult

MISSING = "-"
COMBINED = "Combined"

AccuracyFormat = Literal["integer", "decimal"]


class MetricCell(BaseModel):
    """Acc/F1 pair as fractions; None renders as '-'."""
    model_config = ConfigDict(frozen=True)

    acc: Optional[float] = None
    f1: Optional[float] = None

    @classmethod
    def of(cls, result: Optional[MetricsResult]) -> "MetricCell":
        if result is None:
            return cls()
        return cls(acc=result.acc, f1=result.f1)


class ReportRow(BaseModel):
    method: str
    per_task: Dict[TaskKind, MetricCell] = {}
    combined: MetricCell = MetricCell()

    @classmethod
    def from_results(
        cls,
        method: str,
        per_task: Dict[TaskKind, Optional[MetricsResult]],
        combined: Optional[MetricsResult],
    ) -> "ReportRow":
        return cls(
            method=method,
            per_task={t: MetricCell.of(r) for t, r in per_task.items()},
            combined=MetricCell.of(combined),
        )


class ReportTable(BaseModel):
    title: str
    headers: List[str]
    rows: List[List[str]]

    def to_text(self) -> str:
        widths = [len(h) for h in self.headers]
        for row in self.rows:
            widths = [max(w, len(c)) for w, c in zip(widths, row)]

        def line(cells: Sequence[str]) -> str:
            first = cells[0].ljust(widths[0])
            rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
            return " | ".join([first] + rest).rstrip()

        rule = "-+-".join("-" * w for w in widths)
        out = [self.title, line(self.headers), rule]
        out.extend(line(r) for r in self.rows)
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.headers)
        writer.writerows(self.rows)
        return buf.getvalue()


def format_percent(value: Optional[float], decimals: int) -> str:
    if value is None:
        return MISSING
    return f"{value * 100:.{decimals}f}"


def render_report(
    rows: Sequence[ReportRow],
    title: str = "Suicidal risk assessment (Acc %, F1 %)",
    tasks: Sequence[TaskKind] = ALL_TASKS,
    accuracy_format: AccuracyFormat = "integer",
) -> ReportTable:
    """
    Render result rows as a table.

    Accuracy is printed as an integer percent or with two decimals; F1 always
    with two decimals. Missing or undefined metrics print as '-'.

    Args:
        rows: One row per method
        title: Table title
        tasks: Task column groups, in order, before the Combined group
        accuracy_format: "integer" or "decimal"

    Returns:
        ReportTable with a text and a CSV rendering
    """
    acc_decimals = 0 if accuracy_format == "integer" else 2
    groups = [t.value for t in tasks] + [COMBINED]
    headers = ["Method"]
    for g in groups:
        headers += [f"{g} Acc", f"{g} F1"]

    body = []
    for row in rows:
        cells = [row.method]
        for t in tasks:
            cell = row.per_task.get(t, MetricCell())
            cells += [format_percent(cell.acc, acc_decimals), format_percent(cell.f1, 2)]
        cells += [
            format_percent(row.combined.acc, acc_decimals),
            format_percent(row.combined.f1, 2),
        ]
        body.append(cells)

    return ReportTable(title=title, headers=headers, rows=body)


def parse_report_csv(text: str) -> Dict[str, Dict[str, Tuple[Optional[float], Optional[float]]]]:
    """
    Read the CSV twin back into fractions.

    Returns:
        method -> column group -> (acc, f1), None for '-'
    """
    reader = csv.reader(io.StringIO(text))
    headers = next(reader)
    groups = [h[: -len(" Acc")] for h in headers[1::2]]

    def value(cell: str) -> Optional[float]:
        return None if cell == MISSING else float(cell) / 100

    parsed: Dict[str, Dict[str, Tuple[Optional[float], Optional[float]]]] = {}
    for row in reader:
        parsed[row[0]] = {
            g: (value(row[1 + 2 * i]), value(row[2 + 2 * i]))
            for i, g in enumerate(groups)
        }
    return parsed


def write_report(
    table: ReportTable,
    out_dir: Union[str, Path],
    experiment_id: str,
    split: str,
) -> Tuple[Path, Path]:
    """Write <experiment_id>__<split>.report.txt and its .csv twin."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{experiment_id}__{split}.report"
    txt_path = out_dir / f"{stem}.txt"
    csv_path = out_dir / f"{stem}.csv"
    txt_path.write_text(table.to_text(), encoding="utf-8")
    csv_path.write_text(table.to_csv(), encoding="utf-8")
    return txt_path, csv_path

"""
CSV export for the Heavy Ball lab.
This module writes trajectories, recurrence solutions and policy summaries as
plot-ready CSV and parses them back.
"""
import csv
import io
import logging
import re
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence

from config import COORDINATE_FIELD_PATTERN, CSV_PRECISION, SUMMARY_FIELDS

logger = logging.getLogger(__name__)

INTEGER_COLUMNS = {"k", "iterations_to_tol", "restarts"}
TEXT_COLUMNS = {"event", "policy", "status"}


def format_value(value: Any) -> str:
    """
    Format one cell.

    Floats get CSV_PRECISION significant digits so they re-parse bit for bit;
    missing values become the empty string.
    """
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, f".{CSV_PRECISION}g")
    if hasattr(value, "item"):  # numpy scalars
        return format_value(value.item())
    return str(value)


def _cell(record, name: str) -> Any:
    match = re.match(COORDINATE_FIELD_PATTERN, name)
    if match is not None:
        return float(record.x[int(match.group(1)) - 1])
    return getattr(record, name)


def _write(header: Sequence[str], rows: Iterable[Sequence[Any]], comments: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    for line in comments:
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def trajectory_to_csv(traj, fields: Sequence[str], comments: Sequence[str] = ()) -> str:
    """
    Serialize a trajectory.

    Args:
        traj: Trajectory to write
        fields: Column names; record attributes or coordinates x1 ... xn
        comments: Lines written before the header, each prefixed with '# '

    Returns:
        CSV text
    """
    rows = ([_cell(r, name) for name in fields] for r in traj.records)
    return _write(fields, rows, comments)


def recurrence_to_csv(values: Sequence[float], comments: Sequence[str] = ()) -> str:
    """Serialize a scalar solution x_0 ... x_K as columns k, x_k."""
    return _write(("k", "x_k"), ((k, float(v)) for k, v in enumerate(values)), comments)


def summary_to_csv(rows, comments: Sequence[str] = ()) -> str:
    """Serialize policy summaries, one row per policy."""
    return _write(SUMMARY_FIELDS, ([getattr(r, name) for name in SUMMARY_FIELDS] for r in rows), comments)


def _convert(name: str, text: str) -> Any:
    if text == "":
        return None
    if name in INTEGER_COLUMNS:
        return int(text)
    if name in TEXT_COLUMNS:
        return text
    return float(text)


def parse_csv(text: str) -> List[Dict[str, Any]]:
    """
    Parse CSV written by this module; comment lines starting with '#' are skipped.

    Returns:
        One dict per row with typed values (int, float, str or None)
    """
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    reader = csv.DictReader(lines)
    rows = []
    for row in reader:
        rows.append({name: _convert(name, value) for name, value in row.items()})
    return rows


def comment_lines(text: str) -> List[str]:
    return [line[2:] if line.startswith("# ") else line[1:] for line in text.splitlines() if line.startswith("#")]


def check_trajectory_rows(rows: List[Dict[str, Any]], coordinates: Optional[List[str]] = None,
                          rel_tol: float = 1e-12) -> None:
    """
    Verify parsed trajectory rows: contiguous k from 0 and, when every
    coordinate column is present, x_norm equal to the norm of the coordinates.

    Raises:
        ValueError: On the first violated property
    """
    for i, row in enumerate(rows):
        if row.get("k") != i:
            raise ValueError(f"Row {i} has k={row.get('k')}, indices must be contiguous from 0")
        if coordinates and row.get("x_norm") is not None:
            norm = sum(row[c] ** 2 for c in coordinates) ** 0.5
            if abs(norm - row["x_norm"]) > rel_tol * max(1.0, norm):
                raise ValueError(f"Row {i}: x_norm {row['x_norm']} differs from coordinate norm {norm}")
    logger.debug(f"Checked {len(rows)} trajectory rows")

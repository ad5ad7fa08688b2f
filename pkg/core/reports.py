# core/reports.py
"""CSV and plain-text artifacts. Every file is written with LF line endings."""
import logging
import sys
import os
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

# Add project root to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from config import OUTPUT_DIR
from core.analysis import BackupDiagram, BoundReport
from core.qtd import RunRecord
from core.quantiles import QuantileTable

logger = logging.getLogger(__name__)

FIXED_POINT_COLUMNS = ["state", "i", "tau", "theta"]
RUN_COLUMNS = ["step", "state", "i", "theta"]
TD_RUN_COLUMNS = ["step", "state", "value"]
SUMMARY_COLUMNS = ["seed", "distance", "metric"]
FIELD_COLUMNS = ["coord1", "coord2", "g1", "g2"]
TRAJECTORY_COLUMNS = ["t", "state", "i", "theta"]
BACKUP_COLUMNS = ["x", "i", "source_x", "source_i", "reward", "weight"]


def ensure_output_dir(path: str = OUTPUT_DIR) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_frame(df: pd.DataFrame, path: str, header_comment: Optional[str] = None) -> str:
    with open(path, "w", encoding="utf-8", newline="") as f:
        if header_comment is not None:
            f.write(f"# {header_comment}\n")
        df.to_csv(f, index=False, lineterminator="\n")
    logger.debug("Wrote %d rows to %s", len(df), path)
    return path


def write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text if text.endswith("\n") else text + "\n")
    return path


# ---------------- Tables ----------------
def fixed_point_frame(table: QuantileTable, state_names: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(list(table.to_frame_rows(state_names)), columns=FIXED_POINT_COLUMNS)


def write_fixed_point(table: QuantileTable, state_names: Sequence[str], path: str) -> str:
    return _write_frame(fixed_point_frame(table, state_names), path)


def _table_rows(step, table: QuantileTable, state_names: Sequence[str]):
    for state, i, _, theta in table.to_frame_rows(state_names):
        yield step, state, i, theta


def run_frame(record: RunRecord, state_names: Sequence[str], steps: int) -> pd.DataFrame:
    """Snapshot rows, followed by the final table unless it was already snapshotted at `steps`."""
    rows: List[tuple] = []
    for step, table in record.snapshots:
        rows.extend(_table_rows(step, table, state_names))
    if not record.snapshots or record.snapshots[-1][0] != steps:
        rows.extend(_table_rows(steps, record.final, state_names))
    return pd.DataFrame(rows, columns=RUN_COLUMNS)


def write_run(record: RunRecord, state_names: Sequence[str], steps: int, path: str) -> str:
    return _write_frame(run_frame(record, state_names, steps), path, header_comment=f"seed={record.seed}")


def write_td_run(history: Sequence[Tuple[int, np.ndarray]], final: np.ndarray, state_names: Sequence[str],
                 steps: int, seed: int, path: str) -> str:
    points = list(history)
    if not points or points[-1][0] != steps:
        points.append((steps, final))
    rows = [(step, state_names[x], float(values[x])) for step, values in points for x in range(len(state_names))]
    return _write_frame(pd.DataFrame(rows, columns=TD_RUN_COLUMNS), path, header_comment=f"seed={seed}")


def write_summary(rows: Iterable[Tuple[int, float, str]], path: str) -> str:
    df = pd.DataFrame(list(rows), columns=SUMMARY_COLUMNS).sort_values("seed", kind="stable")
    return _write_frame(df, path)


def write_field(field: np.ndarray, path: str) -> str:
    return _write_frame(pd.DataFrame(np.asarray(field, dtype=float).reshape(-1, 4), columns=FIELD_COLUMNS), path)


def write_trajectory(trajectory: Sequence[Tuple[float, QuantileTable]], state_names: Sequence[str],
                     path: str) -> str:
    rows = [row for t, table in trajectory for row in _table_rows(t, table, state_names)]
    return _write_frame(pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS), path)


def write_backup(diagram: BackupDiagram, path: str) -> str:
    df = pd.DataFrame(list(diagram.rows()), columns=BACKUP_COLUMNS)
    # Nullable integers keep unresolved rows blank without turning source_i into floats.
    df["source_i"] = df["source_i"].astype("Int64")
    return _write_frame(df, path)


def write_bound(report: BoundReport, path: str) -> str:
    """Writes the report as text at path and as a one-row CSV next to it."""
    _write_frame(report.to_frame(), os.path.splitext(path)[0] + ".csv")
    return write_text(path, report.to_text())

"""
Writers for the report files (deterministic CSV tables and sorted JSON) and the numeric CSV reader.
"""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def normalize_value(value):
    """Convert pandas/numpy values (recursively) into plain Python for JSON."""
    if isinstance(value, dict):
        return {str(k): normalize_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize_value(v) for v in value]
    if isinstance(value, np.ndarray):
        return [normalize_value(v) for v in value.tolist()]
    if isinstance(value, pd.DataFrame):
        return [normalize_record(r) for r in value.to_dict(orient="records")]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(np.real(value)), "im": float(np.imag(value))}
    if hasattr(value, "item"):  # numpy scalars
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def normalize_record(record: dict) -> dict:
    """Convert one record of pandas/numpy types into plain Python."""
    out = {}
    for k, v in record.items():
        if v is not None and not isinstance(v, (list, tuple, dict, np.ndarray)) and pd.isna(v):
            out[k] = None
        else:
            out[k] = normalize_value(v)
    return out


def write_csv(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def read_numeric_csv(path, n_columns: int) -> pd.DataFrame:
    """
    First ``n_columns`` numeric columns of a CSV, parsed back to the exact doubles written.

    A non-numeric first row is taken as the header; ``#`` starts a comment and rows
    with a non-numeric cell are dropped.
    """
    first = pd.read_csv(path, header=None, comment="#", nrows=1, dtype=str)
    header = 0 if pd.to_numeric(first.iloc[0, :n_columns], errors="coerce").isna().any() else None
    df = pd.read_csv(path, header=header, comment="#", float_precision="round_trip")
    return df.iloc[:, :n_columns].apply(pd.to_numeric, errors="coerce").dropna()


def dumps_report(report: dict) -> str:
    return json.dumps(normalize_value(report), indent=2, sort_keys=True) + "\n"


def write_json(report: dict, path) -> Path:
    """
    Write a JSON report with sorted keys.

    Args:
        report (dict): report content, may contain numpy values.
        path (str | Path): destination file.

    Returns:
        Path: the written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(dumps_report(report), encoding="utf-8")
    except Exception as e:
        logger.error(f"Failed to write report {path}: {e}")
        raise
    logger.info(f"Wrote report {path}")
    return path


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)

"""
Tabular reports. CSV is canonical; every table gets a JSON mirror and a
leading config_hash column. Floats are written with a fixed format so
identical runs produce identical bytes.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def to_frame(rows: Iterable[Mapping], config_hash: str) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    if "config_hash" in frame.columns:
        frame = frame.drop(columns=["config_hash"])
    frame.insert(0, "config_hash", config_hash)
    return frame


def write_table(rows: Iterable[Mapping], csv_path: str | Path, config_hash: str, json_mirror: bool = True) -> Path:
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    frame = to_frame(rows, config_hash)
    frame.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if json_mirror:
        frame.to_json(csv_path.with_suffix(".json"), orient="records", indent=2, double_precision=10)
    logger.debug("Wrote %d rows to %s", len(frame), csv_path)
    return csv_path


def read_table(csv_path: str | Path) -> pd.DataFrame:
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"report not found: {csv_path}")
    return pd.read_csv(csv_path)


def summary(values: Sequence[float]) -> Dict[str, float]:
    """Mean, standard error and sample count of one metric."""
    arr = np.asarray(values, dtype=np.float64)
    n = int(arr.size)
    if n == 0:
        return {"value": math.nan, "stderr": math.nan, "n": 0}
    stderr = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return {"value": float(arr.mean()), "stderr": stderr, "n": n}


def paired_test(a: Sequence[float], b: Sequence[float]) -> Dict[str, Optional[float]]:
    """Paired t-test of a against b on the same personas."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        return {"mean_diff": None, "t_statistic": None, "p_value": None, "n": int(a.size)}
    diff = a - b
    if np.allclose(diff, diff[0]):
        # zero-variance differences: the statistic is undefined
        return {"mean_diff": float(diff.mean()), "t_statistic": None, "p_value": None, "n": int(a.size)}
    result = stats.ttest_rel(a, b)
    return {
        "mean_diff": float(diff.mean()),
        "t_statistic": float(result.statistic),
        "p_value": float(result.pvalue),
        "n": int(a.size),
    }


def curve_rows(curve: List[Dict[str, float]], model: str) -> List[Dict[str, float]]:
    return [{"model": model, **row} for row in curve]

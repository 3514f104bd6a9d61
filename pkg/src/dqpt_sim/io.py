"""Deterministic CSV and JSON writers."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import ObservableSeries, PhaseDiagram
from .metrology import FisherSeries


@dataclass
class Table:
    """Generic named columns, for outputs without a dedicated series type."""

    columns: dict


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def series_columns(series) -> dict:
    """Ordered ``{header: values}`` for any writable series."""
    if isinstance(series, ObservableSeries):
        cols = {
            "t_us": series.times * 1e6,
            "p_down": series.p_down,
            "p_up": series.p_up,
            "lambda": series.lam,
            "mz": series.mz,
        }
        if series.concurrence is not None:
            cols["concurrence"] = series.concurrence
        if series.tangle is not None:
            cols["tangle"] = series.tangle
        return cols
    if isinstance(series, FisherSeries):
        return {
            "t_us": series.times * 1e6,
            "p_up": series.p_up,
            "fi_us2": series.fi * 1e12,
            "t2_us2": (series.times * 1e6) ** 2,
        }
    if isinstance(series, PhaseDiagram):
        bx, bz = np.meshgrid(series.bx_grid, series.bz_grid, indexing="ij")
        return {
            "bx_G": bx.ravel(),
            "bz_G": bz.ravel(),
            "dqpt_flag": series.dqpt_flag.ravel(),
            "first_tc_us": series.first_tc.ravel() * 1e6,
            "mean_mz": series.mean_mz.ravel(),
        }
    if isinstance(series, Table):
        return series.columns
    raise TypeError(f"cannot write {type(series).__name__} as CSV")


def write_series_csv(series, path) -> Path:
    """Header row, fixed column order, 12 significant digits, LF endings."""
    cols = series_columns(series)
    lengths = {len(v) for v in cols.values()}
    if len(lengths) > 1:
        raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
    path = Path(path)
    lines = [",".join(cols)]
    for row in zip(*cols.values()):
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(data: dict, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path

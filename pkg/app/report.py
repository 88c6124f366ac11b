"""
Result artefacts: the per-filter text table, the JSON summary and the
plot-ready CSV frames.
"""
import json
import math
from pathlib import Path
from typing import Any, List, Optional, Union

import numpy as np
import pandas as pd
from jinja2 import Template

from .evaluation import AXES, McSummary

TABLE_TEMPLATE = """\
{{ title }}
{{ "%-10s"|format("Filter") }}{% for axis in axes %}{{ "%12s"|format(axis ~ " [deg]") }}{% endfor %}{{ "%16s"|format("Time/iter [us]") }}{{ "%8s"|format("Ops") }}
{{ "-" * width }}
{% for row in rows -%}
{{ "%-10s"|format(row.filter) }}{% for v in row.rmse %}{{ "%12s"|format(v) }}{% endfor %}{{ "%16s"|format(row.time) }}{{ "%8s"|format(row.ops) }}
{% endfor -%}
"""

TABLE_WIDTH = 10 + 12 * len(AXES) + 16 + 8


def table_rows(filter_ids: List[str], summaries: Optional[List[McSummary]] = None,
               timings: Optional[dict] = None, op_counts: Optional[dict] = None) -> List[dict]:
    """One row per filter: RMSE per axis (None without ground truth), time per iteration, op count"""
    rmse = {s.filter_id: [float(v) for v in s.rmse_deg] for s in summaries or []}
    timings = timings or {}
    op_counts = op_counts or {}
    return [
        {
            "filter": fid,
            "rmse": rmse.get(fid),
            "time_per_iter_s": timings.get(fid),
            "op_count": op_counts.get(fid),
        }
        for fid in filter_ids
    ]


def render_table(rows: List[dict], title: str) -> str:
    view = [
        {
            "filter": row["filter"],
            "rmse": ["-"] * len(AXES) if row["rmse"] is None else [f"{v:.3f}" for v in row["rmse"]],
            "time": "-" if row["time_per_iter_s"] is None else f"{row['time_per_iter_s'] * 1e6:.2f}",
            "ops": "-" if row["op_count"] is None else str(row["op_count"]),
        }
        for row in rows
    ]
    return Template(TABLE_TEMPLATE).render(title=title, axes=AXES, rows=view, width=TABLE_WIDTH)


def rmse_frame(rows: List[dict]) -> pd.DataFrame:
    return pd.DataFrame({
        "filter": [row["filter"] for row in rows],
        **{
            f"{axis}_deg": [None if row["rmse"] is None else row["rmse"][i] for row in rows]
            for i, axis in enumerate(AXES)
        },
        "time_per_iter_s": [row["time_per_iter_s"] for row in rows],
        "op_count": pd.array([row["op_count"] for row in rows], dtype="Int64"),
    })


def curve_frame(summary: McSummary, k: float = 2.0) -> pd.DataFrame:
    """Mean rotation-angle error per sample with its ±k std band"""
    lo, hi = summary.band(k)
    return pd.DataFrame({
        "index": np.arange(len(summary.mean_angle_deg)),
        "mean_err_deg": summary.mean_angle_deg,
        "lo_band": lo,
        "hi_band": hi,
    })


def _encode(value: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in value):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in value) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if value is None or isinstance(value, (bool, np.bool_)):
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return f"{value:.17g}" if math.isfinite(value) else "null"
    return json.dumps(str(value))


def to_json(payload: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits"""
    return _encode(payload, indent, 0) + "\n"


def write_json(payload: Any, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(payload), encoding="utf-8")
    return str(path)


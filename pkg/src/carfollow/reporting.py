"""Comparison tables and plot-ready data for the evaluation reports.

Tables carry one row per driving style for the current run plus fixed
reference rows from the published full-scale highD-trained stack, so desk
runs can be compared qualitatively against those numbers without claiming
to reproduce them.
"""

from __future__ import annotations

import numpy as np

from .baselines import IdmParams, _idm_accel_array
from .errors import NothingToReport
from .regressor import mae
from .styles import STYLE_ORDER, Style

REFERENCE_SOURCE = "highD reference"
THIS_RUN_SOURCE = "this run"

# Full-scale reference values (mean absolute prediction error, m/s²).
REFERENCE_MAE = {
    Style.AGGRESSIVE: {"dnn": 0.1356, "idm_fixed": 2.0357, "idm_calibrated": 0.3936},
    Style.NORMAL: {"dnn": 0.1413, "idm_fixed": 2.4309, "idm_calibrated": 0.4584},
    Style.CONSERVATIVE: {"dnn": 0.1415, "idm_fixed": 4.3752, "idm_calibrated": 0.6151},
}
# Full-scale reference agent-vs-regressor RMSE (m/s²).
REFERENCE_RMSE = {
    Style.AGGRESSIVE: 0.282,
    Style.NORMAL: 0.043,
    Style.CONSERVATIVE: 0.013,
}

MAE_TABLE_COLUMNS = ("style", "dnn", "idm_fixed", "idm_calibrated", "source")
RMSE_TABLE_COLUMNS = ("style", "rmse_action_vs_regressor", "source")


def idm_states_from_features(features: np.ndarray) -> np.ndarray:
    """Recover (ego speed, closing speed, gap) rows from regressor features."""
    f = np.asarray(features, dtype=np.float64)
    v = f[:, 6]
    delta_v = f[:, 6] - f[:, 5]
    gap = f[:, 7] * f[:, 6]
    return np.stack([v, delta_v, gap], axis=1)


def idm_mae_on_features(params: IdmParams, features: np.ndarray, targets: np.ndarray) -> float:
    states = idm_states_from_features(features)
    theta = np.array([params.v0, params.time_gap, params.s0, params.a_max, params.b_comf])
    preds = _idm_accel_array(theta, states[:, 0], states[:, 1], states[:, 2], params.delta)
    return mae(preds, targets)


def _cell(value) -> str:
    if value is None:
        return "-"
    return f"{float(value):.4f}"


def aligned_text_table(headers, rows) -> str:
    """Monospace table with per-column width; numbers pre-formatted."""
    txt_rows = [[str(h) for h in headers]] + [[_cell(v) if isinstance(v, (int, float)) or v is None else str(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in txt_rows) for i in range(len(headers))]
    lines = []
    for k, row in enumerate(txt_rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def build_mae_table(per_style: dict[Style, dict]) -> tuple[tuple, list, str]:
    """Rows for (style × predictor) MAE, this run first, reference rows last.

    per_style maps style -> {"dnn": float|None, "idm_fixed": ..,
    "idm_calibrated": ..}; styles absent from the dict are skipped.
    """
    if not per_style:
        raise NothingToReport("no prediction-error results to tabulate")
    rows = []
    for style in STYLE_ORDER:
        if style not in per_style:
            continue
        vals = per_style[style]
        rows.append(
            [
                style.value,
                vals.get("dnn"),
                vals.get("idm_fixed"),
                vals.get("idm_calibrated"),
                THIS_RUN_SOURCE,
            ]
        )
    for style in STYLE_ORDER:
        ref = REFERENCE_MAE[style]
        rows.append(
            [style.value, ref["dnn"], ref["idm_fixed"], ref["idm_calibrated"], REFERENCE_SOURCE]
        )
    return MAE_TABLE_COLUMNS, rows, aligned_text_table(MAE_TABLE_COLUMNS, rows)


def build_rmse_table(per_style: dict[Style, float]) -> tuple[tuple, list, str]:
    rows = []
    for style in STYLE_ORDER:
        if style in per_style and per_style[style] is not None:
            rows.append([style.value, float(per_style[style]), THIS_RUN_SOURCE])
    for style in STYLE_ORDER:
        rows.append([style.value, REFERENCE_RMSE[style], REFERENCE_SOURCE])
    return RMSE_TABLE_COLUMNS, rows, aligned_text_table(RMSE_TABLE_COLUMNS, rows)

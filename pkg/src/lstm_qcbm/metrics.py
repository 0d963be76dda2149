"""Forecast error metrics and the results table."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .nn import mse_loss

log = logging.getLogger(__name__)

QLIKE_FLOOR = 1e-8


@dataclass(frozen=True)
class MetricsRecord:
    mse: float
    rmse: float
    qlike: float
    n: int
    n_clamped: int = 0


mse = mse_loss


def rmse(pred, target) -> float:
    return float(np.sqrt(mse(pred, target)))


def qlike_clamped(pred, target, floor: float = QLIKE_FLOOR) -> tuple[float, int]:
    """Mean of ``ln(p) + y / p`` with ``p = max(pred, floor)``.

    Returns the loss together with the number of predictions that had to be
    raised to ``floor``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.size < 1:
        raise ValueError(f"qlike needs equal non-empty shapes, got {pred.shape} vs {target.shape}")
    clamped = pred < floor
    p = np.where(clamped, floor, pred)
    n_clamped = int(clamped.sum())
    if n_clamped:
        log.warning("qlike: %d of %d predictions clamped to %g", n_clamped, pred.size, floor)
    return float(np.mean(np.log(p) + target / p)), n_clamped


def qlike(pred, target) -> float:
    return qlike_clamped(pred, target)[0]


def evaluate_predictions(pred, target) -> MetricsRecord:
    m = mse(pred, target)
    q, n_clamped = qlike_clamped(pred, target)
    return MetricsRecord(mse=m, rmse=float(np.sqrt(m)), qlike=q, n=int(np.size(pred)), n_clamped=n_clamped)


def format_row(record: MetricsRecord) -> str:
    """``MSE x1e-6 | RMSE x1e-3 | QLIKE`` to two decimals."""
    cells = [record.mse * 1e6, record.rmse * 1e3, record.qlike]
    return " | ".join(f"{v:.2f}" for v in cells).replace("-0.00", "0.00")


def format_report(records: dict[str, MetricsRecord], dataset: str = "") -> tuple[str, str]:
    """Render ``records`` as a text table and as CSV.

    Returns ``(text, csv_text)``. CSV values are unscaled.
    """
    if not records:
        raise ValueError("no records to report")
    width = max(len("Model"), *(len(k) for k in records))
    lines = [f"{'Model':<{width}} | MSE (x1e-6) | RMSE (x1e-3) | QLIKE"]
    for name, rec in records.items():
        lines.append(f"{name:<{width}} | {format_row(rec)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "model", "mse", "rmse", "qlike", "n"])
    for name, rec in records.items():
        writer.writerow([dataset, name, repr(rec.mse), repr(rec.rmse), repr(rec.qlike), rec.n])
    return "\n".join(lines) + "\n", buf.getvalue()

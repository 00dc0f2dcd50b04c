"""
Human-readable and tabular run reports.
"""
import csv
import logging
import os
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _ensure_dir(path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def write_probe_csv(path: str, points: np.ndarray, estimate: np.ndarray, labels: Sequence[str],
                    truth: Optional[np.ndarray] = None) -> None:
    """
    One row per probe: coordinates, estimated components and, with truth,
    true components and absolute errors.
    """
    pts = np.atleast_2d(points)
    est = np.atleast_2d(estimate)
    coords = [f"x{k + 1}" for k in range(pts.shape[1])]
    columns = coords + [f"est_{label}" for label in labels]
    if truth is not None:
        tru = np.atleast_2d(truth)
        columns += [f"true_{label}" for label in labels] + [f"err_{label}" for label in labels]
    _ensure_dir(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for k in range(len(pts)):
            row = list(pts[k]) + list(est[k])
            if truth is not None:
                row += list(tru[k]) + list(np.abs(est[k] - tru[k]))
            writer.writerow([_fmt(float(v)) for v in row])
    logger.info(f"[STORAGE] Wrote probe table {path} ({len(pts)} rows)")


def read_probe_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return columns, np.array(rows)


def summary_text(findings: Iterable) -> str:
    """`key: value` per line from (key, value) pairs."""
    return "".join(f"{key}: {_fmt(value)}\n" for key, value in findings)


def write_report(path: str, text: str) -> None:
    _ensure_dir(path)
    with open(path, "w") as fh:
        fh.write(text)
    logger.info(f"[STORAGE] Wrote report {path}")

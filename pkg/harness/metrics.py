"""
CSV metrics: comma-separated, header row, UTF-8, LF line endings.
"""

import csv
import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ('iter', 'half_step', 'L_bar', 'Lp', 'Lpp', 'Lppp', 'J_exact', 'J_window', 'J_rollout', 'J_stderr', 'wallclock')
BASELINE_COLUMNS = ('iter', 'algo', 'J_exact', 'J_rollout', 'J_stderr', 'wallclock')
VERIFY_COLUMNS = ('instance_id', 'bound_name', 'rhs', 'exact_gap', 'slack', 'pass')
SUMMARY_COLUMNS = ('env', 'epsilon', 'seed', 'algo', 'J_behavior', 'J_policy', 'gap', 'J_optimal')


def write_csv(path, rows, columns):
    """Write rows (dicts) under the given header; missing keys are left blank."""
    path = Path(path)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def read_csv(path):
    with Path(path).open('r', encoding='utf-8', newline='') as handle:
        return list(csv.DictReader(handle))


def window(values, size):
    """
    Trailing moving average: entry i is the mean of the last size values up
    to i (fewer at the start of the curve).
    """
    values = np.asarray(values, dtype=np.float64)
    if size <= 0:
        raise ValueError(f"window size must be positive, got {size}")
    if values.size == 0:
        return values
    totals = np.concatenate([[0.0], np.cumsum(values)])
    ends = np.arange(1, values.size + 1)
    starts = np.maximum(ends - size, 0)
    return (totals[ends] - totals[starts]) / (ends - starts)


def mean_and_stderr(samples):
    """Sample mean and its standard error (0 for a single sample)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        return float(samples.mean()), 0.0
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(samples.size))

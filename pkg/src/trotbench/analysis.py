"""Post-hoc trial analysis and delimited export.

Metrics mirror what the workbench reports about a gait: the peak-to-peak
vertical excursion of the trunk center (a stability proxy), the dominant
period of the height signal found via autocorrelation, and the mean
self-support fraction. CSV schemas are fixed:

history: iter,x0,x1,x2,x3,x4,support_height_m,fitness,best_so_far
trace:   t,z,roll,pitch,rope_N,hipFL,kneeFL,hipFR,kneeFR,hipRL,kneeRL,hipRR,kneeRR

Angles are radians and "hip" is the flexion joint. Floats are written in
scientific notation with nine fractional digits so a parse round-trip is
faithful to 1e-9 relative.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import correlate, find_peaks

from .bo import OptimizationHistory
from .sim import TrialTrace

HISTORY_COLUMNS = (
    "iter", "x0", "x1", "x2", "x3", "x4", "support_height_m", "fitness", "best_so_far"
)
TRACE_CSV_COLUMNS = (
    "t", "z", "roll", "pitch", "rope_N",
    "hipFL", "kneeFL", "hipFR", "kneeFR", "hipRL", "kneeRL", "hipRR", "kneeRR",
)

MIN_PERIOD_SIGNAL_S = 4.0
PERIOD_SEARCH_MIN_LAG_S = 0.5
PERIOD_PROMINENCE = 0.3  # fraction of the zero-lag autocorrelation


class EmptySeries(Exception):
    """Metric asked of a zero-length series."""


class TooShort(Exception):
    """Signal shorter than the minimum needed for period estimation."""


def vertical_delta(z_series: np.ndarray) -> float:
    """Max minus min of the height series."""
    z = np.asarray(z_series, dtype=float)
    if z.size == 0:
        raise EmptySeries("vertical_delta needs at least one sample")
    return float(np.max(z) - np.min(z))


def estimate_period(signal: np.ndarray, dt: float) -> Optional[float]:
    """Dominant period via the first prominent autocorrelation peak.

    Peaks are searched at lags between 0.5 s and half the signal length and
    must reach a prominence of 0.3 relative to the zero-lag value; returns
    None when nothing qualifies (aperiodic signal).
    """
    x = np.asarray(signal, dtype=float)
    total = (x.size - 1) * dt
    if total < MIN_PERIOD_SIGNAL_S:
        raise TooShort(f"need at least {MIN_PERIOD_SIGNAL_S} s of signal, got {total:.2f} s")
    x = x - np.mean(x)
    r = correlate(x, x, mode="full", method="fft")[x.size - 1:]
    if r[0] <= 0.0:
        return None  # constant signal
    rho = r / r[0]
    lo = max(1, math.ceil(PERIOD_SEARCH_MIN_LAG_S / dt))
    hi = int(total / 2.0 / dt)
    if hi <= lo:
        return None
    peaks, _ = find_peaks(rho, prominence=PERIOD_PROMINENCE)
    peaks = peaks[(peaks >= lo) & (peaks <= hi)]
    if peaks.size == 0:
        return None
    return float(peaks[0] * dt)


@dataclass(frozen=True)
class TraceMetrics:
    vertical_delta: float
    dominant_period: Optional[float]
    mean_fitness: float
    termination: str

    def lines(self) -> list[str]:
        period = "none" if self.dominant_period is None else f"{self.dominant_period:.3f}"
        return [
            f"vertical_delta_m = {self.vertical_delta:.6f}",
            f"dominant_period_s = {period}",
            f"mean_fitness = {self.mean_fitness:.6f}",
            f"termination = {self.termination}",
        ]


def trace_metrics(
    t: np.ndarray,
    z: np.ndarray,
    rope_tension: np.ndarray,
    weight: float,
    termination: str = "unknown",
) -> TraceMetrics:
    """Metrics from raw series; period falls back to None on short signals."""
    frac = np.clip(1.0 - np.asarray(rope_tension) / weight, 0.0, 1.0)
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    try:
        period = estimate_period(z, dt)
    except TooShort:
        period = None
    return TraceMetrics(
        vertical_delta=vertical_delta(z),
        dominant_period=period,
        mean_fitness=float(np.mean(frac)),
        termination=termination,
    )


def metrics_of_trace(trace: TrialTrace, weight: float) -> TraceMetrics:
    return trace_metrics(
        trace.times, trace.z, trace.rope_tension, weight, trace.termination
    )


def _fmt(value: float) -> str:
    return f"{value:.9e}"


def export_history(history: OptimizationHistory, path: str | Path) -> None:
    """Write the optimization log; best_so_far is the running fitness maximum."""
    path = Path(path)
    try:
        with path.open("w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HISTORY_COLUMNS)
            best = -np.inf
            for rec in history.records:
                best = max(best, rec.fitness)
                arr = rec.params.to_array()
                writer.writerow(
                    [
                        rec.iteration,
                        *(_fmt(v) for v in arr),
                        "" if rec.support_height is None else _fmt(rec.support_height),
                        _fmt(rec.fitness),
                        _fmt(best),
                    ]
                )
    except OSError as exc:
        raise OSError(f"failed writing history to {path}: {exc}") from exc


def export_trace(trace: TrialTrace, path: str | Path) -> None:
    path = Path(path)
    cols = [
        trace.times,
        trace.z,
        trace.roll,
        trace.pitch,
        trace.rope_tension,
        trace.column("hipFL"), trace.column("kneeFL"),
        trace.column("hipFR"), trace.column("kneeFR"),
        trace.column("hipRL"), trace.column("kneeRL"),
        trace.column("hipRR"), trace.column("kneeRR"),
    ]
    try:
        with path.open("w", newline="\n") as fh:
            fh.write(",".join(TRACE_CSV_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing trace to {path}: {exc}") from exc


@dataclass
class HistoryTable:
    iterations: np.ndarray
    params: np.ndarray  # (n, 5)
    support_heights: np.ndarray  # NaN where the rope was disabled
    fitness: np.ndarray
    best_so_far: np.ndarray


def read_history(path: str | Path) -> HistoryTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HISTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected history header {header}")
        rows = list(reader)
    n = len(rows)
    table = HistoryTable(
        iterations=np.zeros(n, dtype=int),
        params=np.zeros((n, 5)),
        support_heights=np.full(n, np.nan),
        fitness=np.zeros(n),
        best_so_far=np.zeros(n),
    )
    for i, row in enumerate(rows):
        table.iterations[i] = int(row[0])
        table.params[i] = [float(v) for v in row[1:6]]
        if row[6] != "":
            table.support_heights[i] = float(row[6])
        table.fitness[i] = float(row[7])
        table.best_so_far[i] = float(row[8])
    return table


@dataclass
class TraceTable:
    """Trace CSV contents as column arrays (subset of a live TrialTrace)."""

    t: np.ndarray
    z: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    rope_tension: np.ndarray
    joint_angles: np.ndarray  # (n, 8): hip/knee per leg, FL FR RL RR

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0


def read_trace(path: str | Path) -> TraceTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {header}")
        data = np.array([[float(v) for v in row] for row in reader])
    if data.size == 0:
        data = data.reshape(0, len(TRACE_CSV_COLUMNS))
    return TraceTable(
        t=data[:, 0],
        z=data[:, 1],
        roll=data[:, 2],
        pitch=data[:, 3],
        rope_tension=data[:, 4],
        joint_angles=data[:, 5:13],
    )

"""Cohort ingestion, grid resampling, normalization, windowing, and
patient-level splitting.

Cohort CSV schema (UTF-8, one row per observation):
    patient_id,timestamp,hr,sbp,dbp,age,label
with ISO-8601 UTC timestamps (e.g. 2020-03-21T14:00:00Z) and label in {0,1}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

CSV_HEADER = ["patient_id", "timestamp", "hr", "sbp", "dbp", "age", "label"]

CHANNELS = ("hr", "sbp", "dbp")

HOUR = timedelta(hours=1)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VitalSample:
    """One timestamped observation of the three vital-sign channels."""

    timestamp: datetime
    hr: float
    sbp: float
    dbp: float

    def __post_init__(self):
        for name in CHANNELS:
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be finite and > 0, got {v}")
        if self.dbp >= self.sbp:
            raise ValidationError(
                f"dbp must be < sbp, got dbp={self.dbp}, sbp={self.sbp}"
            )
        if self.timestamp.tzinfo is None:
            raise ValidationError("timestamps must be timezone-aware UTC")


@dataclass
class PatientRecord:
    patient_id: str
    age: int
    label: int
    samples: list[VitalSample]

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")
        if not 21 <= self.age <= 100:
            raise ValidationError(f"age must be in [21, 100], got {self.age}")
        if not self.samples:
            raise ValidationError(f"patient {self.patient_id} has no samples")
        times = [s.timestamp for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError(
                f"patient {self.patient_id}: timestamps not strictly increasing"
            )


@dataclass
class Cohort:
    patients: list[PatientRecord] = field(default_factory=list)

    def __post_init__(self):
        ids = [p.patient_id for p in self.patients]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate patient ids: {dupes}")

    def __len__(self) -> int:
        return len(self.patients)

    def labels(self) -> np.ndarray:
        return np.array([p.label for p in self.patients], dtype=int)


@dataclass
class RegularSeries:
    """Regularly gridded T x 3 matrix (HR, SBP, DBP), no missing values."""

    start: datetime
    step: timedelta
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != 3:
            raise ValidationError(f"values must be T x 3, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValidationError("regular series contains non-finite cells")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel (HR, SBP, DBP) normalization constants from the train set."""

    mean: np.ndarray
    std: np.ndarray

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


@dataclass
class WindowedDataset:
    """Fixed-length, normalized windows; the unit of training and evaluation.

    X has shape (n, window_len, 3); y holds the owning patient's label per
    window; padded flags windows that were front-zero-padded because the
    patient's series was shorter than window_len.
    """

    X: np.ndarray
    y: np.ndarray
    patient_ids: list[str]
    padded: np.ndarray
    window_len: int
    stats: ChannelStats

    def __post_init__(self):
        if self.X.ndim != 3 or self.X.shape[2] != 3:
            raise ValidationError(f"X must be n x W x 3, got {self.X.shape}")
        if self.X.shape[1] != self.window_len:
            raise ValidationError("window length mismatch")
        if not np.isfinite(self.X).all():
            raise ValidationError("windows contain non-finite values")

    def __len__(self) -> int:
        return self.X.shape[0]


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------


def _parse_timestamp(raw: str, line_no: int) -> datetime:
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise ParseError(f"line {line_no}: bad timestamp {raw!r}") from None
    if ts.tzinfo is None:
        raise ParseError(f"line {line_no}: timestamp {raw!r} lacks a UTC offset")
    return ts.astimezone(timezone.utc)


def _parse_float(raw: str, name: str, line_no: int) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(f"line {line_no}: non-numeric {name} {raw!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"line {line_no}: non-finite {name} {raw!r}")
    return v


def _parse_int(raw: str, name: str, line_no: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"line {line_no}: non-integer {name} {raw!r}") from None


def load_cohort(path) -> Cohort:
    """Read a cohort CSV, grouping rows by patient and sorting by timestamp."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    per_patient: dict[str, dict] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != CSV_HEADER:
            raise ParseError(
                f"{path}: bad header {header!r}, expected {CSV_HEADER!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"line {line_no}: expected {len(CSV_HEADER)} fields")
            pid, ts_raw, hr_raw, sbp_raw, dbp_raw, age_raw, label_raw = row
            ts = _parse_timestamp(ts_raw, line_no)
            hr = _parse_float(hr_raw, "hr", line_no)
            sbp = _parse_float(sbp_raw, "sbp", line_no)
            dbp = _parse_float(dbp_raw, "dbp", line_no)
            age = _parse_int(age_raw, "age", line_no)
            label = _parse_int(label_raw, "label", line_no)
            if dbp >= sbp:
                raise ValidationError(
                    f"line {line_no}: dbp ({dbp}) must be < sbp ({sbp})"
                )
            if min(hr, sbp, dbp) <= 0:
                raise ValidationError(f"line {line_no}: vitals must be > 0")
            if label not in (0, 1):
                raise ValidationError(f"line {line_no}: label must be 0 or 1")
            entry = per_patient.setdefault(
                pid, {"age": age, "label": label, "rows": {}, "first_line": line_no}
            )
            if entry["age"] != age or entry["label"] != label:
                raise ValidationError(
                    f"line {line_no}: patient {pid} has inconsistent age/label"
                )
            if ts in entry["rows"]:
                raise ValidationError(
                    f"line {line_no}: duplicate timestamp {ts_raw} for patient {pid}"
                )
            entry["rows"][ts] = (hr, sbp, dbp)
    patients = []
    for pid, entry in per_patient.items():
        samples = [
            VitalSample(timestamp=ts, hr=v[0], sbp=v[1], dbp=v[2])
            for ts, v in sorted(entry["rows"].items())
        ]
        patients.append(
            PatientRecord(
                patient_id=pid, age=entry["age"], label=entry["label"], samples=samples
            )
        )
    return Cohort(patients=patients)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_cohort(cohort: Cohort, path) -> None:
    """Write a cohort CSV; floats use shortest round-trip formatting."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in cohort.patients:
            for s in p.samples:
                writer.writerow(
                    [
                        p.patient_id,
                        format_timestamp(s.timestamp),
                        repr(s.hr),
                        repr(s.sbp),
                        repr(s.dbp),
                        p.age,
                        p.label,
                    ]
                )


# ---------------------------------------------------------------------------
# Resampling and windowing
# ---------------------------------------------------------------------------


def resample(record: PatientRecord, step: timedelta = HOUR) -> RegularSeries:
    """Average samples onto a regular grid from the first to the last
    timestamp; empty slots are forward-filled, then backward-filled.

    Slot t covers [start + t*step, start + (t+1)*step).
    """
    if step <= timedelta(0):
        raise ValidationError(f"step must be positive, got {step}")
    start = record.samples[0].timestamp
    last = record.samples[-1].timestamp
    n_slots = int((last - start) / step) + 1
    sums = np.zeros((n_slots, 3))
    counts = np.zeros(n_slots)
    for s in record.samples:
        idx = int((s.timestamp - start) / step)
        sums[idx] += (s.hr, s.sbp, s.dbp)
        counts[idx] += 1
    values = np.full((n_slots, 3), np.nan)
    filled = counts > 0
    values[filled] = sums[filled] / counts[filled, None]
    # forward fill
    last_seen = None
    for t in range(n_slots):
        if filled[t]:
            last_seen = values[t]
        elif last_seen is not None:
            values[t] = last_seen
    # backward fill for any leading gap
    nxt = None
    for t in range(n_slots - 1, -1, -1):
        if np.isfinite(values[t]).all():
            nxt = values[t]
        elif nxt is not None:
            values[t] = nxt
    return RegularSeries(start=start, step=step, values=values)


def compute_channel_stats(train: list[RegularSeries]) -> ChannelStats:
    """Pooled per-channel mean and population std over all train grid cells.

    Must only ever see training-set series; the returned stats are applied
    unchanged to validation/test data.
    """
    if not train:
        raise ValidationError("compute_channel_stats: no series given")
    cells = np.concatenate([s.values for s in train], axis=0)
    mean = cells.mean(axis=0)
    std = cells.std(axis=0)
    if (std <= 0).any():
        bad = [CHANNELS[i] for i in np.flatnonzero(std <= 0)]
        raise ValidationError(f"zero-variance channel(s): {bad}")
    return ChannelStats(mean=mean, std=std)


def make_windows(
    series: list[tuple[str, RegularSeries, int]],
    window_len: int,
    stride: int,
    stats: ChannelStats,
) -> WindowedDataset:
    """Slide fixed-length windows over each patient's normalized series.

    Patients shorter than window_len contribute one window, front-zero-padded
    (zeros in normalized space equal the channel means) and flagged as padded.
    """
    if window_len < 1 or stride < 1:
        raise ValidationError("window_len and stride must be >= 1")
    xs, ys, pids, padded = [], [], [], []
    for pid, reg, label in series:
        norm = stats.normalize(reg.values)
        t = norm.shape[0]
        if t < window_len:
            win = np.zeros((window_len, 3))
            win[window_len - t :] = norm
            xs.append(win)
            ys.append(label)
            pids.append(pid)
            padded.append(True)
            continue
        for lo in range(0, t - window_len + 1, stride):
            xs.append(norm[lo : lo + window_len])
            ys.append(label)
            pids.append(pid)
            padded.append(False)
    X = np.stack(xs) if xs else np.zeros((0, window_len, 3))
    return WindowedDataset(
        X=X,
        y=np.array(ys, dtype=int),
        patient_ids=pids,
        padded=np.array(padded, dtype=bool),
        window_len=window_len,
        stats=stats,
    )


def split_by_patient(
    cohort: Cohort, train_fraction: float, seed: int
) -> tuple[Cohort, Cohort]:
    """Label-stratified patient-level partition, deterministic per seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_label: dict[int, list[PatientRecord]] = {0: [], 1: []}
    for p in cohort.patients:
        by_label[p.label].append(p)
    if min(len(v) for v in by_label.values()) < 2:
        raise ValidationError(
            "cohort too small to stratify: need at least 2 patients of each label"
        )
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in (0, 1):
        group = sorted(by_label[label], key=lambda p: p.patient_id)
        order = rng.permutation(len(group))
        n_train = int(round(train_fraction * len(group)))
        n_train = min(max(n_train, 1), len(group) - 1)
        chosen = set(order[:n_train].tolist())
        for i, p in enumerate(group):
            (train if i in chosen else test).append(p)
    # preserve original cohort ordering for reproducible output files
    order_index = {p.patient_id: i for i, p in enumerate(cohort.patients)}
    train.sort(key=lambda p: order_index[p.patient_id])
    test.sort(key=lambda p: order_index[p.patient_id])
    return Cohort(patients=train), Cohort(patients=test)

"""Synthetic cohort generation calibrated to published group statistics.

Each generated patient gets a latent per-vital mean and minimum drawn
around the midpoints of the target intervals for its test-result group,
then an AR(1)-perturbed series (circadian rhythm on HR, shared positive
burst process on all channels, correlated blood-pressure noise) that is
affinely rescaled so the realized series mean and minimum land on the
latent draws. Group-level confidence intervals therefore concentrate
inside the target intervals by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources

import numpy as np

from .data import Cohort, PatientRecord, VitalSample, resample
from .errors import ValidationError
from .stats import confidence_interval

VITALS = ("hr", "sbp", "dbp")
STATS = ("mean", "std", "min", "max")

_BASE_DATE = datetime(2020, 3, 21, tzinfo=timezone.utc)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class GroupSpec:
    """Targets and cohort composition for one test-result group."""

    label: int
    patients_per_bin: list[int]
    stay_days: tuple[float, float]
    targets: dict[str, dict[str, tuple[float, float]]]
    circadian_hr_amp: float

    def validate(self, n_bins: int) -> None:
        if self.label not in (0, 1):
            raise ValidationError(f"group label must be 0 or 1, got {self.label}")
        if len(self.patients_per_bin) != n_bins:
            raise ValidationError("patients_per_bin must match age_bins length")
        if any(c < 0 for c in self.patients_per_bin):
            raise ValidationError("patient counts must be >= 0")
        lo, hi = self.stay_days
        if not 0 < lo <= hi:
            raise ValidationError(f"bad stay-duration range {self.stay_days}")
        for vital in VITALS:
            cells = self.targets.get(vital)
            if cells is None or set(cells) != set(STATS):
                raise ValidationError(f"targets for {vital} must cover {STATS}")
            for stat, (t_lo, t_hi) in cells.items():
                if not t_lo < t_hi:
                    raise ValidationError(
                        f"target interval for {vital} {stat} has lo >= hi"
                    )


@dataclass
class Dynamics:
    """Within-patient dynamics constants (shared across groups)."""

    ar_coef_hourly: float = 0.9
    mean_sd: dict[str, float] = field(
        default_factory=lambda: {"hr": 0.9, "sbp": 1.2, "dbp": 0.7}
    )
    min_sd: dict[str, float] = field(
        default_factory=lambda: {"hr": 1.4, "sbp": 2.2, "dbp": 1.2}
    )
    base_sd: dict[str, float] = field(
        default_factory=lambda: {"hr": 0.7, "sbp": 0.7, "dbp": 0.4}
    )
    spike_gain: dict[str, float] = field(
        default_factory=lambda: {"hr": 1.1, "sbp": 0.65, "dbp": 1.1}
    )
    dip_gain: dict[str, float] = field(
        default_factory=lambda: {"hr": 0.55, "sbp": 0.7, "dbp": 1.0}
    )
    spike_rate_per_hour: float = 0.05
    dip_rate_per_hour: float = 0.025
    burst_decay_hourly: float = 0.9
    sbp_dbp_corr: float = 0.7


@dataclass
class SynthConfig:
    seed: int
    age_bins: list[tuple[int, int]]
    cadences_minutes: list[int]
    cadence_weights: list[float]
    groups: list[GroupSpec]
    dynamics: Dynamics = field(default_factory=Dynamics)

    def validate(self) -> None:
        if len(self.cadences_minutes) != len(self.cadence_weights):
            raise ValidationError("cadence weights must match cadence set")
        if any(c <= 0 for c in self.cadences_minutes):
            raise ValidationError("cadences must be positive minutes")
        if any(w < 0 for w in self.cadence_weights) or sum(self.cadence_weights) <= 0:
            raise ValidationError("cadence weights must be non-negative, not all zero")
        for lo, hi in self.age_bins:
            if not 21 <= lo <= hi <= 100:
                raise ValidationError(f"age bin ({lo}, {hi}) outside [21, 100]")
        labels = [g.label for g in self.groups]
        if sorted(labels) != [0, 1]:
            raise ValidationError("config must define exactly one group per label")
        for g in self.groups:
            g.validate(len(self.age_bins))

    def group(self, label: int) -> GroupSpec:
        for g in self.groups:
            if g.label == label:
                return g
        raise KeyError(label)

    # -- JSON round trip ----------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        try:
            groups = [
                GroupSpec(
                    label=g["label"],
                    patients_per_bin=list(g["patients_per_bin"]),
                    stay_days=tuple(g["stay_days"]),
                    targets={
                        v: {s: tuple(iv) for s, iv in cells.items()}
                        for v, cells in g["targets"].items()
                    },
                    circadian_hr_amp=g["circadian_hr_amp"],
                )
                for g in raw["groups"]
            ]
            dyn_raw = raw.get("dynamics", {})
            cfg = cls(
                seed=raw["seed"],
                age_bins=[tuple(b) for b in raw["age_bins"]],
                cadences_minutes=list(raw["cadences_minutes"]),
                cadence_weights=list(raw["cadence_weights"]),
                groups=groups,
                dynamics=Dynamics(**dyn_raw),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad synth config: {exc}") from None
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "age_bins": [list(b) for b in self.age_bins],
            "cadences_minutes": list(self.cadences_minutes),
            "cadence_weights": list(self.cadence_weights),
            "groups": [
                {
                    "label": g.label,
                    "patients_per_bin": list(g.patients_per_bin),
                    "stay_days": list(g.stay_days),
                    "targets": {
                        v: {s: list(iv) for s, iv in cells.items()}
                        for v, cells in g.targets.items()
                    },
                    "circadian_hr_amp": g.circadian_hr_amp,
                }
                for g in self.groups
            ],
            "dynamics": {
                "ar_coef_hourly": self.dynamics.ar_coef_hourly,
                "mean_sd": dict(self.dynamics.mean_sd),
                "min_sd": dict(self.dynamics.min_sd),
                "base_sd": dict(self.dynamics.base_sd),
                "spike_gain": dict(self.dynamics.spike_gain),
                "dip_gain": dict(self.dynamics.dip_gain),
                "spike_rate_per_hour": self.dynamics.spike_rate_per_hour,
                "dip_rate_per_hour": self.dynamics.dip_rate_per_hour,
                "burst_decay_hourly": self.dynamics.burst_decay_hourly,
                "sbp_dbp_corr": self.dynamics.sbp_dbp_corr,
            },
        }


def load_config(path) -> SynthConfig:
    with open(path, encoding="utf-8") as fh:
        return SynthConfig.from_dict(json.load(fh))


def default_config() -> SynthConfig:
    raw = resources.files("vitalnet").joinpath("synth_default.json").read_text("utf-8")
    return SynthConfig.from_dict(json.loads(raw))


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

# physiological clipping bounds per channel
_CLIP = {"hr": (30.0, 200.0), "sbp": (60.0, 250.0), "dbp": (20.0, 150.0)}


def _ar1(rng, n: int, coef: float) -> np.ndarray:
    """Unit-variance stationary AR(1) path of length n."""
    eps = rng.standard_normal(n) * np.sqrt(1.0 - coef * coef)
    x = np.empty(n)
    x[0] = rng.standard_normal()
    for t in range(1, n):
        x[t] = coef * x[t - 1] + eps[t]
    return x


def _burst(rng, n: int, rate: float, decay: float, dt_hours: float) -> np.ndarray:
    """Non-negative decaying burst process (sparse exponential impulses)."""
    hits = rng.random(n) < rate * dt_hours
    amps = rng.exponential(1.0, size=n) * hits
    out = np.empty(n)
    d = decay**dt_hours
    acc = 0.0
    for t in range(n):
        acc = d * acc + amps[t]
        out[t] = acc
    return out


def _cadence_assignment(config: SynthConfig, n: int) -> list[int]:
    """Largest-remainder split of n patients over the cadence weights."""
    weights = np.asarray(config.cadence_weights, dtype=float)
    weights = weights / weights.sum()
    quota = weights * n
    counts = np.floor(quota).astype(int)
    remainder = quota - counts
    for i in np.argsort(-remainder)[: n - counts.sum()]:
        counts[i] += 1
    out = []
    for cadence, k in zip(config.cadences_minutes, counts):
        out.extend([cadence] * int(k))
    return out


def _target_mid(group: GroupSpec, vital: str, stat: str) -> float:
    lo, hi = group.targets[vital][stat]
    return 0.5 * (lo + hi)


def generate_cohort(config: SynthConfig) -> Cohort:
    """Deterministically generate a cohort matching the configured targets."""
    config.validate()
    dyn = config.dynamics
    rng = np.random.default_rng(config.seed)
    patients: list[PatientRecord] = []

    for group in sorted(config.groups, key=lambda g: g.label):
        n_group = sum(group.patients_per_bin)
        if n_group == 0:
            continue
        lo_days, hi_days = group.stay_days
        if n_group == 1:
            durations = np.array([0.5 * (lo_days + hi_days)])
        else:
            durations = np.linspace(lo_days, hi_days, n_group)
        durations = durations + rng.uniform(-0.5, 0.5, size=n_group)
        durations = np.clip(durations, lo_days, hi_days)
        cadences = _cadence_assignment(config, n_group)
        rng.shuffle(cadences)

        ages = []
        for (bin_lo, bin_hi), count in zip(config.age_bins, group.patients_per_bin):
            ages.extend(rng.integers(bin_lo, bin_hi + 1, size=count).tolist())

        for i in range(n_group):
            pid = f"SYN-{group.label}-{i:03d}"
            patients.append(
                _generate_patient(
                    rng,
                    pid,
                    group,
                    dyn,
                    age=int(ages[i]),
                    duration_days=float(durations[i]),
                    cadence_min=int(cadences[i]),
                )
            )
    return Cohort(patients=patients)


def _generate_patient(
    rng, pid: str, group: GroupSpec, dyn: Dynamics, age, duration_days, cadence_min
) -> PatientRecord:
    dt_hours = cadence_min / 60.0
    n = int(duration_days * 24.0 / dt_hours) + 1
    t_hours = np.arange(n) * dt_hours
    coef = dyn.ar_coef_hourly**dt_hours
    decay = dyn.burst_decay_hourly

    # latent per-patient targets: series mean and minimum per vital
    mu, mn = {}, {}
    for vital in VITALS:
        mu[vital] = rng.normal(_target_mid(group, vital, "mean"), dyn.mean_sd[vital])
        raw_min = rng.normal(_target_mid(group, vital, "min"), dyn.min_sd[vital])
        mn[vital] = min(raw_min, mu[vital] - 5.0)

    # shared structure: positive bursts on all channels, dips on HR,
    # correlated blood-pressure noise
    spikes = _burst(rng, n, dyn.spike_rate_per_hour, decay, dt_hours)
    dips = _burst(rng, n, dyn.dip_rate_per_hour, decay, dt_hours)
    ar_hr = _ar1(rng, n, coef)
    ar_sbp = _ar1(rng, n, coef)
    ar_ind = _ar1(rng, n, coef)
    rho = dyn.sbp_dbp_corr
    ar_dbp = rho * ar_sbp + np.sqrt(1.0 - rho * rho) * ar_ind
    phase = rng.uniform(0.0, 24.0)
    circadian = group.circadian_hr_amp * np.sin(2.0 * np.pi * (t_hours + phase) / 24.0)

    z = {
        "hr": dyn.base_sd["hr"] * ar_hr
        + circadian
        + dyn.spike_gain["hr"] * spikes
        - dyn.dip_gain["hr"] * dips,
        "sbp": dyn.base_sd["sbp"] * ar_sbp
        + dyn.spike_gain["sbp"] * spikes
        - dyn.dip_gain["sbp"] * dips,
        "dbp": dyn.base_sd["dbp"] * ar_dbp
        + dyn.spike_gain["dbp"] * spikes
        - dyn.dip_gain["dbp"] * dips,
    }

    start = _BASE_DATE + timedelta(minutes=float(rng.integers(0, 90 * 24 * 60)))
    channels = {}
    for vital in VITALS:
        zc = z[vital]
        z_mean = zc.mean()
        spread = z_mean - zc.min()
        if spread <= 0:  # constant latent path; keep the flat series at mu
            channels[vital] = np.full(n, mu[vital])
            continue
        scale = (mu[vital] - mn[vital]) / spread
        x = mu[vital] + (zc - z_mean) * scale
        lo, hi = _CLIP[vital]
        channels[vital] = np.clip(x, lo, hi)
    channels["dbp"] = np.minimum(channels["dbp"], channels["sbp"] - 10.0)
    channels["dbp"] = np.clip(channels["dbp"], _CLIP["dbp"][0], None)

    samples = [
        VitalSample(
            timestamp=start + timedelta(minutes=cadence_min * k),
            hr=round(float(channels["hr"][k]), 2),
            sbp=round(float(channels["sbp"][k]), 2),
            dbp=round(float(channels["dbp"][k]), 2),
        )
        for k in range(n)
    ]
    return PatientRecord(patient_id=pid, age=age, label=group.label, samples=samples)


# ---------------------------------------------------------------------------
# Calibration report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellReport:
    label: int
    vital: str
    stat: str
    ci: tuple[float, float]
    target: tuple[float, float]
    overlaps: bool


@dataclass
class CalibrationReport:
    cells: list[CellReport]
    resting_hr: dict[int, dict[str, float | bool]]

    def all_mean_cells_overlap(self) -> bool:
        return all(c.overlaps for c in self.cells if c.stat == "mean")

    def to_dict(self) -> dict:
        return {
            "cells": [
                {
                    "label": c.label,
                    "vital": c.vital,
                    "stat": c.stat,
                    "ci": list(c.ci),
                    "target": list(c.target),
                    "overlaps": c.overlaps,
                }
                for c in self.cells
            ],
            "resting_hr": {str(k): v for k, v in self.resting_hr.items()},
        }


def patient_feature_table(cohort: Cohort) -> dict[str, np.ndarray]:
    """Per-patient summary features over hourly-resampled series.

    Returns arrays keyed 'label', 'age', and '<vital>_<stat>', one row per
    patient in cohort order.
    """
    rows: dict[str, list[float]] = {
        f"{v}_{s}": [] for v in VITALS for s in STATS
    }
    rows["label"] = []
    rows["age"] = []
    for p in cohort.patients:
        series = resample(p)
        rows["label"].append(p.label)
        rows["age"].append(p.age)
        for ci, vital in enumerate(VITALS):
            col = series.values[:, ci]
            rows[f"{vital}_mean"].append(float(col.mean()))
            rows[f"{vital}_std"].append(float(col.std()))
            rows[f"{vital}_min"].append(float(col.min()))
            rows[f"{vital}_max"].append(float(col.max()))
    return {k: np.asarray(v) for k, v in rows.items()}


def calibration_report(
    cohort: Cohort, config: SynthConfig | None = None
) -> CalibrationReport:
    """Compare the cohort's per-group feature CIs against the target intervals.

    For each (vital, statistic) cell and each label, computes the 95% CI of
    the per-patient feature and reports whether it overlaps the configured
    target; also reports mean resting HR (per-patient minimum HR) per label
    against the target's midpoint reference.
    """
    if config is None:
        config = default_config()
    table = patient_feature_table(cohort)
    labels = table["label"]
    if len(cohort) == 0 or len(set(labels.tolist())) < 2:
        raise ValidationError("calibration report needs a non-empty two-label cohort")
    cells = []
    resting = {}
    for group in sorted(config.groups, key=lambda g: g.label):
        mask = labels == group.label
        if mask.sum() < 2:
            raise ValidationError(
                f"need at least 2 patients with label {group.label}"
            )
        for vital in VITALS:
            for stat in STATS:
                values = table[f"{vital}_{stat}"][mask]
                ci = confidence_interval(values, 0.95)
                target = group.targets[vital][stat]
                overlaps = ci[0] <= target[1] and target[0] <= ci[1]
                cells.append(
                    CellReport(
                        label=group.label,
                        vital=vital,
                        stat=stat,
                        ci=ci,
                        target=target,
                        overlaps=overlaps,
                    )
                )
        observed = float(table["hr_min"][mask].mean())
        reference = _target_mid(group, "hr", "min")
        resting[group.label] = {
            "observed_mean": observed,
            "reference": reference,
            "within_5_bpm": abs(observed - reference) <= 5.0,
        }
    return CalibrationReport(cells=cells, resting_hr=resting)

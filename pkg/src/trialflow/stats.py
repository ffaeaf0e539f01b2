"""Survival curves, box summaries, and adverse-event incidence.

Kaplan-Meier product-limit estimation with Greenwood variance and
normal-approximation confidence bands, quartile box statistics with
1.5*IQR whiskers, and per-group incidence/duration rollups over the
summarized status sequences.
"""
from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .cohort import Cohort
from .errors import EmptyGroup, ValidationError
from .statuses import EventStatus, RawEventType

_AKI_ROWS = (EventStatus.AKI.index, EventStatus.AKI_PLUS_INFECTION.index)
_INFECTION_ROWS = (EventStatus.INFECTION.index, EventStatus.AKI_PLUS_INFECTION.index)
_OAE_ROWS = (EventStatus.OAE.index, EventStatus.TREATMENT_PLUS_OAE.index)
_TERMINAL_ROWS = (EventStatus.DEATH_OR_TRANSPLANT.index, EventStatus.OFF_STUDY.index)


@dataclass(frozen=True)
class SurvivalRecord:
    patient_id: str
    time: int
    event: bool  # True = death or transplant; False = censored


def survival_records(cohort: Cohort,
                     transplant_as_event: bool = True) -> list[SurvivalRecord]:
    """Time-to-event rows derived from the status sequences.

    Event time is the first death-or-transplant day; otherwise the
    patient is censored at the first off-study day or at end of
    follow-up. With transplant_as_event=False a terminal day caused by
    transplant alone becomes a censoring instead.
    """
    records = []
    horizon_last = cohort.config.horizon_days - 1
    death_starts: dict[str, int] = {}
    for rec in cohort.raw_events:
        if rec.event is RawEventType.DEATH:
            prev = death_starts.get(rec.patient_id)
            death_starts[rec.patient_id] = (rec.start_day if prev is None
                                            else min(prev, rec.start_day))
    for p in cohort.patients:
        idx = np.array([s.index for s in p.statuses])
        dot = np.flatnonzero(idx == EventStatus.DEATH_OR_TRANSPLANT.index)
        off = np.flatnonzero(idx == EventStatus.OFF_STUDY.index)
        if dot.size:
            day = int(dot[0])
            event = True
            if not transplant_as_event:
                first_death = death_starts.get(p.patient_id)
                event = first_death is not None and first_death <= day
            records.append(SurvivalRecord(p.patient_id, day, event))
        elif off.size:
            records.append(SurvivalRecord(p.patient_id, int(off[0]), False))
        else:
            records.append(SurvivalRecord(p.patient_id, horizon_last, False))
    return records


@dataclass(frozen=True)
class KMCurve:
    """Step points of the product-limit estimator for one group."""

    group: str
    times: tuple[int, ...]
    survival: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    at_risk: tuple[int, ...]
    events: tuple[int, ...]
    n_total: int

    def as_dict(self) -> dict:
        return {
            "group": self.group,
            "n": self.n_total,
            "points": [
                {"time": t, "survival": s, "lower": lo, "upper": hi,
                 "at_risk": n, "events": d}
                for t, s, lo, hi, n, d in zip(
                    self.times, self.survival, self.lower, self.upper,
                    self.at_risk, self.events)
            ],
        }


def km_estimate(records: list[SurvivalRecord], group: str = "all",
                confidence: float = 0.95) -> KMCurve:
    """Product-limit survival with Greenwood confidence bands.

    S steps down at each distinct event time by (1 - d/n); the variance
    accumulator follows Greenwood's formula, and the symmetric normal
    interval is clamped to [0, 1]. Once the at-risk set is exhausted by
    events (variance undefined), the band collapses onto S.
    """
    if not records:
        raise EmptyGroup("no survival records in group")
    if not 0 < confidence < 1:
        raise ValidationError(f"confidence must be in (0, 1), got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    times = np.array([r.time for r in records])
    events = np.array([r.event for r in records])
    n = len(records)

    event_times = np.unique(times[events])
    points_t: list[int] = []
    s_vals: list[float] = []
    lo_vals: list[float] = []
    hi_vals: list[float] = []
    risk_vals: list[int] = []
    d_vals: list[int] = []

    def emit(t: int, s: float, var_acc: float, at_risk: int, d: int):
        if np.isfinite(var_acc):
            se = s * np.sqrt(var_acc)
            lo, hi = max(0.0, s - z * se), min(1.0, s + z * se)
        else:
            lo = hi = s
        points_t.append(int(t))
        s_vals.append(float(s))
        lo_vals.append(float(lo))
        hi_vals.append(float(hi))
        risk_vals.append(int(at_risk))
        d_vals.append(int(d))

    s = 1.0
    var_acc = 0.0
    if 0 not in event_times:
        emit(0, 1.0, 0.0, n, 0)
    for t in event_times:
        at_risk = int(np.sum(times >= t))
        d = int(np.sum(events & (times == t)))
        s *= 1.0 - d / at_risk
        var_acc += d / (at_risk * (at_risk - d)) if at_risk > d else np.inf
        emit(int(t), s, var_acc, at_risk, d)
    return KMCurve(group, tuple(points_t), tuple(s_vals), tuple(lo_vals),
                   tuple(hi_vals), tuple(risk_vals), tuple(d_vals), n)


@dataclass(frozen=True)
class BoxStats:
    feature: str
    group: str
    whisker_low: float
    q1: float
    median: float
    q3: float
    whisker_high: float
    outliers: tuple[float, ...]
    n: int

    def as_dict(self) -> dict:
        return {
            "feature": self.feature, "group": self.group,
            "whisker_low": self.whisker_low, "q1": self.q1,
            "median": self.median, "q3": self.q3,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers), "n": self.n,
        }


def box_summary(values, feature: str = "", group: str = "") -> BoxStats:
    """Quartiles by linear interpolation; whiskers at the most extreme
    points within 1.5*IQR of the box; everything beyond is an outlier."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyGroup("box summary of an empty group")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("box summary requires finite values")
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    whisker_low = float(inside.min())
    whisker_high = float(inside.max())
    outliers = tuple(float(v) for v in np.sort(arr[(arr < lo_fence) | (arr > hi_fence)]))
    return BoxStats(feature, group, whisker_low, float(q1), float(med),
                    float(q3), whisker_high, outliers, int(arr.size))


@dataclass(frozen=True)
class IncidenceStats:
    """Adverse-event burden and terminal outcomes for one group."""

    group: str
    n: int
    adverse: dict  # name -> {percent, median_days, mean_days}
    death_or_dropoff: dict  # {percent, median_day, mean_day}

    def as_dict(self) -> dict:
        return {"group": self.group, "n": self.n, "adverse": self.adverse,
                "death_or_dropoff": self.death_or_dropoff}


def _duration_entry(day_counts: np.ndarray) -> dict:
    affected = day_counts[day_counts > 0]
    percent = 100.0 * affected.size / day_counts.size
    if affected.size == 0:
        return {"percent": percent, "median_days": None, "mean_days": None}
    return {"percent": percent,
            "median_days": float(np.median(affected)),
            "mean_days": float(np.mean(affected))}


def incidence_summary(status_indices: np.ndarray, group: str = "all") -> IncidenceStats:
    """Per-status-day rollup for one group of patients.

    AKI days count the pure and compound AKI statuses; infection and OAE
    likewise include their compound forms. Durations are per-patient total
    days, summarized over affected patients only (null when none).
    """
    arr = np.asarray(status_indices)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptyGroup("incidence summary of an empty group")
    adverse = {}
    for name, rows in (("aki", _AKI_ROWS), ("infection", _INFECTION_ROWS),
                       ("oae", _OAE_ROWS)):
        day_counts = np.isin(arr, rows).sum(axis=1)
        adverse[name] = _duration_entry(day_counts)

    terminal_mask = np.isin(arr, _TERMINAL_ROWS)
    affected = terminal_mask.any(axis=1)
    percent = 100.0 * affected.sum() / arr.shape[0]
    if affected.any():
        first_days = np.argmax(terminal_mask[affected], axis=1)
        terminal = {"percent": float(percent),
                    "median_day": float(np.median(first_days)),
                    "mean_day": float(np.mean(first_days))}
    else:
        terminal = {"percent": float(percent), "median_day": None, "mean_day": None}
    return IncidenceStats(group, arr.shape[0], adverse, terminal)

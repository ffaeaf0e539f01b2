"""Cohort data model: raw event records, daily status sequences, baselines.

A cohort couples per-patient baseline features with a fixed-horizon daily
status sequence derived from interval event records. Parsing is strict:
every malformed cell raises a ValidationError naming the file, row, and
column. Missing numeric baselines are imputed with the cohort median and
reported back to the caller.
"""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .statuses import (
    ABSORBING_STATUSES,
    DEFAULT_CODING,
    STATUS_BY_NAME,
    EventStatus,
    RawEventType,
    SeverityCoding,
    summarize_day,
)

HORIZON_DAYS = 181  # days 0..180 inclusive

_RAW_BY_NAME = {e.value: e for e in RawEventType}


@dataclass(frozen=True, slots=True)
class RawEventRecord:
    """One interval event: closed day range [start_day, end_day]."""

    patient_id: str
    event: RawEventType
    start_day: int
    end_day: int

    def __post_init__(self):
        if self.start_day < 0:
            raise ValidationError(f"start_day {self.start_day} is negative")
        if self.end_day < self.start_day:
            raise ValidationError(
                f"end_day {self.end_day} precedes start_day {self.start_day}")


@dataclass(frozen=True, slots=True)
class FeatureSpec:
    """Schema for one baseline feature.

    Numeric features carry a plausibility span [lo, hi] (used by the
    synthetic generator) and an optional clinical reference range
    [ref_lo, ref_hi] used for abnormal-value flags; features without a
    reference range are never flagged. Categorical features carry the
    closed set of admissible levels.
    """

    name: str
    kind: str  # "numeric" | "categorical"
    categories: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 1.0
    units: str = ""
    ref_lo: float | None = None
    ref_hi: float | None = None

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ValidationError(f"feature {self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and len(self.categories) < 2:
            raise ValidationError(
                f"feature {self.name}: categorical needs at least 2 levels")
        if self.kind == "numeric" and not self.lo < self.hi:
            raise ValidationError(f"feature {self.name}: empty range [{self.lo}, {self.hi}]")
        if (self.ref_lo is None) != (self.ref_hi is None):
            raise ValidationError(
                f"feature {self.name}: reference range needs both ends")

    def is_abnormal(self, value: float | str) -> bool | None:
        """True/False against the reference range; None when unflaggable."""
        if self.kind != "numeric" or self.ref_lo is None or self.ref_hi is None:
            return None
        v = float(value)  # type: ignore[arg-type]
        return v < self.ref_lo or v > self.ref_hi

    @property
    def encoded_names(self) -> tuple[str, ...]:
        if self.kind == "numeric":
            return (self.name,)
        return tuple(f"{self.name}={c}" for c in self.categories)

    @property
    def width(self) -> int:
        return 1 if self.kind == "numeric" else len(self.categories)


DEFAULT_FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec("Sex", "categorical", ("F", "M")),
    FeatureSpec("Race", "categorical", ("Asian", "Black", "Other", "White")),
    FeatureSpec("Age", "numeric", lo=21, hi=70, units="years"),
    FeatureSpec("BMI", "numeric", lo=17, hi=45, units="kg/m2",
                ref_lo=18.5, ref_hi=24.9),
    FeatureSpec("Albumin", "numeric", lo=2.0, hi=5.5, units="g/dL",
                ref_lo=3.5, ref_hi=5.0),
    FeatureSpec("ALT", "numeric", lo=10, hi=300, units="U/L",
                ref_lo=7, ref_hi=56),
    FeatureSpec("AST", "numeric", lo=15, hi=400, units="U/L",
                ref_lo=10, ref_hi=40),
    FeatureSpec("AlkalinePhosphatase", "numeric", lo=40, hi=250, units="U/L",
                ref_lo=44, ref_hi=147),
    FeatureSpec("Bilirubin", "numeric", lo=0.3, hi=25, units="mg/dL",
                ref_lo=0.2, ref_hi=1.2),
    FeatureSpec("Creatinine", "numeric", lo=0.5, hi=3.5, units="mg/dL",
                ref_lo=0.6, ref_hi=1.3),
    FeatureSpec("Hemoglobin", "numeric", lo=8, hi=17, units="g/dL",
                ref_lo=12, ref_hi=17),
    FeatureSpec("Platelets", "numeric", lo=40, hi=400, units="10^3/uL",
                ref_lo=150, ref_hi=400),
    FeatureSpec("Sodium", "numeric", lo=125, hi=145, units="mmol/L",
                ref_lo=135, ref_hi=145),
    FeatureSpec("Potassium", "numeric", lo=3.0, hi=5.5, units="mmol/L",
                ref_lo=3.5, ref_hi=5.1),
    FeatureSpec("INR", "numeric", lo=0.9, hi=3.0, ref_lo=0.8, ref_hi=1.1),
    FeatureSpec("WBC", "numeric", lo=2, hi=20, units="10^3/uL",
                ref_lo=4, ref_hi=11),
    FeatureSpec("Glucose", "numeric", lo=70, hi=220, units="mg/dL",
                ref_lo=70, ref_hi=140),
    FeatureSpec("Cholesterol", "numeric", lo=100, hi=280, units="mg/dL",
                ref_lo=125, ref_hi=200),
    FeatureSpec("Triglycerides", "numeric", lo=50, hi=400, units="mg/dL",
                ref_lo=0, ref_hi=150),
    FeatureSpec("DrinksPerDay", "numeric", lo=0.001, hi=20, units="drinks/day"),
    FeatureSpec("YearsDrinking", "numeric", lo=1, hi=40, units="years"),
)


@dataclass(frozen=True)
class CohortConfig:
    """Run configuration: schema, horizon, and severity-code overrides."""

    features: tuple[FeatureSpec, ...] = DEFAULT_FEATURES
    horizon_days: int = HORIZON_DAYS
    coding: SeverityCoding = DEFAULT_CODING

    @classmethod
    def from_json(cls, path: str | Path) -> "CohortConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ValidationError(f"config is not valid JSON: {e}", source=str(path))
        if not isinstance(raw, dict):
            raise ValidationError("config root must be an object", source=str(path))
        features = DEFAULT_FEATURES
        if "features" in raw:
            parsed = []
            for i, item in enumerate(raw["features"]):
                try:
                    kind = item["kind"]
                    ref = item.get("reference_range")
                    spec = FeatureSpec(
                        name=item["name"],
                        kind=kind,
                        categories=tuple(item.get("categories", ())),
                        lo=float(item.get("lo", 0.0)),
                        hi=float(item.get("hi", 1.0)) if kind == "numeric" else 1.0,
                        units=str(item.get("units", "")),
                        ref_lo=float(ref[0]) if ref else None,
                        ref_hi=float(ref[1]) if ref else None,
                    )
                except (KeyError, TypeError, ValueError, IndexError) as e:
                    raise ValidationError(f"bad feature entry {i}: {e}", source=str(path))
                parsed.append(spec)
            features = tuple(parsed)
        horizon = raw.get("horizon_days", HORIZON_DAYS)
        if not isinstance(horizon, int) or horizon < 2:
            raise ValidationError(f"horizon_days must be an int >= 2, got {horizon!r}",
                                  source=str(path))
        coding = DEFAULT_CODING
        if "severity_overrides" in raw:
            overrides = {}
            for name, value in raw["severity_overrides"].items():
                if name not in STATUS_BY_NAME:
                    raise ValidationError(f"unknown status in severity_overrides: {name!r}",
                                          source=str(path))
                overrides[STATUS_BY_NAME[name]] = float(value)
            coding = DEFAULT_CODING.replace(overrides)
        return cls(features=features, horizon_days=horizon, coding=coding)


def build_sequence(records: Sequence[RawEventRecord],
                   horizon_days: int = HORIZON_DAYS) -> tuple[EventStatus, ...]:
    """Daily status sequence for one patient from its raw event records.

    Each day is summarized from the events covering it, then terminal
    statuses are made absorbing: days from the first death or transplant
    onward all read DeathOrTransplant; failing that, days from the first
    study exit onward all read OffStudy.
    """
    active: list[set[RawEventType]] = [set() for _ in range(horizon_days)]
    for rec in records:
        if rec.start_day >= horizon_days:
            continue
        stop = min(rec.end_day, horizon_days - 1)
        for day in range(rec.start_day, stop + 1):
            active[day].add(rec.event)
    seq = [summarize_day(day_events) for day_events in active]
    for terminal in ABSORBING_STATUSES:
        if terminal in seq:
            first = seq.index(terminal)
            seq[first:] = [terminal] * (horizon_days - first)
            break
    return tuple(seq)


def encode_sequence(seq: Sequence[EventStatus], coding: SeverityCoding) -> np.ndarray:
    codes = coding.as_array()
    idx = np.array([s.index for s in seq], dtype=np.intp)
    return codes[idx]


@dataclass(frozen=True)
class Patient:
    """One enrolled subject: identity, arm, baseline values, status sequence."""

    patient_id: str
    arm: str
    baseline: Mapping[str, float | str]
    statuses: tuple[EventStatus, ...]

    def coded(self, coding: SeverityCoding = DEFAULT_CODING) -> np.ndarray:
        return encode_sequence(self.statuses, coding)


@dataclass
class Cohort:
    """All patients plus their raw events and the parse-time schema."""

    patients: list[Patient]
    config: CohortConfig = field(default_factory=CohortConfig)
    raw_events: list[RawEventRecord] = field(default_factory=list)
    imputed: list[tuple[str, str]] = field(default_factory=list)  # (patient_id, feature)

    def __post_init__(self):
        if not self.patients:
            raise ValidationError("cohort is empty")
        seen: set[str] = set()
        for p in self.patients:
            if p.patient_id in seen:
                raise ValidationError(f"duplicate patient_id {p.patient_id!r}")
            seen.add(p.patient_id)
            if len(p.statuses) != self.config.horizon_days:
                raise ValidationError(
                    f"patient {p.patient_id}: sequence length {len(p.statuses)} "
                    f"!= horizon {self.config.horizon_days}")
        for rec in self.raw_events:
            if rec.patient_id not in seen:
                raise ValidationError(
                    f"event references unknown patient {rec.patient_id!r}")
        self._index = {p.patient_id: i for i, p in enumerate(self.patients)}

    def events_of(self, patient_id: str) -> list[RawEventRecord]:
        return [r for r in self.raw_events if r.patient_id == patient_id]

    def __len__(self) -> int:
        return len(self.patients)

    def __getitem__(self, patient_id: str) -> Patient:
        return self.patients[self._index[patient_id]]

    def index_of(self, patient_id: str) -> int:
        return self._index[patient_id]

    @property
    def ids(self) -> list[str]:
        return [p.patient_id for p in self.patients]

    @property
    def arms(self) -> list[str]:
        return [p.arm for p in self.patients]

    @property
    def encoded_feature_names(self) -> list[str]:
        names: list[str] = []
        for spec in self.config.features:
            names.extend(spec.encoded_names)
        return names

    def baseline_matrix(self) -> np.ndarray:
        """Patients x encoded-features matrix; categoricals one-hot."""
        width = sum(spec.width for spec in self.config.features)
        out = np.zeros((len(self.patients), width), dtype=float)
        for i, p in enumerate(self.patients):
            col = 0
            for spec in self.config.features:
                value = p.baseline[spec.name]
                if spec.kind == "numeric":
                    out[i, col] = float(value)  # type: ignore[arg-type]
                    col += 1
                else:
                    out[i, col + spec.categories.index(str(value))] = 1.0
                    col += spec.width
        return out

    def status_array(self) -> np.ndarray:
        """(N, T) array of status row indices, int8."""
        return np.array([[s.index for s in p.statuses] for p in self.patients],
                        dtype=np.int8)

    def coded_matrix(self, coding: SeverityCoding | None = None) -> np.ndarray:
        coding = coding or self.config.coding
        return coding.as_array()[self.status_array().astype(np.intp)]


def _parse_int(text: str, *, source: str, row: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"expected integer, got {text!r}",
                              source=source, row=row, column=column)


def _data_lines(path: str | Path) -> list[str]:
    """File lines minus '#' metadata comments, for the csv readers."""
    with open(path, newline="") as fh:
        return [line for line in fh if not line.startswith("#")]


def parse_events(path: str | Path,
                 horizon_days: int = HORIZON_DAYS) -> dict[str, list[RawEventRecord]]:
    """Read an interval event CSV into per-patient record lists."""
    source = str(path)
    by_patient: dict[str, list[RawEventRecord]] = {}
    reader = csv.DictReader(_data_lines(path))
    required = {"patient_id", "kind", "start_day", "end_day"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ValidationError(
            f"event file needs columns {sorted(required)}, got {reader.fieldnames}",
            source=source)
    last_day = horizon_days - 1
    for rownum, rec in enumerate(reader, start=2):
        pid = (rec["patient_id"] or "").strip()
        if not pid:
            raise ValidationError("empty patient_id", source=source, row=rownum,
                                  column="patient_id")
        name = (rec["kind"] or "").strip()
        if name not in _RAW_BY_NAME:
            raise ValidationError(
                f"unknown event kind {name!r} (expected one of "
                f"{sorted(_RAW_BY_NAME)})",
                source=source, row=rownum, column="kind")
        start = _parse_int(rec["start_day"], source=source, row=rownum,
                           column="start_day")
        end = _parse_int(rec["end_day"], source=source, row=rownum,
                         column="end_day")
        if not 0 <= start <= last_day:
            raise ValidationError(f"start_day {start} outside [0, {last_day}]",
                                  source=source, row=rownum, column="start_day")
        if not start <= end <= last_day:
            raise ValidationError(
                f"end_day {end} outside [start_day, {last_day}]",
                source=source, row=rownum, column="end_day")
        by_patient.setdefault(pid, []).append(
            RawEventRecord(pid, _RAW_BY_NAME[name], start, end))
    return by_patient


def parse_cohort(baseline_path: str | Path, events_path: str | Path,
                 config: CohortConfig | None = None) -> Cohort:
    """Assemble a cohort from a baseline CSV and an event CSV.

    Baseline rows define the patient roster; patients without any event
    rows get all-NoEvent sequences. Empty numeric cells are imputed with
    the cohort median of the observed values for that feature and the
    imputation is recorded on the returned cohort.
    """
    config = config or CohortConfig()
    source = str(baseline_path)
    events = parse_events(events_path, config.horizon_days)

    rows: list[tuple[int, dict[str, str]]] = []
    reader = csv.DictReader(_data_lines(baseline_path))
    fields = reader.fieldnames or []
    required = ["patient_id", "arm"] + [spec.name for spec in config.features]
    missing_cols = [c for c in required if c not in fields]
    if missing_cols:
        raise ValidationError(f"baseline file missing columns {missing_cols}",
                              source=source)
    for rownum, rec in enumerate(reader, start=2):
        rows.append((rownum, rec))
    if not rows:
        raise ValidationError("baseline file has no data rows", source=source)

    # First pass: parse observed numerics so medians are available for imputation.
    observed: dict[str, list[float]] = {spec.name: [] for spec in config.features
                                        if spec.kind == "numeric"}
    for rownum, rec in rows:
        for spec in config.features:
            if spec.kind != "numeric":
                continue
            cell = (rec[spec.name] or "").strip()
            if not cell:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ValidationError(f"expected number, got {cell!r}",
                                      source=source, row=rownum, column=spec.name)
            if not np.isfinite(value):
                raise ValidationError(f"non-finite value {cell!r}",
                                      source=source, row=rownum, column=spec.name)
            observed[spec.name].append(value)
    medians = {}
    for name, values in observed.items():
        if not values:
            raise ValidationError(f"feature {name} has no observed values to impute from",
                                  source=source, column=name)
        medians[name] = statistics.median(values)

    patients: list[Patient] = []
    imputed: list[tuple[str, str]] = []
    for rownum, rec in rows:
        pid = (rec["patient_id"] or "").strip()
        if not pid:
            raise ValidationError("empty patient_id", source=source, row=rownum,
                                  column="patient_id")
        arm = (rec["arm"] or "").strip()
        if not arm:
            raise ValidationError("empty arm", source=source, row=rownum, column="arm")
        baseline: dict[str, float | str] = {}
        for spec in config.features:
            cell = (rec[spec.name] or "").strip()
            if spec.kind == "numeric":
                if cell:
                    baseline[spec.name] = float(cell)
                else:
                    baseline[spec.name] = medians[spec.name]
                    imputed.append((pid, spec.name))
            else:
                if cell not in spec.categories:
                    raise ValidationError(
                        f"value {cell!r} not in categories {list(spec.categories)}",
                        source=source, row=rownum, column=spec.name)
                baseline[spec.name] = cell
        seq = build_sequence(events.get(pid, ()), config.horizon_days)
        patients.append(Patient(pid, arm, baseline, seq))

    roster = {p.patient_id for p in patients}
    orphans = sorted(set(events) - roster)
    if orphans:
        raise ValidationError(
            f"event rows reference patients missing from the baseline file: {orphans[:5]}",
            source=str(events_path))
    flat_events = [rec for pid in events for rec in events[pid]]
    return Cohort(patients, config, flat_events, imputed)


def write_baseline_csv(patients: Iterable[Patient], config: CohortConfig,
                       path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        names = [spec.name for spec in config.features]
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "arm"] + names)
        for p in patients:
            row = [p.patient_id, p.arm]
            for spec in config.features:
                value = p.baseline[spec.name]
                row.append(f"{value:.4f}" if spec.kind == "numeric" else str(value))
            writer.writerow(row)


def write_events_csv(records: Iterable[RawEventRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "kind", "start_day", "end_day"])
        for rec in records:
            writer.writerow([rec.patient_id, rec.event.value, rec.start_day, rec.end_day])

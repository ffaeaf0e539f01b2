"""Synthetic trial cohort generator.

Produces a cohort shaped like a two-arm hepatology trial: every patient
gets baseline labs, an arm, interval event records over a 181-day
horizon, and a hidden outcome archetype written to a sidecar labels file.
The four archetypes separate both in trajectory space and in baseline
space, so the clustering paths have recoverable structure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .artifacts import artifact_header
from .cohort import (
    Cohort,
    CohortConfig,
    Patient,
    RawEventRecord,
    build_sequence,
    write_baseline_csv,
    write_events_csv,
)
from .errors import ValidationError
from .statuses import RawEventType

ARCHETYPES = ("treatment_success", "death_transplant", "sustained_ae", "early_dropoff")

DEFAULT_WEIGHTS: Mapping[str, float] = {
    "treatment_success": 0.40,
    "death_transplant": 0.18,
    "sustained_ae": 0.24,
    "early_dropoff": 0.18,
}

# How sick each archetype reads at baseline, on a 0..1 scale. Labs where
# high is bad sit at lo + s*(hi-lo); labs where low is bad mirror it.
_SEVERITY = {
    "treatment_success": 0.15,
    "early_dropoff": 0.45,
    "sustained_ae": 0.70,
    "death_transplant": 0.92,
}

_LOW_IS_BAD = frozenset({"Albumin", "Hemoglobin", "Platelets", "Sodium"})
_NEUTRAL = frozenset({"Age", "Potassium", "Cholesterol"})

# Arm-assignment tilt per archetype. The arm split is exact (floor(N/2)
# treatment, remainder control); the tilt just skews which archetypes fill
# the treatment arm so arm-level survival curves differ.
_TREATMENT_ARM_TILT = {
    "treatment_success": +0.12,
    "death_transplant": -0.18,
    "sustained_ae": 0.0,
    "early_dropoff": 0.0,
}

# Sustained-AE bursts share fixed anchors across patients, with per-patient
# jitter. That keeps the archetype tight in coded-sequence space.
_AE_ANCHORS = (20, 50, 80, 110, 140, 165)
_AE_KINDS = (RawEventType.AKI, RawEventType.INFECTION, RawEventType.OAE)


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 147
    seed: int = 7
    weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    cohort: CohortConfig = field(default_factory=CohortConfig)

    def __post_init__(self):
        if self.n_patients < len(ARCHETYPES):
            raise ValidationError(
                f"need at least {len(ARCHETYPES)} patients, got {self.n_patients}")
        unknown = set(self.weights) - set(ARCHETYPES)
        if unknown:
            raise ValidationError(f"unknown archetypes in weights: {sorted(unknown)}")
        total = sum(self.weights.values())
        if total <= 0:
            raise ValidationError("archetype weights must sum to a positive value")


@dataclass(frozen=True)
class SynthResult:
    cohort: Cohort
    labels: dict[str, str]  # patient_id -> archetype
    records: list[RawEventRecord]


def apportion(n: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Largest-remainder seat counts for n patients across archetypes.

    Ties on fractional part break by archetype declaration order, so the
    split is deterministic. Every archetype with positive weight gets at
    least one patient when n allows it.
    """
    total = sum(weights.values())
    quotas = {a: n * weights.get(a, 0.0) / total for a in ARCHETYPES}
    counts = {a: int(quotas[a]) for a in ARCHETYPES}
    leftover = n - sum(counts.values())
    by_frac = sorted(ARCHETYPES,
                     key=lambda a: (-(quotas[a] - counts[a]), ARCHETYPES.index(a)))
    for a in by_frac[:leftover]:
        counts[a] += 1
    for a in ARCHETYPES:
        if weights.get(a, 0.0) > 0 and counts[a] == 0:
            donor = max(ARCHETYPES, key=lambda b: counts[b])
            counts[donor] -= 1
            counts[a] += 1
    return counts


def _sample_baseline(archetype: str, config: CohortConfig,
                     rng: np.random.Generator) -> dict[str, float | str]:
    s = _SEVERITY[archetype]
    out: dict[str, float | str] = {}
    for spec in config.features:
        if spec.kind == "categorical":
            # Mild archetype tilt on the first level keeps categoricals informative
            # without dominating the numeric signal.
            p_first = 0.35 + 0.3 * s
            probs = np.full(len(spec.categories), (1 - p_first) / (len(spec.categories) - 1))
            probs[0] = p_first
            out[spec.name] = str(rng.choice(list(spec.categories), p=probs))
            continue
        span = spec.hi - spec.lo
        if spec.name in _NEUTRAL:
            mean = spec.lo + span * (0.45 + 0.1 * s)
        elif spec.name in _LOW_IS_BAD:
            mean = spec.hi - span * s
        else:
            mean = spec.lo + span * s
        value = rng.normal(mean, 0.06 * span)
        out[spec.name] = float(np.clip(value, spec.lo, spec.hi))
    return out


def _events_for(archetype: str, pid: str, horizon: int,
                rng: np.random.Generator) -> list[RawEventRecord]:
    last = horizon - 1
    ev: list[RawEventRecord] = []

    def add(kind: RawEventType, start: int, end: int):
        ev.append(RawEventRecord(pid, kind, int(np.clip(start, 0, last)),
                                 int(np.clip(end, 0, last))))

    if archetype == "treatment_success":
        # Fixed day-0..90 treatment window, nothing after it.
        add(RawEventType.TREATMENT, 0, min(90, last))
        if rng.random() < 0.25:
            start = int(rng.integers(20, 81))
            add(RawEventType.INFECTION, start, min(start + int(rng.integers(3, 7)), 88))
    elif archetype == "death_transplant":
        day = int(rng.integers(14, 27))
        add(RawEventType.TREATMENT, 0, day)
        add(RawEventType.AKI, max(0, day - int(rng.integers(6, 11))), day)
        # Infection may clear a day or two before the terminal event, so some
        # patients pass through a bare-AKI stretch on their way out.
        add(RawEventType.INFECTION, max(0, day - int(rng.integers(3, 8))),
            day - int(rng.integers(0, 3)))
        terminal = (RawEventType.LIVER_TRANSPLANT if rng.random() < 0.3
                    else RawEventType.DEATH)
        add(terminal, day, last)
    elif archetype == "sustained_ae":
        add(RawEventType.TREATMENT, 0, int(rng.integers(160, last + 1)))
        for j, anchor in enumerate(_AE_ANCHORS):
            start = anchor + int(rng.integers(-2, 3))
            add(_AE_KINDS[j % 3], start, start + int(rng.integers(12, 16)))
    elif archetype == "early_dropoff":
        t_off = int(rng.integers(60, 71))
        add(RawEventType.TREATMENT, 0, t_off - 1)
        if rng.random() < 0.4:
            start = int(rng.integers(10, t_off - 12))
            add(RawEventType.OAE, start, start + int(rng.integers(4, 9)))
        add(RawEventType.OFF_STUDY, t_off, last)
    else:  # pragma: no cover
        raise ValidationError(f"unknown archetype {archetype!r}")
    return ev


def generate(config: SynthConfig | None = None) -> SynthResult:
    """Deterministic synthetic cohort for the given config."""
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    counts = apportion(config.n_patients, config.weights)

    assignment = [a for a in ARCHETYPES for _ in range(counts[a])]
    rng.shuffle(assignment)

    # Exact floor(N/2)/ceil(N/2) arm split; archetype tilt decides who fills
    # the treatment arm.
    n_treat = config.n_patients // 2
    priority = rng.random(config.n_patients) + np.array(
        [_TREATMENT_ARM_TILT[a] for a in assignment])
    treat_idx = set(np.argsort(-priority, kind="stable")[:n_treat].tolist())

    pad = len(str(config.n_patients))
    patients: list[Patient] = []
    labels: dict[str, str] = {}
    all_records: list[RawEventRecord] = []
    horizon = config.cohort.horizon_days
    for i, archetype in enumerate(assignment):
        pid = f"P{i + 1:0{pad}d}"
        arm = "treatment" if i in treat_idx else "control"
        baseline = _sample_baseline(archetype, config.cohort, rng)
        records = _events_for(archetype, pid, horizon, rng)
        all_records.extend(records)
        patients.append(Patient(pid, arm, baseline, build_sequence(records, horizon)))
        labels[pid] = archetype
    cohort = Cohort(patients, config.cohort, all_records)
    return SynthResult(cohort, labels, all_records)


def write_synthetic_cohort(outdir: str | Path,
                           config: SynthConfig | None = None) -> dict[str, Path]:
    """Generate and write baseline.csv, events.csv, labels.csv under outdir."""
    config = config or SynthConfig()
    result = generate(config)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "baseline": outdir / "baseline.csv",
        "events": outdir / "events.csv",
        "labels": outdir / "labels.csv",
    }
    params = {"n_patients": config.n_patients,
              "weights": ",".join(f"{a}:{config.weights.get(a, 0.0):g}" for a in ARCHETYPES)}

    header = artifact_header("synthetic-baseline", config.seed, params)
    write_baseline_csv(result.cohort.patients, config.cohort, paths["baseline"])
    _prepend(paths["baseline"], header)

    header = artifact_header("synthetic-events", config.seed, params)
    write_events_csv(result.records, paths["events"])
    _prepend(paths["events"], header)

    header = artifact_header("synthetic-labels", config.seed, params)
    lines = ["patient_id,archetype"]
    lines += [f"{pid},{result.labels[pid]}" for pid in result.cohort.ids]
    paths["labels"].write_text(header + "\n".join(lines) + "\n")
    return paths


def _prepend(path: Path, header: str) -> None:
    body = path.read_text()
    path.write_text(header + body)

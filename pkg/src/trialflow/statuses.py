"""Event vocabulary and the per-day status resolution rules.

Raw follow-up events overlap freely; each patient-day is summarized into
exactly one of nine mutually exclusive statuses by a fixed priority
cascade. Statuses also carry a clinician-derived numeric severity code
used by the knowledge-guided clustering path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import ValidationError


class RawEventType(Enum):
    """The seven raw event kinds accepted at ingestion (case-sensitive)."""

    TREATMENT = "Treatment"
    OAE = "OAE"
    INFECTION = "Infection"
    AKI = "AKI"
    OFF_STUDY = "OffStudy"
    LIVER_TRANSPLANT = "LiverTransplant"
    DEATH = "Death"


class EventStatus(Enum):
    """The nine summarized statuses, declared in trump priority order.

    Declaration order is the priority order (highest first); ``rank`` is
    the 1-based priority and ``index`` the 0-based row used by matrix
    code throughout the engine.
    """

    DEATH_OR_TRANSPLANT = "DeathOrTransplant"
    OFF_STUDY = "OffStudy"
    AKI_PLUS_INFECTION = "AkiPlusInfection"
    AKI = "Aki"
    INFECTION = "Infection"
    OAE = "Oae"
    TREATMENT_PLUS_OAE = "TreatmentPlusOae"
    TREATMENT = "Treatment"
    NO_EVENT = "NoEvent"

    @property
    def rank(self) -> int:
        return STATUS_ORDER.index(self) + 1

    @property
    def index(self) -> int:
        return STATUS_ORDER.index(self)


STATUS_ORDER: tuple[EventStatus, ...] = tuple(EventStatus)
STATUS_BY_NAME: dict[str, EventStatus] = {s.value: s for s in EventStatus}
NUM_STATUSES = len(STATUS_ORDER)

# Statuses that persist to the end of follow-up once entered.
ABSORBING_STATUSES = (EventStatus.DEATH_OR_TRANSPLANT, EventStatus.OFF_STUDY)

# Adverse-event statuses, for severity-code validation and incidence stats.
ADVERSE_STATUSES = frozenset({
    EventStatus.AKI_PLUS_INFECTION,
    EventStatus.AKI,
    EventStatus.INFECTION,
    EventStatus.OAE,
    EventStatus.TREATMENT_PLUS_OAE,
})


def summarize_day(active: frozenset[RawEventType] | set[RawEventType]) -> EventStatus:
    """Resolve the set of events active on one day into a single status.

    Total over all 128 subsets of the raw event kinds. Compound statuses
    match exact co-occurrence; an OAE during treatment summarizes as
    TreatmentPlusOae, an OAE off treatment as Oae.
    """
    if RawEventType.DEATH in active or RawEventType.LIVER_TRANSPLANT in active:
        return EventStatus.DEATH_OR_TRANSPLANT
    if RawEventType.OFF_STUDY in active:
        return EventStatus.OFF_STUDY
    has_aki = RawEventType.AKI in active
    has_infection = RawEventType.INFECTION in active
    if has_aki and has_infection:
        return EventStatus.AKI_PLUS_INFECTION
    if has_aki:
        return EventStatus.AKI
    if has_infection:
        return EventStatus.INFECTION
    has_treatment = RawEventType.TREATMENT in active
    if RawEventType.OAE in active:
        return EventStatus.TREATMENT_PLUS_OAE if has_treatment else EventStatus.OAE
    if has_treatment:
        return EventStatus.TREATMENT
    return EventStatus.NO_EVENT


@dataclass(frozen=True)
class SeverityCoding:
    """Total mapping from status to a real-valued severity code.

    The code order is validated: death/transplant above off-study, both
    above every adverse-event code, and all adverse-event codes above the
    no-event code.
    """

    codes: Mapping[EventStatus, float] = field(default_factory=dict)

    def __post_init__(self):
        missing = [s.value for s in EventStatus if s not in self.codes]
        if missing:
            raise ValidationError(f"severity coding missing statuses: {missing}")
        dot = self.codes[EventStatus.DEATH_OR_TRANSPLANT]
        off = self.codes[EventStatus.OFF_STUDY]
        ae = [self.codes[s] for s in ADVERSE_STATUSES]
        no_event = self.codes[EventStatus.NO_EVENT]
        if not (dot > off > max(ae)):
            raise ValidationError(
                "severity coding must order death/transplant > off-study > adverse events")
        if not min(ae) > no_event:
            raise ValidationError(
                "severity coding must place every adverse-event code above no-event")

    def __getitem__(self, status: EventStatus) -> float:
        return self.codes[status]

    def as_array(self):
        """Codes in status priority order, for vectorized encoding."""
        import numpy as np
        return np.array([self.codes[s] for s in STATUS_ORDER], dtype=float)

    def replace(self, overrides: Mapping[EventStatus, float]) -> "SeverityCoding":
        merged = dict(self.codes)
        merged.update(overrides)
        return SeverityCoding(merged)


DEFAULT_CODING = SeverityCoding({
    EventStatus.DEATH_OR_TRANSPLANT: 20.0,
    EventStatus.OFF_STUDY: 15.0,
    EventStatus.AKI_PLUS_INFECTION: 5.0,
    EventStatus.AKI: 4.0,
    EventStatus.INFECTION: 3.0,
    EventStatus.OAE: 2.0,
    EventStatus.TREATMENT_PLUS_OAE: 2.0,
    EventStatus.TREATMENT: -5.0,
    EventStatus.NO_EVENT: -5.0,
})

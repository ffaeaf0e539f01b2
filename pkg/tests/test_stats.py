import math
from statistics import NormalDist

import numpy as np
import pytest

from trialflow.cohort import Cohort, CohortConfig, Patient, RawEventRecord
from trialflow.errors import EmptyGroup, ValidationError
from trialflow.stats import (
    SurvivalRecord,
    box_summary,
    incidence_summary,
    km_estimate,
    survival_records,
)
from trialflow.statuses import EventStatus, RawEventType

T = EventStatus.TREATMENT
A = EventStatus.AKI
AI = EventStatus.AKI_PLUS_INFECTION
O = EventStatus.OAE
N_ = EventStatus.NO_EVENT
OFF = EventStatus.OFF_STUDY
DOT = EventStatus.DEATH_OR_TRANSPLANT


def rec(pid, time, event):
    return SurvivalRecord(pid, time, event)


FOUR = [rec("a", 1, True), rec("b", 2, True), rec("c", 3, False),
        rec("d", 4, True)]


# ---- product-limit estimator ------------------------------------------------

def test_km_hand_example():
    curve = km_estimate(FOUR)
    assert curve.times == (0, 1, 2, 4)
    assert curve.survival == (1.0, 0.75, 0.5, 0.0)
    assert curve.at_risk == (4, 4, 3, 1)
    assert curve.events == (0, 1, 1, 1)
    assert curve.n_total == 4


def test_km_greenwood_band_hand_values():
    curve = km_estimate(FOUR, confidence=0.95)
    z = NormalDist().inv_cdf(0.975)
    # after the first event: var = 1/(4*3)
    se1 = 0.75 * math.sqrt(1 / 12)
    assert curve.lower[1] == pytest.approx(0.75 - z * se1)
    assert curve.upper[1] == 1.0  # clamped
    # after the second: var = 1/12 + 1/(3*2)
    se2 = 0.5 * math.sqrt(1 / 12 + 1 / 6)
    assert curve.lower[2] == pytest.approx(0.5 - z * se2)
    assert curve.upper[2] == pytest.approx(0.5 + z * se2)
    # last event exhausts the risk set, so the band collapses onto S
    assert curve.lower[3] == curve.upper[3] == 0.0


def test_km_all_censored_stays_flat():
    curve = km_estimate([rec(f"p{i}", 5 + i, False) for i in range(6)])
    assert curve.times == (0,)
    assert curve.survival == (1.0,)
    assert curve.lower == (1.0,) and curve.upper == (1.0,)
    assert curve.at_risk == (6,)


def test_km_event_at_time_zero_skips_prefix_point():
    curve = km_estimate([rec("a", 0, True), rec("b", 3, False)])
    assert curve.times[0] == 0
    assert curve.survival[0] == 0.5
    assert len(curve.times) == 1


def test_km_single_subject_band_collapse():
    curve = km_estimate([rec("a", 2, True)])
    assert curve.survival == (1.0, 0.0)
    assert curve.lower[-1] == curve.upper[-1] == 0.0


def test_km_monotone_and_band_ordering(rng):
    for _ in range(20):
        n = int(rng.integers(1, 40))
        records = [rec(f"p{i}", int(rng.integers(0, 30)), bool(rng.integers(2)))
                   for i in range(n)]
        curve = km_estimate(records)
        s = np.array(curve.survival)
        assert np.all(np.diff(s) <= 0)
        for lo, sv, hi in zip(curve.lower, curve.survival, curve.upper):
            assert 0.0 <= lo <= sv <= hi <= 1.0


def test_km_confidence_changes_band_width():
    narrow = km_estimate(FOUR, confidence=0.5)
    wide = km_estimate(FOUR, confidence=0.99)
    assert narrow.upper[2] - narrow.lower[2] < wide.upper[2] - wide.lower[2]


def test_km_rejects_bad_input():
    with pytest.raises(EmptyGroup):
        km_estimate([])
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(ValidationError):
            km_estimate(FOUR, confidence=bad)


def test_km_as_dict_shape():
    d = km_estimate(FOUR, group="arm A").as_dict()
    assert d["group"] == "arm A"
    assert d["n"] == 4
    assert [p["time"] for p in d["points"]] == [0, 1, 2, 4]
    assert set(d["points"][0]) == {"time", "survival", "lower", "upper",
                                   "at_risk", "events"}


# ---- record extraction ------------------------------------------------------

def tiny_survival_cohort():
    cfg = CohortConfig(horizon_days=6)
    seqs = {
        "p1": (T, T, DOT, DOT, DOT, DOT),       # death at day 2
        "p2": (T, DOT, DOT, DOT, DOT, DOT),     # transplant at day 1
        "p3": (T, T, T, OFF, OFF, OFF),         # leaves the study
        "p4": (N_, N_, N_, N_, N_, N_),         # completes follow-up
    }
    patients = [Patient(pid, "A", {}, statuses)
                for pid, statuses in seqs.items()]
    events = [
        RawEventRecord("p1", RawEventType.DEATH, 2, 2),
        RawEventRecord("p2", RawEventType.LIVER_TRANSPLANT, 1, 1),
        RawEventRecord("p3", RawEventType.OFF_STUDY, 3, 5),
    ]
    return Cohort(patients, cfg, events)


def test_survival_records_events_and_censoring():
    got = {r.patient_id: (r.time, r.event)
           for r in survival_records(tiny_survival_cohort())}
    assert got == {"p1": (2, True), "p2": (1, True),
                   "p3": (3, False), "p4": (5, False)}


def test_transplant_event_switch():
    got = {r.patient_id: (r.time, r.event)
           for r in survival_records(tiny_survival_cohort(),
                                     transplant_as_event=False)}
    # the transplant-only terminal flips to censoring; the death does not
    assert got["p2"] == (1, False)
    assert got["p1"] == (2, True)
    assert got["p3"] == (3, False)


def test_survival_records_cover_cohort(mixture_result):
    cohort = mixture_result.cohort
    records = survival_records(cohort)
    assert len(records) == len(cohort)
    assert {r.patient_id for r in records} == set(cohort.ids)
    horizon_last = cohort.config.horizon_days - 1
    for r in records:
        assert 0 <= r.time <= horizon_last


# ---- box summaries ----------------------------------------------------------

def test_box_plain_five():
    box = box_summary([1, 2, 3, 4, 5], feature="Age", group="all")
    assert (box.q1, box.median, box.q3) == (2.0, 3.0, 4.0)
    assert (box.whisker_low, box.whisker_high) == (1.0, 5.0)
    assert box.outliers == ()
    assert box.n == 5
    assert box.feature == "Age"


def test_box_flags_outlier():
    box = box_summary([1, 2, 3, 4, 100])
    assert (box.q1, box.median, box.q3) == (2.0, 3.0, 4.0)
    assert box.whisker_high == 4.0
    assert box.outliers == (100.0,)


def test_box_order_invariance(rng):
    values = rng.normal(size=30).tolist()
    a = box_summary(values)
    b = box_summary(list(reversed(values)))
    assert a == b


def test_box_constant_values():
    box = box_summary([7.0] * 4)
    assert box.q1 == box.median == box.q3 == 7.0
    assert box.whisker_low == box.whisker_high == 7.0
    assert box.outliers == ()


def test_box_rejects_bad_input():
    with pytest.raises(EmptyGroup):
        box_summary([])
    with pytest.raises(ValidationError):
        box_summary([1.0, float("nan")])


# ---- incidence rollups ------------------------------------------------------

def test_incidence_hand_counts():
    seqs = np.array([
        [A.index, A.index, AI.index, N_.index, N_.index],
        [N_.index, O.index, O.index, OFF.index, OFF.index],
    ])
    inc = incidence_summary(seqs, group="all")
    assert inc.n == 2
    assert inc.adverse["aki"] == {"percent": 50.0, "median_days": 3.0,
                                  "mean_days": 3.0}
    assert inc.adverse["infection"] == {"percent": 50.0, "median_days": 1.0,
                                        "mean_days": 1.0}
    assert inc.adverse["oae"] == {"percent": 50.0, "median_days": 2.0,
                                  "mean_days": 2.0}
    assert inc.death_or_dropoff == {"percent": 50.0, "median_day": 3.0,
                                    "mean_day": 3.0}


def test_incidence_quiet_cohort_uses_nulls():
    seqs = np.full((3, 4), N_.index)
    inc = incidence_summary(seqs)
    for entry in inc.adverse.values():
        assert entry["percent"] == 0.0
        assert entry["median_days"] is None
    assert inc.death_or_dropoff["percent"] == 0.0
    assert inc.death_or_dropoff["median_day"] is None


def test_incidence_rejects_empty():
    with pytest.raises(EmptyGroup):
        incidence_summary(np.zeros((0, 5), dtype=int))

import datetime as dt

import numpy as np
import pytest

from survrisk.records import Encounter, PatientRecord

BASE = dt.date(2015, 1, 1)


def day(offset: int) -> dt.date:
    return BASE + dt.timedelta(days=int(offset))


def make_record(pid="p1", enc_days=(0, 100, 400), diagnoses=(), medications=(),
                vitals=None, birth_years=50, gender="F", race="groupA",
                marital="single", family=(), social=()):
    """Quick PatientRecord: day offsets from BASE, (code, day) pairs."""
    vitals = vitals or {}
    encounters = [
        Encounter(pid, day(d), dict(vitals.get(d, {}))) for d in enc_days
    ]
    return PatientRecord(
        patient_id=pid,
        birth_date=BASE - dt.timedelta(days=round(birth_years * 365.25)),
        gender=gender,
        race=race,
        marital_status=marital,
        encounters=encounters,
        diagnoses=[(code, day(d)) for code, d in diagnoses],
        medications=[(code, day(d)) for code, d in medications],
        family_history=frozenset(family),
        social_history=frozenset(social),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(321)

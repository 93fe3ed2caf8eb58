"""Longitudinal patient records and the four-file CSV bundle.

The bundle layout:

* ``encounters.csv``  patient_id,date,vital_name,vital_value (one row per
  vital; empty vital columns for an encounter without measurements)
* ``diagnoses.csv``   patient_id,date,icd10
* ``medications.csv`` patient_id,date,gpi
* ``patients.csv``    patient_id,birth_date,gender,race,marital_status,
  family_history,social_history (history columns ';'-separated)

Dates are ISO-8601.  Rows with unparseable dates and duplicate
(patient, date, code) rows are dropped and counted in the parse log.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import BundleFormatError

_CATEGORY_RE = re.compile(r"^[A-Z][0-9]{2}$")
_PATTERN_RE = re.compile(
    r"^(?:\[(?P<blo>[A-Z][0-9]{2})-(?P<bhi>[A-Z][0-9]{2})\]|"
    r"(?P<rlo>[A-Z][0-9]{2})-(?P<rhi>[A-Z][0-9]{2})|"
    r"(?P<cat>[A-Z][0-9]{2}))(?P<suffix>\..+)?$"
)


@dataclass(frozen=True)
class CodePattern:
    """Matcher over ICD-10-style codes.

    Supports single category prefixes ("E11", "E78.0"), category ranges
    ("I10-I13"), and ranges with a required suffix ("[E08-E13].22").
    A code matches when its 3-character category falls in [lo, hi] and the
    remainder starts with ``suffix``.
    """

    lo: str
    hi: str
    suffix: str = ""

    @classmethod
    def parse(cls, text: str) -> "CodePattern":
        m = _PATTERN_RE.match(text.strip().upper())
        if m is None:
            raise ValueError(f"unparseable code pattern: {text!r}")
        if m.group("cat"):
            lo = hi = m.group("cat")
        else:
            lo = m.group("blo") or m.group("rlo")
            hi = m.group("bhi") or m.group("rhi")
        if lo > hi:
            raise ValueError(f"empty code range: {text!r}")
        return cls(lo=lo, hi=hi, suffix=m.group("suffix") or "")

    def matches(self, code: str) -> bool:
        code = code.strip().upper()
        if len(code) < 3:
            return False
        category = code[:3]
        if not _CATEGORY_RE.match(category):
            return False
        rest = code[3:]
        if rest and not rest.startswith("."):
            return False  # dotted code form only; E110 is not an expansion of E11
        return self.lo <= category <= self.hi and rest.startswith(self.suffix)


def parse_patterns(texts) -> tuple[CodePattern, ...]:
    return tuple(CodePattern.parse(t) for t in texts)


def matches_any(patterns, code: str) -> bool:
    return any(p.matches(code) for p in patterns)


@dataclass(frozen=True)
class Encounter:
    patient_id: str
    date: dt.date
    vitals: dict = field(default_factory=dict)


@dataclass
class PatientRecord:
    """One de-identified patient: encounters, coded history, demographics."""

    patient_id: str
    birth_date: dt.date
    gender: str
    race: str
    marital_status: str
    encounters: list  # list[Encounter], ascending by date
    diagnoses: list  # list[(icd10 code, date)]
    medications: list  # list[(gpi code, date)]
    family_history: frozenset = frozenset()
    social_history: frozenset = frozenset()

    def __post_init__(self):
        if not self.encounters:
            raise ValueError(f"patient {self.patient_id}: no encounters")
        self.encounters = sorted(self.encounters, key=lambda e: e.date)
        self.diagnoses = sorted(self.diagnoses, key=lambda d: (d[1], d[0]))
        self.medications = sorted(self.medications, key=lambda m: (m[1], m[0]))

    def truncated(self, cutoff: dt.date) -> "PatientRecord":
        """Copy of the record with everything dated after ``cutoff`` removed."""
        return PatientRecord(
            patient_id=self.patient_id,
            birth_date=self.birth_date,
            gender=self.gender,
            race=self.race,
            marital_status=self.marital_status,
            encounters=[e for e in self.encounters if e.date <= cutoff],
            diagnoses=[d for d in self.diagnoses if d[1] <= cutoff],
            medications=[m for m in self.medications if m[1] <= cutoff],
            family_history=self.family_history,
            social_history=self.social_history,
        )


@dataclass
class ParseLog:
    bad_dates: int = 0
    bad_values: int = 0
    duplicate_rows: int = 0
    orphan_rows: int = 0
    patients_without_encounters: int = 0


_HEADERS = {
    "encounters.csv": ["patient_id", "date", "vital_name", "vital_value"],
    "diagnoses.csv": ["patient_id", "date", "icd10"],
    "medications.csv": ["patient_id", "date", "gpi"],
    "patients.csv": [
        "patient_id",
        "birth_date",
        "gender",
        "race",
        "marital_status",
        "family_history",
        "social_history",
    ],
}


def _read_rows(bundle_dir: Path, name: str) -> list[list[str]]:
    path = bundle_dir / name
    if not path.is_file():
        raise BundleFormatError(f"missing bundle file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BundleFormatError(f"{name}: empty file") from None
        if header != _HEADERS[name]:
            raise BundleFormatError(f"{name}: malformed header {header!r}")
        return [row for row in reader if row]


def _parse_date(text: str) -> Optional[dt.date]:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        return None


def parse_records(bundle_dir) -> tuple[list[PatientRecord], ParseLog]:
    """Read a CSV bundle into PatientRecords, sorted by patient_id."""
    bundle_dir = Path(bundle_dir)
    log = ParseLog()

    demo = {}
    for row in _read_rows(bundle_dir, "patients.csv"):
        pid, birth, gender, race, marital, fam, soc = row
        birth_date = _parse_date(birth)
        if birth_date is None:
            log.bad_dates += 1
            continue
        if pid in demo:
            log.duplicate_rows += 1
            continue
        demo[pid] = (
            birth_date,
            gender,
            race,
            marital,
            frozenset(t for t in fam.split(";") if t),
            frozenset(t for t in soc.split(";") if t),
        )

    encounters: dict[str, dict[dt.date, dict]] = {}
    seen_vitals = set()
    for row in _read_rows(bundle_dir, "encounters.csv"):
        pid, date_s, vname, vvalue = row
        date = _parse_date(date_s)
        if date is None:
            log.bad_dates += 1
            continue
        if pid not in demo:
            log.orphan_rows += 1
            continue
        vitals = encounters.setdefault(pid, {}).setdefault(date, {})
        if vname:
            if (pid, date, vname) in seen_vitals:
                log.duplicate_rows += 1
                continue
            seen_vitals.add((pid, date, vname))
            try:
                vitals[vname] = float(vvalue)
            except ValueError:
                log.bad_values += 1

    def read_coded(name: str) -> dict[str, list]:
        out: dict[str, list] = {}
        seen = set()
        for row in _read_rows(bundle_dir, name):
            pid, date_s, code = row
            date = _parse_date(date_s)
            if date is None:
                log.bad_dates += 1
                continue
            if pid not in demo:
                log.orphan_rows += 1
                continue
            key = (pid, date, code)
            if key in seen:
                log.duplicate_rows += 1
                continue
            seen.add(key)
            out.setdefault(pid, []).append((code, date))
        return out

    diagnoses = read_coded("diagnoses.csv")
    medications = read_coded("medications.csv")

    records = []
    for pid in sorted(demo):
        if pid not in encounters:
            log.patients_without_encounters += 1
            continue
        birth_date, gender, race, marital, fam, soc = demo[pid]
        encs = [Encounter(pid, d, vitals) for d, vitals in sorted(encounters[pid].items())]
        records.append(
            PatientRecord(
                patient_id=pid,
                birth_date=birth_date,
                gender=gender,
                race=race,
                marital_status=marital,
                encounters=encs,
                diagnoses=diagnoses.get(pid, []),
                medications=medications.get(pid, []),
                family_history=fam,
                social_history=soc,
            )
        )
    if not records:
        raise BundleFormatError(f"bundle at {bundle_dir} produced no patient records")
    return records, log


def write_bundle(records: list[PatientRecord], bundle_dir) -> None:
    """Write records back out as a canonical CSV bundle (sorted, ISO dates)."""
    bundle_dir = Path(bundle_dir)
    bundle_dir.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: r.patient_id)

    with open(bundle_dir / "patients.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HEADERS["patients.csv"])
        for r in records:
            w.writerow(
                [
                    r.patient_id,
                    r.birth_date.isoformat(),
                    r.gender,
                    r.race,
                    r.marital_status,
                    ";".join(sorted(r.family_history)),
                    ";".join(sorted(r.social_history)),
                ]
            )

    with open(bundle_dir / "encounters.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HEADERS["encounters.csv"])
        for r in records:
            for enc in r.encounters:
                if enc.vitals:
                    for name in sorted(enc.vitals):
                        w.writerow([r.patient_id, enc.date.isoformat(), name, repr(enc.vitals[name])])
                else:
                    w.writerow([r.patient_id, enc.date.isoformat(), "", ""])

    for name, attr in [("diagnoses.csv", "diagnoses"), ("medications.csv", "medications")]:
        with open(bundle_dir / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_HEADERS[name])
            for r in records:
                for code, date in getattr(r, attr):
                    w.writerow([r.patient_id, date.isoformat(), code])

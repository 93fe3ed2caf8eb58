"""Retrospective cohort construction.

Takes parsed patient records through eligibility screening, per-patient
cutoff selection under one of three strategies, feature extraction, class
balancing, and a stratified train/validation/test split.

Cutoff strategies (normal patients anchor on their last encounter, diagnosed
patients on their diagnosis date; diagnosed patients are handled identically
under all three):

* ``similar``   earliest encounter inside the final window before the anchor,
  so every observation time is at most the window length.
* ``overlap``   the patient's second encounter regardless of the window.
* ``distinct``  the latest encounter strictly before the window starts, so
  normal observation times always exceed the window length.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import BalanceError, ConfigError, DataError
from .features import FeatureSpec, check_vitals_known, extract_features
from .records import PatientRecord, matches_any, parse_patterns


class Approach(str, Enum):
    SIMILAR = "similar"
    OVERLAP = "overlap"
    DISTINCT = "distinct"


@dataclass
class CohortSpec:
    disease_codes: list
    window_days: int = 365
    approach: Approach = Approach.SIMILAR
    min_encounters: int = 3
    min_span_days: int = 365
    balance_ratio: float = 1.0
    split_fractions: tuple = (0.70, 0.10, 0.20)
    seed: int = 0

    def __post_init__(self):
        self.approach = Approach(self.approach)
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        if not self.disease_codes:
            raise ConfigError("disease_codes must be nonempty")
        if self.window_days < 1:
            raise ConfigError("window_days must be >= 1")
        if self.min_encounters < 1 or self.min_span_days < 1:
            raise ConfigError("min_encounters and min_span_days must be >= 1")
        if self.balance_ratio <= 0:
            raise ConfigError("balance_ratio must be positive")
        if len(self.split_fractions) != 3 or any(not 0 < f < 1 for f in self.split_fractions):
            raise ConfigError("split_fractions must be three values in (0, 1)")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError("split_fractions must sum to 1")
        self._patterns = parse_patterns(self.disease_codes)

    @property
    def patterns(self):
        return self._patterns


@dataclass(frozen=True)
class LabeledSample:
    patient_id: str
    cutoff_date: dt.date
    time_days: int
    event: int
    features: np.ndarray


@dataclass
class CohortLog:
    exclusions: list = field(default_factory=list)  # (patient_id, reason)
    tie_count: int = 0

    def exclusion_counts(self) -> dict:
        counts: dict = {}
        for _, reason in self.exclusions:
            counts[reason] = counts.get(reason, 0) + 1
        return counts


def diagnosis_date(record: PatientRecord, spec: CohortSpec) -> Optional[dt.date]:
    """Earliest date of any diagnosis matching the disease code patterns."""
    dates = [d for code, d in record.diagnoses if matches_any(spec.patterns, code)]
    return min(dates) if dates else None


def eligibility_filter(records, spec: CohortSpec):
    """Split records into eligible diagnosed/normal groups plus an exclusion log.

    Normals need ``min_encounters`` encounters spanning ``min_span_days`` and
    no matching diagnosis ever; diagnosed patients need ``min_encounters``
    encounters strictly before the diagnosis date.
    """
    events, normals, log = [], [], CohortLog()
    for record in records:
        diag = diagnosis_date(record, spec)
        if diag is None:
            if len(record.encounters) < spec.min_encounters:
                log.exclusions.append((record.patient_id, "too_few_encounters"))
                continue
            span = (record.encounters[-1].date - record.encounters[0].date).days
            if span < spec.min_span_days:
                log.exclusions.append((record.patient_id, f"span<{spec.min_span_days}"))
                continue
            normals.append(record)
        else:
            prior = sum(1 for e in record.encounters if e.date < diag)
            if prior < spec.min_encounters:
                log.exclusions.append((record.patient_id, "insufficient_history"))
                continue
            events.append(record)
    return events, normals, log


@dataclass(frozen=True)
class Cutoff:
    cutoff_date: dt.date
    time_days: int
    event: int


def select_cutoff(record: PatientRecord, spec: CohortSpec, log: Optional[CohortLog] = None) -> Optional[Cutoff]:
    """Choose the prediction-time encounter, or None when none qualifies.

    Diagnosed patients use the earliest encounter inside the half-open window
    ``[anchor - window_days, anchor)`` regardless of approach; normals follow
    the configured approach.
    """
    diag = diagnosis_date(record, spec)
    window = dt.timedelta(days=spec.window_days)
    if diag is not None:
        anchor = diag
        candidates = [e for e in record.encounters if anchor - window <= e.date < anchor]
        chosen = candidates[0] if candidates else None
        event = 1
    else:
        anchor = record.encounters[-1].date
        event = 0
        if spec.approach is Approach.SIMILAR:
            candidates = [e for e in record.encounters if anchor - window <= e.date < anchor]
            chosen = candidates[0] if candidates else None
        elif spec.approach is Approach.OVERLAP:
            chosen = record.encounters[1] if len(record.encounters) >= 2 else None
        else:
            candidates = [e for e in record.encounters if e.date < anchor - window]
            chosen = candidates[-1] if candidates else None
    if chosen is None:
        return None
    if log is not None and sum(1 for e in record.encounters if e.date == chosen.date) > 1:
        log.tie_count += 1
    time_days = (anchor - chosen.date).days
    if time_days <= 0:
        return None
    return Cutoff(cutoff_date=chosen.date, time_days=time_days, event=event)


def build_samples(records, spec: CohortSpec, feature_specs: list[FeatureSpec]):
    """Eligibility + cutoff + feature extraction for a record set."""
    check_vitals_known(records, feature_specs)
    events, normals, log = eligibility_filter(records, spec)
    samples = []
    for record in events + normals:
        cut = select_cutoff(record, spec, log)
        if cut is None:
            log.exclusions.append((record.patient_id, "no_qualifying_encounter"))
            continue
        feats = extract_features(record, cut.cutoff_date, feature_specs)
        samples.append(
            LabeledSample(
                patient_id=record.patient_id,
                cutoff_date=cut.cutoff_date,
                time_days=cut.time_days,
                event=cut.event,
                features=feats,
            )
        )
    samples.sort(key=lambda s: s.patient_id)
    return samples, log


@dataclass
class SplitDataset:
    train: list
    validation: list
    test: list

    def splits(self):
        return (("train", self.train), ("validation", self.validation), ("test", self.test))


def _allocate(n: int, fractions: tuple) -> tuple[int, int, int]:
    n_train = round(fractions[0] * n)
    n_val = round(fractions[1] * n)
    return n_train, n_val, n - n_train - n_val


def balance_and_split(samples, spec: CohortSpec) -> SplitDataset:
    """Seeded majority under-sampling, then a stratified 3-way shuffle split."""
    ids = [s.patient_id for s in samples]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate patient_id among samples")
    pos = [s for s in samples if s.event == 1]
    neg = [s for s in samples if s.event == 0]
    if not pos or not neg:
        raise BalanceError("cannot balance: one class is empty")

    rng = np.random.default_rng(spec.seed)
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    target = min(len(majority), round(spec.balance_ratio * len(minority)))
    if target < 1:
        raise BalanceError("balance_ratio leaves the majority class empty")
    keep = np.sort(rng.choice(len(majority), size=target, replace=False))
    majority = [majority[i] for i in keep]

    parts: dict = {"train": [], "validation": [], "test": []}
    for group in (minority, majority):
        perm = rng.permutation(len(group))
        n_train, n_val, n_test = _allocate(len(group), spec.split_fractions)
        shuffled = [group[i] for i in perm]
        parts["train"] += shuffled[:n_train]
        parts["validation"] += shuffled[n_train:n_train + n_val]
        parts["test"] += shuffled[n_train + n_val:]
    for name in parts:
        order = rng.permutation(len(parts[name]))
        parts[name] = [parts[name][i] for i in order]
    return SplitDataset(train=parts["train"], validation=parts["validation"], test=parts["test"])


def sample_arrays(samples):
    """(X, times, events, patient_ids) numpy views over a sample list."""
    X = np.array([s.features for s in samples], dtype=np.int64)
    times = np.array([s.time_days for s in samples], dtype=float)
    events = np.array([s.event for s in samples], dtype=np.int64)
    pids = [s.patient_id for s in samples]
    return X, times, events, pids


def write_samples_csv(dataset: SplitDataset, path, n_features: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["patient_id", "cutoff_date", "time_days", "event"]
    header += [f"f_{i}" for i in range(n_features)]
    header += ["split"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for split_name, samples in dataset.splits():
            for s in samples:
                row = [s.patient_id, s.cutoff_date.isoformat(), s.time_days, s.event]
                row += [int(v) for v in s.features]
                row += [split_name]
                w.writerow(row)


def read_samples_csv(path) -> SplitDataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"samples file not found: {path} (run `prepare` first)")
    parts: dict = {"train": [], "validation": [], "test": []}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:4] != ["patient_id", "cutoff_date", "time_days", "event"] or header[-1] != "split":
            raise DataError(f"{path}: malformed samples header")
        n_features = len(header) - 5
        for row in reader:
            if not row:
                continue
            feats = np.array([int(v) for v in row[4:4 + n_features]], dtype=np.int64)
            sample = LabeledSample(
                patient_id=row[0],
                cutoff_date=dt.date.fromisoformat(row[1]),
                time_days=int(row[2]),
                event=int(row[3]),
                features=feats,
            )
            if row[-1] not in parts:
                raise DataError(f"{path}: unknown split {row[-1]!r}")
            parts[row[-1]].append(sample)
    return SplitDataset(train=parts["train"], validation=parts["validation"], test=parts["test"])

"""Synthetic EMR-like cohort generator with known hazard structure.

Each patient draws categorical features, then a diagnosis month from a
discrete-time hazard (30-day months): ``h = logistic(logit(baseline) +
sum(effects))`` held constant over the follow-up, so the event probability
has the closed form ``1 - (1 - h)^months``.  Drawn features are written into
the record stream so the cohort pipeline can recover them: binary features
as a diagnosis code at the first encounter, wider features as a vital
measurement.  Zero-effect binary features occasionally also appear late in
follow-up ("incident" codes), which keeps temporal-leakage checks
non-vacuous without touching the hazard.

Setting ``latent_flip`` ties the listed features to a hidden 50/50 risk
group (feature = group XOR noise), which produces separable cohorts at
moderate per-feature effect sizes; leaving it None draws features
independently and uniformly.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from math import log
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import FeatureSpec, FeatureKind
from .records import Encounter, PatientRecord

BASE_DATE = dt.date(2010, 1, 1)
DAYS_PER_MONTH = 30


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


@dataclass
class SynthSpec:
    n_patients: int
    arities: tuple
    effects: tuple  # per feature, per category log-hazard offsets
    baseline_monthly_hazard: float = 0.01
    encounters_per_year: float = 10.0
    follow_up_years: float = 5.0
    censoring_rate: float = 0.0
    latent_flip: float = None  # when set, latent_features follow a hidden group
    latent_features: tuple = ()
    disease_code: str = "Z99"
    seed: int = 0

    def __post_init__(self):
        self.arities = tuple(int(a) for a in self.arities)
        self.effects = tuple(tuple(float(w) for w in row) for row in self.effects)
        self.latent_features = tuple(int(j) for j in self.latent_features)
        if self.n_patients < 1:
            raise ConfigError("n_patients must be >= 1")
        if len(self.arities) != len(self.effects):
            raise ConfigError("arities and effects must have equal length")
        if len(self.arities) > 100:
            raise ConfigError("at most 100 synthetic features are supported")
        if any(a < 2 for a in self.arities):
            raise ConfigError("feature arity must be >= 2")
        for j, (a, row) in enumerate(zip(self.arities, self.effects)):
            if len(row) != a:
                raise ConfigError(f"feature {j}: expected {a} effect entries")
        if not 0.0 < self.baseline_monthly_hazard < 1.0:
            raise ConfigError("baseline_monthly_hazard must lie in (0, 1)")
        if self.latent_flip is not None and not 0.0 <= self.latent_flip <= 0.5:
            raise ConfigError("latent_flip must lie in [0, 0.5]")
        if self.latent_flip is not None and any(
            self.arities[j] != 2 for j in self.latent_features
        ):
            raise ConfigError("latent features must be binary")
        if not 0.0 <= self.censoring_rate < 1.0:
            raise ConfigError("censoring_rate must lie in [0, 1)")
        # hazard saturation: the extreme linear predictors must stay inside (0, 1)
        base_logit = log(self.baseline_monthly_hazard / (1.0 - self.baseline_monthly_hazard))
        lo = base_logit + sum(min(row) for row in self.effects)
        hi = base_logit + sum(max(row) for row in self.effects)
        if _sigmoid(hi) >= 1.0 or _sigmoid(lo) <= 0.0:
            raise ConfigError("hazard saturates: effects push the monthly hazard to 0 or 1")
        self._base_logit = base_logit

    @property
    def n_features(self) -> int:
        return len(self.arities)

    @property
    def months(self) -> int:
        return round(self.follow_up_years * 12)

    @property
    def follow_up_days(self) -> int:
        return self.months * DAYS_PER_MONTH


def feature_code(j: int) -> str:
    """ICD-like code representing synthetic binary feature j."""
    return f"X{j:02d}"


def feature_specs(spec: SynthSpec) -> list:
    """Extraction specs that recover the drawn features from the records."""
    out = []
    for j, arity in enumerate(spec.arities):
        if arity == 2:
            out.append(FeatureSpec(name=f"feat_{j}", kind=FeatureKind.CODE_PRESENCE,
                                   patterns=(feature_code(j),)))
        else:
            edges = tuple(c + 0.5 for c in range(1, arity - 1))
            out.append(FeatureSpec(name=f"feat_{j}", kind=FeatureKind.BINNED_NUMERIC,
                                   vital=f"v{j}", bin_edges=edges))
    return out


@dataclass
class GroundTruth:
    patient_id: str
    linear_predictor: float
    monthly_hazard: float
    event: int
    diagnosis_day: int = -1  # -1 when never diagnosed inside follow-up


_GENDERS = ("F", "M")
_RACES = ("groupA", "groupB", "groupC")
_MARITAL = ("married", "single")


def _generate_patient(spec: SynthSpec, i: int):
    rng = np.random.default_rng([spec.seed, i])
    pid = f"p{i:06d}"

    cats = np.empty(spec.n_features, dtype=np.int64)
    latent = bool(rng.random() < 0.5) if spec.latent_flip is not None else False
    for j, arity in enumerate(spec.arities):
        if spec.latent_flip is not None and j in spec.latent_features:
            flip = rng.random() < spec.latent_flip
            cats[j] = int(latent != flip)
        else:
            cats[j] = int(rng.integers(0, arity))

    eta = spec._base_logit + sum(spec.effects[j][cats[j]] for j in range(spec.n_features))
    hazard = _sigmoid(eta)
    if not 0.0 < hazard < 1.0:
        raise ConfigError(f"hazard saturates for patient {pid}")

    end_day = spec.follow_up_days
    if spec.censoring_rate > 0.0 and rng.random() < spec.censoring_rate:
        end_day = int(rng.integers(1, spec.follow_up_days + 1))

    diagnosis_month = int(rng.geometric(hazard))
    diagnosis_day = diagnosis_month * DAYS_PER_MONTH
    event = int(diagnosis_month <= spec.months and diagnosis_day <= end_day)

    mean_gap = 365.25 / spec.encounters_per_year
    days = [0]
    day = 0
    while True:
        day += max(1, int(round(float(rng.exponential(mean_gap)))))
        if day > end_day:
            break
        days.append(day)

    vitals_day0 = {}
    diagnoses = []
    for j, arity in enumerate(spec.arities):
        if arity == 2:
            if cats[j] == 1:
                diagnoses.append((feature_code(j), BASE_DATE))
            elif max(spec.effects[j]) == min(spec.effects[j]) and rng.random() < 0.3:
                # incident zero-effect code late in follow-up
                late = int(rng.integers(max(1, int(0.6 * end_day)), end_day + 1))
                diagnoses.append((feature_code(j), BASE_DATE + dt.timedelta(days=late)))
        elif cats[j] >= 1:
            vitals_day0[f"v{j}"] = float(cats[j])
    if event:
        diagnoses.append((spec.disease_code, BASE_DATE + dt.timedelta(days=diagnosis_day)))

    encounters = [
        Encounter(pid, BASE_DATE + dt.timedelta(days=d), vitals_day0 if d == 0 else {})
        for d in days
    ]
    birth_years = int(rng.integers(30, 80))
    record = PatientRecord(
        patient_id=pid,
        birth_date=BASE_DATE - dt.timedelta(days=round(birth_years * 365.25)),
        gender=_GENDERS[int(rng.integers(0, len(_GENDERS)))],
        race=_RACES[int(rng.integers(0, len(_RACES)))],
        marital_status=_MARITAL[int(rng.integers(0, len(_MARITAL)))],
        encounters=encounters,
        diagnoses=diagnoses,
        medications=[],
    )
    truth = GroundTruth(
        patient_id=pid,
        linear_predictor=float(eta),
        monthly_hazard=float(hazard),
        event=event,
        diagnosis_day=diagnosis_day if event else -1,
    )
    return record, truth


def generate(spec: SynthSpec):
    """(records, ground truth rows), deterministic per (seed, patient index)."""
    records, truths = [], []
    for i in range(spec.n_patients):
        record, truth = _generate_patient(spec, i)
        records.append(record)
        truths.append(truth)
    return records, truths


def oracle_rank(truths) -> list:
    """Patient ids ordered by true linear predictor, most at-risk first."""
    return [t.patient_id for t in sorted(truths, key=lambda t: (-t.linear_predictor, t.patient_id))]


def oracle_predictors(truths) -> dict:
    return {t.patient_id: t.linear_predictor for t in truths}


def expected_event_rate(truths, months: int) -> float:
    """Mean analytic event probability 1 - (1 - h)^months over patients."""
    probs = [1.0 - (1.0 - t.monthly_hazard) ** months for t in truths]
    return float(np.mean(probs))


def write_ground_truth(truths, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "linear_predictor", "monthly_hazard", "event", "diagnosis_day"])
        for t in truths:
            w.writerow([t.patient_id, repr(t.linear_predictor), repr(t.monthly_hazard),
                        t.event, t.diagnosis_day])


def separable_spec(n_patients: int = 5000, n_features: int = 20, effect_weight: float = 2.0,
                   n_informative: int = 10, latent_flip: float = 0.08,
                   sick_monthly_hazard: float = 0.05, seed: int = 0, **overrides) -> SynthSpec:
    """Well-separated binary cohort: informative features follow a hidden
    risk group whose members are almost surely diagnosed inside follow-up."""
    if n_informative > n_features:
        raise ConfigError("n_informative cannot exceed n_features")
    sick_mean_effect = effect_weight * n_informative * (1.0 - latent_flip)
    base_logit = log(sick_monthly_hazard / (1.0 - sick_monthly_hazard)) - sick_mean_effect
    baseline = _sigmoid(base_logit)
    effects = tuple(
        (0.0, effect_weight) if j < n_informative else (0.0, 0.0)
        for j in range(n_features)
    )
    return SynthSpec(
        n_patients=n_patients,
        arities=(2,) * n_features,
        effects=effects,
        baseline_monthly_hazard=float(baseline),
        latent_flip=latent_flip,
        latent_features=tuple(range(n_informative)),
        seed=seed,
        **overrides,
    )


def mixed_spec(n_patients: int = 5000, n_features: int = 20, effect_weight: float = 0.5,
               n_informative: int = 10, mean_monthly_hazard: float = 0.015,
               seed: int = 0, **overrides) -> SynthSpec:
    """Overlapping-class binary cohort: independent uniform features with
    weak additive effects, so trees mix diagnosed and normal patients in the
    same leaves (the regime where survival-curve diagnostics get interesting)."""
    if n_informative > n_features:
        raise ConfigError("n_informative cannot exceed n_features")
    base_logit = (log(mean_monthly_hazard / (1.0 - mean_monthly_hazard))
                  - effect_weight * n_informative * 0.5)
    effects = tuple(
        (0.0, effect_weight) if j < n_informative else (0.0, 0.0)
        for j in range(n_features)
    )
    return SynthSpec(
        n_patients=n_patients,
        arities=(2,) * n_features,
        effects=effects,
        baseline_monthly_hazard=float(_sigmoid(base_logit)),
        seed=seed,
        **overrides,
    )

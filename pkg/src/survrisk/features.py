"""Categorical feature extraction at a cutoff encounter.

Every feature maps to a finite category set with category 0 reserved for
missing/absent, and is computed strictly from information dated at or
before the cutoff date.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError
from .records import CodePattern, PatientRecord, parse_patterns

DAYS_PER_YEAR = 365.25


class FeatureKind(str, Enum):
    CODE_PRESENCE = "code_presence"
    COMORBIDITY_GROUP = "comorbidity_group"
    MEDICATION_PREFIX = "medication_prefix"
    FAMILY_HISTORY = "family_history"
    SOCIAL_HISTORY = "social_history"
    BINNED_NUMERIC = "binned_numeric"
    DURATION_SINCE_FIRST = "duration_since_first"
    DEMOGRAPHIC = "demographic"


_PRESENCE_KINDS = (FeatureKind.CODE_PRESENCE, FeatureKind.COMORBIDITY_GROUP)


@dataclass(frozen=True)
class FeatureSpec:
    """One categorical feature definition.

    Which optional fields apply depends on ``kind``: code kinds use
    ``patterns``, medications use ``prefix``, histories use ``token``,
    binned vitals use ``vital`` and ``bin_edges``, durations use
    ``patterns`` and ``bin_edges`` (years), demographics use ``field_name``
    plus ``bin_edges`` (age) or ``categories``.
    """

    name: str
    kind: FeatureKind
    patterns: tuple = ()
    prefix: str = ""
    token: str = ""
    vital: str = ""
    bin_edges: tuple = ()
    field_name: str = ""
    categories: tuple = ()

    def __post_init__(self):
        kind = FeatureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "bin_edges", tuple(float(e) for e in self.bin_edges))
        object.__setattr__(self, "categories", tuple(self.categories))
        if any(b <= a for a, b in zip(self.bin_edges, self.bin_edges[1:])):
            raise ConfigError(f"feature {self.name}: bin edges must be strictly increasing")
        if kind in _PRESENCE_KINDS or kind is FeatureKind.DURATION_SINCE_FIRST:
            if not self.patterns:
                raise ConfigError(f"feature {self.name}: code patterns required")
        if kind is FeatureKind.MEDICATION_PREFIX and not self.prefix:
            raise ConfigError(f"feature {self.name}: GPI prefix required")
        if kind in (FeatureKind.FAMILY_HISTORY, FeatureKind.SOCIAL_HISTORY) and not self.token:
            raise ConfigError(f"feature {self.name}: history token required")
        if kind is FeatureKind.BINNED_NUMERIC and (not self.vital or not self.bin_edges):
            raise ConfigError(f"feature {self.name}: vital name and bin edges required")
        if kind is FeatureKind.DURATION_SINCE_FIRST and not self.bin_edges:
            raise ConfigError(f"feature {self.name}: duration bin edges required")
        if kind is FeatureKind.DEMOGRAPHIC:
            if self.field_name == "age":
                if not self.bin_edges:
                    raise ConfigError(f"feature {self.name}: age bin edges required")
            elif self.field_name in ("gender", "race", "marital_status"):
                if not self.categories:
                    raise ConfigError(f"feature {self.name}: category list required")
            else:
                raise ConfigError(f"feature {self.name}: unknown demographic field {self.field_name!r}")

    @property
    def compiled_patterns(self) -> tuple[CodePattern, ...]:
        return parse_patterns(self.patterns)

    @property
    def arity(self) -> int:
        if self.kind in _PRESENCE_KINDS:
            return 2
        if self.kind in (FeatureKind.MEDICATION_PREFIX, FeatureKind.FAMILY_HISTORY, FeatureKind.SOCIAL_HISTORY):
            return 2
        if self.kind in (FeatureKind.BINNED_NUMERIC, FeatureKind.DURATION_SINCE_FIRST):
            return len(self.bin_edges) + 2  # bins plus the missing category
        if self.field_name == "age":
            return len(self.bin_edges) + 2
        return len(self.categories) + 1

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind.value}
        for key, value in [
            ("patterns", list(self.patterns)),
            ("prefix", self.prefix),
            ("token", self.token),
            ("vital", self.vital),
            ("bin_edges", list(self.bin_edges)),
            ("field_name", self.field_name),
            ("categories", list(self.categories)),
        ]:
            if value:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSpec":
        known = {"name", "kind", "patterns", "prefix", "token", "vital", "bin_edges", "field_name", "categories"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"feature spec: unknown keys {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad feature spec {data.get('name', '?')}: {exc}") from exc


def age_decades(name: str = "age_group") -> FeatureSpec:
    """Age at cutoff binned by decade, the default demographic age feature."""
    return FeatureSpec(name=name, kind=FeatureKind.DEMOGRAPHIC, field_name="age",
                       bin_edges=tuple(float(x) for x in range(10, 100, 10)))


def _bin_category(value: float, edges: tuple) -> int:
    # bins: (-inf, e0), [e0, e1), ..., [e_last, inf) -> categories 1..len+1
    return int(np.searchsorted(np.asarray(edges), value, side="right")) + 1


def _vital_at_cutoff(record: PatientRecord, cutoff: dt.date, vital: str) -> Optional[float]:
    # value at the cutoff encounter, else the most recent earlier measurement
    value = None
    for enc in record.encounters:
        if enc.date > cutoff:
            break
        if vital in enc.vitals:
            value = enc.vitals[vital]
    return value


def extract_one(spec: FeatureSpec, record: PatientRecord, cutoff: dt.date) -> int:
    kind = spec.kind
    if kind in _PRESENCE_KINDS:
        pats = spec.compiled_patterns
        for code, date in record.diagnoses:
            if date <= cutoff and any(p.matches(code) for p in pats):
                return 1
        return 0
    if kind is FeatureKind.MEDICATION_PREFIX:
        for gpi, date in record.medications:
            if date <= cutoff and gpi.startswith(spec.prefix):
                return 1
        return 0
    if kind is FeatureKind.FAMILY_HISTORY:
        return int(spec.token in record.family_history)
    if kind is FeatureKind.SOCIAL_HISTORY:
        return int(spec.token in record.social_history)
    if kind is FeatureKind.BINNED_NUMERIC:
        value = _vital_at_cutoff(record, cutoff, spec.vital)
        return 0 if value is None else _bin_category(value, spec.bin_edges)
    if kind is FeatureKind.DURATION_SINCE_FIRST:
        pats = spec.compiled_patterns
        first = None
        for code, date in record.diagnoses:
            if date <= cutoff and any(p.matches(code) for p in pats):
                first = date if first is None else min(first, date)
        if first is None:
            return 0
        years = (cutoff - first).days / DAYS_PER_YEAR
        return _bin_category(years, spec.bin_edges)
    if kind is FeatureKind.DEMOGRAPHIC:
        if spec.field_name == "age":
            age = int((cutoff - record.birth_date).days / DAYS_PER_YEAR)
            return _bin_category(float(age), spec.bin_edges)
        value = getattr(record, spec.field_name)
        try:
            return spec.categories.index(value) + 1
        except ValueError:
            return 0
    raise ConfigError(f"unhandled feature kind {kind}")


def extract_features(record: PatientRecord, cutoff: dt.date, specs: list[FeatureSpec]) -> np.ndarray:
    """Feature vector of category indices aligned to ``specs``."""
    return np.array([extract_one(s, record, cutoff) for s in specs], dtype=np.int64)


def check_vitals_known(records: list[PatientRecord], specs: list[FeatureSpec]) -> None:
    """Raise ConfigError when a binned vital name appears in no record."""
    needed = {s.vital for s in specs if s.kind is FeatureKind.BINNED_NUMERIC}
    if not needed:
        return
    seen = set()
    for record in records:
        for enc in record.encounters:
            seen.update(enc.vitals)
    missing = needed - seen
    if missing:
        raise ConfigError(f"vital(s) named in feature specs never measured: {sorted(missing)}")


def arities(specs: list[FeatureSpec]) -> tuple[int, ...]:
    return tuple(s.arity for s in specs)

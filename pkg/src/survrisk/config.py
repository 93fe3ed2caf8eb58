"""Run configuration: one JSON file, one master seed.

Relative paths resolve against the config file's directory.  Every random
choice in a run (synthesis, under-sampling, splitting, tree growth,
explanation sampling) flows from the single ``seed`` field so reruns are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .baseline import BaselineParams
from .classify import ClassifierConfig
from .cohort import CohortSpec
from .errors import ConfigError
from .features import FeatureSpec
from .forest import ForestParams
from .synthgen import SynthSpec, separable_spec


@dataclass
class ExplainSettings:
    n_explained: int = 10
    background_size: int = 100
    budget: int = 2048
    mode: str = "binary"
    split: str = "test"
    external_importance: Optional[str] = None


def _require(section: dict, key: str, context: str):
    if key not in section:
        raise ConfigError(f"missing config key: {context}{key}")
    return section[key]


@dataclass
class RunConfig:
    seed: int
    name: str
    config_dir: Path
    paths: dict
    sections: dict

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        seed = _require(data, "seed", "")
        paths = _require(data, "paths", "")
        if not isinstance(paths, dict):
            raise ConfigError("config key paths must be an object")
        return cls(
            seed=int(seed),
            name=str(data.get("name", "cohort")),
            config_dir=path.parent.resolve(),
            paths=paths,
            sections=data,
        )

    def resolve_path(self, key: str) -> Path:
        value = _require(self.paths, key, "paths.")
        p = Path(value)
        return p if p.is_absolute() else self.config_dir / p

    def out_dir(self) -> Path:
        out = self.resolve_path("out_dir")
        out.mkdir(parents=True, exist_ok=True)
        return out

    def cohort_spec(self, approach: Optional[str] = None) -> CohortSpec:
        section = dict(_require(self.sections, "cohort", ""))
        section.pop("seed", None)
        if approach is not None:
            section["approach"] = approach
        try:
            return CohortSpec(seed=self.seed, **section)
        except TypeError as exc:
            raise ConfigError(f"bad cohort section: {exc}") from exc

    def feature_list(self) -> list:
        section = _require(self.sections, "features", "")
        if isinstance(section, str):
            p = Path(section)
            p = p if p.is_absolute() else self.config_dir / p
            if not p.is_file():
                raise ConfigError(f"features file not found: {p}")
            with open(p) as fh:
                section = json.load(fh)
        if not isinstance(section, list):
            raise ConfigError("config key features must be a list or a file path")
        return [FeatureSpec.from_dict(d) for d in section]

    def forest_params(self) -> ForestParams:
        section = dict(self.sections.get("forest", {}))
        section.pop("seed", None)
        try:
            return ForestParams(seed=self.seed, **section)
        except TypeError as exc:
            raise ConfigError(f"bad forest section: {exc}") from exc

    def baseline_params(self) -> BaselineParams:
        section = dict(self.sections.get("baseline", {}))
        section.pop("seed", None)
        try:
            return BaselineParams(seed=self.seed, **section)
        except TypeError as exc:
            raise ConfigError(f"bad baseline section: {exc}") from exc

    def classifier_config(self, technique: Optional[str] = None) -> ClassifierConfig:
        section = dict(self.sections.get("classifier", {}))
        if technique is not None:
            section["technique"] = technique
        try:
            return ClassifierConfig(**section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad classifier section: {exc}") from exc

    def synth_spec(self) -> SynthSpec:
        section = dict(_require(self.sections, "synth", ""))
        section.pop("seed", None)
        preset = section.pop("preset", None)
        try:
            if preset == "separable":
                return separable_spec(seed=self.seed, **section)
            if preset is not None:
                raise ConfigError(f"unknown synth preset {preset!r}")
            section["arities"] = tuple(section.get("arities", ()))
            section["effects"] = tuple(tuple(row) for row in section.get("effects", ()))
            return SynthSpec(seed=self.seed, **section)
        except TypeError as exc:
            raise ConfigError(f"bad synth section: {exc}") from exc

    def explain_settings(self) -> ExplainSettings:
        section = dict(self.sections.get("explain", {}))
        try:
            return ExplainSettings(**section)
        except TypeError as exc:
            raise ConfigError(f"bad explain section: {exc}") from exc

    def times_unit(self) -> str:
        unit = self.sections.get("times_unit", "months")
        if unit not in ("months", "days"):
            raise ConfigError(f"times_unit must be 'months' or 'days', got {unit!r}")
        return unit

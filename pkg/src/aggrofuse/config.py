"""Run configuration shared by the pipeline and the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .features import DEFAULT_GAMMAS
from .fusion import DEFAULT_SESSION_THRESHOLD, DEFAULT_STALENESS_MS, DEFAULT_THRESHOLD, FusionConfig
from .lexicon import DEFAULT_GATE
from .registry import Modality
from .rules import DEFAULT_SMOOTHING, DEFAULT_WINDOW
from .svm import TrainConfig


class ConfigError(ValueError):
    pass


def _default_gammas() -> dict[str, float]:
    return {m.value: g for m, g in DEFAULT_GAMMAS.items()}


@dataclass(frozen=True)
class RunConfig:
    # paths; None means the shipped stock file
    data_dir: str = "data"
    model_dir: str = "models"
    output: str = "out"
    ruleset: str | None = None
    lexicon: str | None = None
    # fusion
    threshold: float = DEFAULT_THRESHOLD
    staleness_ms: int = DEFAULT_STALENESS_MS
    session_threshold: float = DEFAULT_SESSION_THRESHOLD
    lexicon_gate: float = DEFAULT_GATE
    # training
    C: float = 1.0
    gammas: dict[str, float] = field(default_factory=_default_gammas)
    folds: int = 10
    split: float = 0.8
    seed: int = 0
    tolerance: float = 1e-3
    max_iter: int = 1_000_000
    scale_features: bool = True
    frames_per_session: int = 12
    # rules
    window: int = DEFAULT_WINDOW
    smoothing: int = DEFAULT_SMOOTHING
    # pathway toggles for the rule-augmented models
    use_rules_as_features: bool = True
    rule_vote_enabled: bool = True
    collapse_rule_and_svm_votes: bool = False
    # synthetic data
    actors: int = 5
    acts: int = 3
    frame_rate: float = 30.0

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0 or not 0.0 <= self.session_threshold <= 1.0:
            raise ConfigError("thresholds must lie in [0, 1]")
        if not 0.0 <= self.lexicon_gate <= 1.0:
            raise ConfigError("lexicon_gate must lie in [0, 1]")
        if self.staleness_ms <= 0:
            raise ConfigError("staleness_ms must be positive")
        if not self.C > 0 or not self.tolerance > 0 or self.max_iter < 1:
            raise ConfigError("C, tolerance and max_iter must be positive")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not 0.0 < self.split < 1.0:
            raise ConfigError("split must lie in (0, 1)")
        if self.frames_per_session < 1 or self.window < 1 or self.smoothing < 1:
            raise ConfigError("frames_per_session, window and smoothing must be >= 1")
        if self.actors < 1 or self.acts < 1 or not self.frame_rate > 0:
            raise ConfigError("actors, acts and frame_rate must be positive")
        unknown = set(self.gammas) - {m.value for m in Modality if m.is_visual}
        if unknown:
            raise ConfigError(f"gammas for unknown modalities: {sorted(unknown)}")
        if any(not g > 0 for g in self.gammas.values()):
            raise ConfigError("gammas must be positive")
        object.__setattr__(self, "gammas", {**_default_gammas(), **self.gammas})

    def gamma(self, modality: Modality) -> float:
        return float(self.gammas[Modality(modality).value])

    def train_config(self, modality: Modality) -> TrainConfig:
        return TrainConfig(C=self.C, gamma=self.gamma(modality), tolerance=self.tolerance,
                           max_iter=self.max_iter, k=self.folds, split=self.split, seed=self.seed,
                           scale=self.scale_features)

    def fusion_config(self, collapse: bool | None = None) -> FusionConfig:
        return FusionConfig(self.threshold, self.staleness_ms, self.session_threshold,
                            self.collapse_rule_and_svm_votes if collapse is None else collapse)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)

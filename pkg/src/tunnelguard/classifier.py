"""Secure/insecure verdicts for query domains.

Rules are tried in a fixed order and the first that fires decides:

1. blacklisted suffix                  -> Insecure / Blacklisted
2. registered suffix, pattern matches  -> Secure / Whitelisted
3. zone answers uniformly              -> Insecure / UniformZone
4. feature score (less the cache bonus when the name is cached)
   above the threshold                 -> Insecure / ScoreAboveThreshold
   otherwise                           -> Secure / ScoreBelowThreshold
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .codec import DomainName, parse_name
from .features import Dictionary, ScoreWeights, extract_features, load_dictionary, suspicion_score
from .registry import Registry
from .uniformity import (
    DEFAULT_MIN_SAMPLES,
    DEFAULT_THRESHOLD,
    DEFAULT_ZONE_DEPTH,
    UniformityTracker,
    zone_of,
)


class Decision(str, Enum):
    SECURE = "Secure"
    INSECURE = "Insecure"


class Reason(str, Enum):
    WHITELISTED = "Whitelisted"
    BLACKLISTED = "Blacklisted"
    UNIFORM_ZONE = "UniformZone"
    SCORE_ABOVE = "ScoreAboveThreshold"
    SCORE_BELOW = "ScoreBelowThreshold"


_DECISION_OF = {
    Reason.WHITELISTED: Decision.SECURE,
    Reason.SCORE_BELOW: Decision.SECURE,
    Reason.BLACKLISTED: Decision.INSECURE,
    Reason.UNIFORM_ZONE: Decision.INSECURE,
    Reason.SCORE_ABOVE: Decision.INSECURE,
}


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    reason: Reason
    score: float | None = None

    def __post_init__(self):
        if _DECISION_OF[self.reason] is not self.decision:
            raise ValueError(f"reason {self.reason.value} cannot yield {self.decision.value}")
        scored = self.reason in (Reason.SCORE_ABOVE, Reason.SCORE_BELOW)
        if scored != (self.score is not None):
            raise ValueError("a score is attached exactly when the feature path ran")

    @classmethod
    def of(cls, reason: Reason, score: float | None = None) -> Verdict:
        return cls(_DECISION_OF[reason], reason, score)

    @property
    def secure(self) -> bool:
        return self.decision is Decision.SECURE

    def to_dict(self) -> dict:
        return {"decision": self.decision.value, "reason": self.reason.value, "score": self.score}


def default_config_path() -> Path:
    return Path(str(resources.files("tunnelguard") / "data" / "default_config.json"))


@dataclass(frozen=True)
class ClassifierConfig:
    weights: ScoreWeights
    min_samples: int = DEFAULT_MIN_SAMPLES
    uniformity_threshold: float = DEFAULT_THRESHOLD
    min_distinct: int = 2
    zone_depth: int = DEFAULT_ZONE_DEPTH
    dictionary_path: str | None = None

    def __post_init__(self):
        if self.min_samples < 1:
            raise ValueError("min_samples must be positive")
        if not 0.0 < self.uniformity_threshold <= 1.0:
            raise ValueError("uniformity threshold must lie in (0, 1]")
        if self.zone_depth < 1:
            raise ValueError("zone_depth must be at least 1")

    @classmethod
    def from_dict(cls, data: Mapping) -> ClassifierConfig:
        uni = data.get("uniformity", {})
        return cls(
            weights=ScoreWeights.from_dict(data["score"]),
            min_samples=int(uni.get("min_samples", DEFAULT_MIN_SAMPLES)),
            uniformity_threshold=float(uni.get("threshold", DEFAULT_THRESHOLD)),
            min_distinct=int(uni.get("min_distinct", 2)),
            zone_depth=int(data.get("zone_depth", DEFAULT_ZONE_DEPTH)),
            dictionary_path=data.get("dictionary"),
        )

    def to_dict(self) -> dict:
        return {
            "score": self.weights.to_dict(),
            "uniformity": {
                "min_samples": self.min_samples,
                "threshold": self.uniformity_threshold,
                "min_distinct": self.min_distinct,
            },
            "zone_depth": self.zone_depth,
            "dictionary": self.dictionary_path,
        }

    @classmethod
    def default(cls) -> ClassifierConfig:
        return load_classifier_config(default_config_path())


def load_classifier_config(path: str | Path) -> ClassifierConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return ClassifierConfig.from_dict(data.get("classifier", data))


def classify(
    qname: DomainName | str,
    registry: Registry | None,
    zone_stats: UniformityTracker | None,
    cache_probe: bool,
    cfg: ClassifierConfig,
    dictionary: Dictionary,
) -> Verdict:
    qname = parse_name(qname)
    if registry is not None:
        blacklisted, hit = registry.screen(qname)
        if blacklisted:
            return Verdict.of(Reason.BLACKLISTED)
        if hit is not None and hit.matched:
            return Verdict.of(Reason.WHITELISTED)
    if zone_stats is not None and qname.labels:
        zone = zone_of(qname, cfg.zone_depth)
        # zones never seen, or seen too rarely, fall through to scoring
        if zone in zone_stats and zone_stats.is_uniform(
            zone, cfg.min_samples, cfg.uniformity_threshold, cfg.min_distinct
        ):
            return Verdict.of(Reason.UNIFORM_ZONE)
    if not qname.labels:
        return Verdict.of(Reason.SCORE_BELOW, 0.0)
    score = suspicion_score(extract_features(qname, dictionary), cfg.weights)
    if cache_probe:
        score = max(0.0, score - cfg.weights.cache_hit_bonus)
    if score > cfg.weights.score_threshold:
        return Verdict.of(Reason.SCORE_ABOVE, score)
    return Verdict.of(Reason.SCORE_BELOW, score)


@dataclass
class Classifier:
    """Bundles a config with the shared state the rules read."""

    config: ClassifierConfig
    registry: Registry | None = None
    tracker: UniformityTracker | None = None
    dictionary: Dictionary = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.dictionary is None:
            self.dictionary = load_dictionary(self.config.dictionary_path)

    def classify(self, qname: DomainName | str, cache_probe: bool = False) -> Verdict:
        return classify(qname, self.registry, self.tracker, cache_probe, self.config, self.dictionary)

    def score(self, qname: DomainName | str) -> float:
        """Raw feature score, no registry, zone or cache adjustments."""
        qname = parse_name(qname)
        return suspicion_score(extract_features(qname, self.dictionary), self.config.weights)

    def classify_batch(
        self, names: Iterable[DomainName | str], cache_probes: Sequence[bool] | None = None
    ) -> list[Verdict]:
        names = list(names)
        probes = list(cache_probes) if cache_probes is not None else [False] * len(names)
        if len(probes) != len(names):
            raise ValueError("one cache probe per name")
        # zone stats are read from one point-in-time copy for the whole batch
        tracker = self.tracker.copy() if self.tracker is not None else None
        return [
            classify(n, self.registry, tracker, p, self.config, self.dictionary)
            for n, p in zip(names, probes)
        ]


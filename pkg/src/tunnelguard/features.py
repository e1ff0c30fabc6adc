"""Payload features of a query name and the suspicion score built from them."""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .codec import DomainName, EmptyLabel, fold, parse_name

MIN_WORD_LENGTH = 3
DIGITS = frozenset(b"0123456789")


@dataclass(frozen=True)
class NameFeatures:
    total_length: int
    label_count: int
    max_label_length: int
    entropy_max: float
    entropy_min: float
    entropy_mean: float
    entropy_median: float
    entropy_variance: float
    digit_fraction: float
    unique_char_count: int
    lms_fraction: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in fields(NameFeatures))
# Features where a larger value means "more meaningful", i.e. less suspicious.
INVERTED_FEATURES = frozenset({"lms_fraction"})


class Dictionary:
    """An immutable case-insensitive word set used for substring matching."""

    def __init__(self, words: Iterable[str | bytes], min_length: int = MIN_WORD_LENGTH):
        encoded = set()
        for w in words:
            if isinstance(w, str):
                w = w.strip().encode("utf-8")
            w = fold(w)
            if len(w) >= min_length:
                encoded.add(w)
        self.words = frozenset(encoded)
        self.min_length = min_length
        self.max_length = max((len(w) for w in self.words), default=0)

    def __contains__(self, word: str | bytes) -> bool:
        if isinstance(word, str):
            word = word.encode("utf-8")
        return fold(word) in self.words

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(sorted(w.decode("utf-8", "replace") for w in self.words))


def read_word_file(path: str | Path) -> list[str]:
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                words.append(line)
    return words


def load_dictionary(path: str | Path | None = None) -> Dictionary:
    """Load a word list; ``None`` selects the bundled English list."""
    if path is None:
        with resources.as_file(resources.files("tunnelguard") / "data" / "words.txt") as p:
            return Dictionary(read_word_file(p))
    return Dictionary(read_word_file(path))


def _as_name(name: DomainName | str) -> DomainName:
    return parse_name(name) if isinstance(name, str) else name


def _as_label(label: bytes | str) -> bytes:
    return label.encode("utf-8") if isinstance(label, str) else label


def shannon_entropy(label: bytes | str) -> float:
    """Base-2 Shannon entropy of the octet distribution of one label."""
    label = fold(_as_label(label))
    if not label:
        raise EmptyLabel("entropy of an empty label")
    n = len(label)
    counts = Counter(label).values()
    if len(counts) == 1:
        return 0.0
    return -sum(c / n * math.log2(c / n) for c in counts)


def entropy_stats(name: DomainName | str) -> tuple[float, float, float, float, float]:
    """(max, min, mean, median, population variance) of per-label entropies."""
    name = _as_name(name)
    if not name.labels:
        raise EmptyLabel("name has no labels")
    # Sorting first makes the result independent of label order down to the last bit.
    values = sorted(shannon_entropy(label) for label in name.labels)
    mean = math.fsum(values) / len(values)
    variance = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return values[-1], values[0], mean, statistics.median(values), variance


def char_stats(name: DomainName | str) -> tuple[float, int]:
    """(digit fraction, unique character count) over the labels joined without dots."""
    name = _as_name(name)
    joined = fold(b"".join(name.labels))
    if not joined:
        raise EmptyLabel("name has no labels")
    digits = sum(1 for b in joined if b in DIGITS)
    return digits / len(joined), len(set(joined))


def longest_word(label: bytes | str, dictionary: Dictionary) -> int:
    """Length of the longest dictionary word occurring contiguously in ``label``."""
    label = fold(_as_label(label))
    n = len(label)
    best = 0
    top = min(n, dictionary.max_length)
    words = dictionary.words
    for i in range(n):
        # only lengths that could beat the current best are worth checking
        for length in range(min(top, n - i), max(best, dictionary.min_length - 1), -1):
            if label[i : i + length] in words:
                best = length
                break
    return best


def lms_fraction(name: DomainName | str, dictionary: Dictionary) -> float:
    name = _as_name(name)
    return max((longest_word(label, dictionary) / len(label) for label in name.labels), default=0.0)


def extract_features(name: DomainName | str, dictionary: Dictionary) -> NameFeatures:
    name = _as_name(name)
    e_max, e_min, e_mean, e_median, e_var = entropy_stats(name)
    digit_fraction, unique = char_stats(name)
    return NameFeatures(
        total_length=name.text_length,
        label_count=len(name.labels),
        max_label_length=max(len(label) for label in name.labels),
        entropy_max=e_max,
        entropy_min=e_min,
        entropy_mean=e_mean,
        entropy_median=e_median,
        entropy_variance=e_var,
        digit_fraction=digit_fraction,
        unique_char_count=unique,
        lms_fraction=lms_fraction(name, dictionary),
    )


@dataclass(frozen=True)
class UnitParams:
    weight: float = 0.0
    midpoint: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.weight) and math.isfinite(self.midpoint) and math.isfinite(self.scale)):
            raise ValueError("feature weights, midpoints and scales must be finite")
        if self.weight < 0:
            raise ValueError("feature weights must be non-negative")
        if self.scale <= 0:
            raise ValueError("feature scale must be positive")


@dataclass(frozen=True)
class ScoreWeights:
    units: Mapping[str, UnitParams] = field(default_factory=dict)
    score_threshold: float = 0.5
    cache_hit_bonus: float = 0.15

    def __post_init__(self):
        unknown = set(self.units) - set(FEATURE_NAMES)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in [0, 1]")
        if not (math.isfinite(self.cache_hit_bonus) and self.cache_hit_bonus >= 0):
            raise ValueError("cache_hit_bonus must be finite and non-negative")
        if sum(u.weight for u in self.units.values()) <= 0:
            raise ValueError("at least one feature needs a positive weight")

    @classmethod
    def from_dict(cls, data: Mapping) -> ScoreWeights:
        units = {name: UnitParams(**params) for name, params in data.get("features", {}).items()}
        return cls(
            units=units,
            score_threshold=float(data.get("score_threshold", 0.5)),
            cache_hit_bonus=float(data.get("cache_hit_bonus", 0.15)),
        )

    def to_dict(self) -> dict:
        return {
            "features": {
                name: {"weight": u.weight, "midpoint": u.midpoint, "scale": u.scale}
                for name, u in self.units.items()
            },
            "score_threshold": self.score_threshold,
            "cache_hit_bonus": self.cache_hit_bonus,
        }


def logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def feature_units(features: NameFeatures, weights: ScoreWeights) -> dict[str, float]:
    """Per-feature logistic activations in [0, 1], oriented so 1 means suspicious."""
    out = {}
    for name, unit in weights.units.items():
        z = (float(getattr(features, name)) - unit.midpoint) / unit.scale
        out[name] = logistic(-z if name in INVERTED_FEATURES else z)
    return out


def suspicion_score(features: NameFeatures, weights: ScoreWeights) -> float:
    activations = feature_units(features, weights)
    total = 0.0
    norm = 0.0
    for name in FEATURE_NAMES:
        unit = weights.units.get(name)
        if unit is None or unit.weight == 0:
            continue
        total += unit.weight * activations[name]
        norm += unit.weight
    return min(1.0, max(0.0, total / norm))

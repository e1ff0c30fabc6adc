"""Seeded generators for benign and tunnel query-name corpora.

Randomness comes from numpy's PCG64 bit generator seeded with the corpus
seed. The draws per name happen in a fixed order, so a given CorpusSpec
always yields the same corpus.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..codec import MAX_LABEL_LENGTH, parse_name
from ..features import Dictionary, load_dictionary

RNG_ALGORITHM = "numpy.random.PCG64"
MAX_PRESENTATION_LENGTH = 253
COMMON_SUFFIXES = ("com", "net", "org", "io", "de", "co.uk", "edu", "info", "gov", "fr")
ENCODINGS = ("base32", "base64url", "hex")


class EmptyDictionary(ValueError):
    pass


class SuffixTooLong(ValueError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    kind: str
    count: int
    seed: int = 0
    # benign
    dictionary_path: str | None = None
    label_count_range: tuple[int, int] = (1, 2)
    hyphen_fraction: float = 0.15
    numeric_fraction: float = 0.05
    # tunnel; payload_bytes is a fixed size or an inclusive (lo, hi) range
    payload_bytes: int | tuple[int, int] = 30
    encoding: str = "base32"
    suffix: str = "t.example"
    labels_per_name: int | None = None

    def __post_init__(self):
        if self.kind not in ("benign", "tunnel"):
            raise ValueError(f"unknown corpus kind {self.kind!r}")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")
        lo, hi = self.payload_range
        if not 0 < lo <= hi:
            raise ValueError("payload_bytes must be positive")
        if not 1 <= self.label_count_range[0] <= self.label_count_range[1]:
            raise ValueError("bad label_count_range")

    @property
    def payload_range(self) -> tuple[int, int]:
        if isinstance(self.payload_bytes, int):
            return self.payload_bytes, self.payload_bytes
        lo, hi = self.payload_bytes
        return int(lo), int(hi)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def encode_payload(payload: bytes, encoding: str) -> str:
    if encoding == "base32":
        return base64.b32encode(payload).decode("ascii").rstrip("=").lower()
    if encoding == "base64url":
        return base64.urlsafe_b64encode(payload).decode("ascii").rstrip("=")
    if encoding == "hex":
        return payload.hex()
    raise ValueError(f"unknown encoding {encoding!r}")


def chunk_labels(encoded: str, suffix: str, max_labels: int | None = None) -> list[str]:
    """Split encoded text into labels of at most 63 characters.

    The payload is cut short when the name would exceed 253 characters.
    """
    budget = MAX_PRESENTATION_LENGTH - len(suffix)
    if budget - 1 < 1:
        raise SuffixTooLong(f"suffix {suffix!r} leaves no room for a payload label")
    labels: list[str] = []
    pos = 0
    while pos < len(encoded) and (max_labels is None or len(labels) < max_labels):
        n = min(MAX_LABEL_LENGTH, len(encoded) - pos, budget - 1)
        if n < 1:
            break
        labels.append(encoded[pos : pos + n])
        pos += n
        budget -= n + 1
    return labels


def gen_tunnel(spec: CorpusSpec) -> list[str]:
    suffix = parse_name(spec.suffix).to_text()
    # fail early even for count=0
    chunk_labels("x", suffix)
    rng = make_rng(spec.seed)
    lo, hi = spec.payload_range
    names = []
    for _ in range(spec.count):
        size = int(rng.integers(lo, hi + 1))
        payload = rng.bytes(size)
        labels = chunk_labels(encode_payload(payload, spec.encoding), suffix, spec.labels_per_name)
        names.append(".".join(labels + [suffix]))
    return names


def gen_benign(spec: CorpusSpec, dictionary: Dictionary | None = None) -> list[str]:
    if dictionary is None:
        dictionary = load_dictionary(spec.dictionary_path)
    words = [w for w in dictionary if w.isascii() and w.isalnum()]
    if not words:
        raise EmptyDictionary("dictionary has no usable words")
    rng = make_rng(spec.seed)
    lo, hi = spec.label_count_range
    names = []
    for _ in range(spec.count):
        n_labels = int(rng.integers(lo, hi + 1))
        labels = []
        for _ in range(n_labels):
            word = words[int(rng.integers(len(words)))]
            if rng.random() < spec.hyphen_fraction:
                word = word + "-" + words[int(rng.integers(len(words)))]
            labels.append(word)
        if rng.random() < spec.numeric_fraction:
            i = int(rng.integers(n_labels))
            labels[i] = labels[i] + str(int(rng.integers(1, 100)))
        suffix = COMMON_SUFFIXES[int(rng.integers(len(COMMON_SUFFIXES)))]
        names.append(".".join(labels + [suffix]))
    return names


def generate(spec: CorpusSpec, dictionary: Dictionary | None = None) -> list[str]:
    if spec.kind == "benign":
        return gen_benign(spec, dictionary)
    return gen_tunnel(spec)


def standard_corpus(
    seed: int = 2016, count: int = 1000, dictionary: Dictionary | None = None
) -> list[tuple[str, int]]:
    """The labelled benchmark: ``count`` benign names and ``count`` base32 tunnel names.

    Tunnel payloads are 60 to 200 bytes.
    """
    benign = gen_benign(CorpusSpec("benign", count, seed, label_count_range=(1, 3)), dictionary)
    tunnel = gen_tunnel(CorpusSpec("tunnel", count, seed + 1, payload_bytes=(60, 200)))
    return [(n, 0) for n in benign] + [(n, 1) for n in tunnel]


def write_corpus(names: Iterable[str], path: str | Path) -> None:
    Path(path).write_text("".join(n + "\n" for n in names), encoding="utf-8")


def write_labels(pairs: Iterable[tuple[str, int]], path: str | Path) -> None:
    text = "".join(f"{n}\t{'tunnel' if y else 'benign'}\n" for n, y in pairs)
    Path(path).write_text(text, encoding="utf-8")


def read_names(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


_LABEL_VALUES = {"tunnel": 1, "1": 1, "benign": 0, "0": 0}


def read_labels(path: str | Path) -> dict[str, int]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            name, sep, label = line.partition("\t")
            if not sep or label.strip().lower() not in _LABEL_VALUES:
                raise ValueError(f"{path}:{lineno}: expected name<TAB>benign|tunnel")
            out[name.strip()] = _LABEL_VALUES[label.strip().lower()]
    return out

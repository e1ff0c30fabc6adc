"""Shared generators and brute-force oracles for the test suite."""

from __future__ import annotations

import ipaddress
import math
import random
import string

from tunnelguard.codec import (
    DnsHeader,
    DnsMessage,
    DomainName,
    MxData,
    QType,
    Question,
    ResourceRecord,
    SoaData,
)

LABEL_CHARS = string.ascii_letters + string.digits + "-_"


def random_label(rng: random.Random, max_len: int = 20) -> bytes:
    n = rng.randint(1, max_len)
    if rng.random() < 0.1:
        return rng.randbytes(n)
    return "".join(rng.choices(LABEL_CHARS, k=n)).encode()


def random_name(rng: random.Random, max_labels: int = 4, max_len: int = 20) -> DomainName:
    labels = [random_label(rng, max_len) for _ in range(rng.randint(1, max_labels))]
    return DomainName(labels)


def random_rr(rng: random.Random) -> ResourceRecord:
    name = random_name(rng)
    kind = rng.choice(["A", "AAAA", "TXT", "CNAME", "NS", "MX", "SOA", "NULL", "OTHER"])
    if kind == "A":
        rtype, rdata = QType.A, ipaddress.IPv4Address(rng.getrandbits(32))
    elif kind == "AAAA":
        rtype, rdata = QType.AAAA, ipaddress.IPv6Address(rng.getrandbits(128))
    elif kind == "TXT":
        rtype = QType.TXT
        rdata = tuple(bytes(rng.randrange(256) for _ in range(rng.randint(0, 40))) for _ in range(rng.randint(1, 3)))
    elif kind in ("CNAME", "NS"):
        rtype, rdata = QType[kind], random_name(rng)
    elif kind == "MX":
        rtype, rdata = QType.MX, MxData(rng.randrange(65536), random_name(rng))
    elif kind == "SOA":
        rtype = QType.SOA
        rdata = SoaData(random_name(rng), random_name(rng), *(rng.getrandbits(32) for _ in range(5)))
    elif kind == "NULL":
        rtype, rdata = QType.NULL, bytes(rng.randrange(256) for _ in range(rng.randint(0, 30)))
    else:
        rtype = rng.choice([99, 256, 4242, 65280])
        rdata = bytes(rng.randrange(256) for _ in range(rng.randint(0, 30)))
    return ResourceRecord(name, int(rtype), rng.choice([1, 1, 1, 3, 255]), rng.getrandbits(32), rdata)


def random_message(rng: random.Random) -> DnsMessage:
    header = DnsHeader(
        id=rng.getrandbits(16),
        qr=rng.random() < 0.5,
        opcode=rng.randrange(16),
        aa=rng.random() < 0.5,
        tc=rng.random() < 0.5,
        rd=rng.random() < 0.5,
        ra=rng.random() < 0.5,
        rcode=rng.randrange(16),
    )
    questions = tuple(
        Question(random_name(rng), rng.choice([1, 16, 28, 10, 255, 999]), 1) for _ in range(rng.randint(0, 2))
    )
    sections = [tuple(random_rr(rng) for _ in range(rng.randint(0, 3))) for _ in range(3)]
    return DnsMessage(header, questions, *sections)


# -- feature oracles ------------------------------------------------------


def brute_entropy(label: bytes) -> float:
    label = label.lower()
    n = len(label)
    h = 0.0
    for sym in sorted(set(label)):
        p = label.count(bytes([sym])) / n
        h -= p * math.log2(p)
    return h


def brute_median(xs):
    xs = sorted(xs)
    n = len(xs)
    if n % 2:
        return xs[n // 2]
    return (xs[n // 2 - 1] + xs[n // 2]) / 2


def brute_lms(label: bytes, words: set[bytes]) -> int:
    label = label.lower()
    best = 0
    for i in range(len(label)):
        for j in range(i + 1, len(label) + 1):
            if j - i >= 3 and label[i:j] in words:
                best = max(best, j - i)
    return best


def brute_features(name: DomainName, words: set[bytes]) -> dict:
    labels = list(name.labels)
    ents = [brute_entropy(l) for l in labels]
    mean = sum(ents) / len(ents)
    joined = b"".join(labels).lower()
    return {
        "total_length": len(b".".join(labels)),
        "label_count": len(labels),
        "max_label_length": max(len(l) for l in labels),
        "entropy_max": max(ents),
        "entropy_min": min(ents),
        "entropy_mean": mean,
        "entropy_median": brute_median(ents),
        "entropy_variance": sum((e - mean) ** 2 for e in ents) / len(ents),
        "digit_fraction": sum(chr(c) in "0123456789" for c in joined) / len(joined),
        "unique_char_count": len(set(joined)),
        "lms_fraction": max(brute_lms(l, words) / len(l) for l in labels),
    }


def brute_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def borderline_names(clf, count, seed=5, lo=None, hi=None):
    """Names whose raw score sits between the threshold and threshold + cache bonus."""
    w = clf.config.weights
    lo = w.score_threshold if lo is None else lo
    hi = w.score_threshold + w.cache_hit_bonus if hi is None else hi
    rng = random.Random(seed)
    alphabet = string.ascii_lowercase + string.digits
    out = []
    while len(out) < count:
        label = "".join(rng.choice(alphabet) for _ in range(rng.randint(8, 40)))
        name = f"{label}.cdn.example"
        if lo < clf.score(name) <= hi:
            out.append(name)
    return out

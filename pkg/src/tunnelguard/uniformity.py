"""Per-zone response statistics used to spot zones that answer everything alike.

Tunnel endpoints rarely bother to answer meaningfully: every name below the
zone gets NXDOMAIN, NODATA, SERVFAIL, the same wildcard record set, or
nothing at all. A zone whose responses are dominated by a single outcome
class is flagged.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator

from .codec import DnsMessage, DomainName, Rcode, encode_rdata, fold, parse_name

DISTINCT_CAP = 4096
DEFAULT_ZONE_DEPTH = 2
DEFAULT_MIN_SAMPLES = 20
DEFAULT_THRESHOLD = 0.95


class ZoneMismatch(ValueError):
    pass


class UnknownZone(KeyError):
    pass


class OutcomeClass(str, Enum):
    NXDOMAIN = "NXDOMAIN"
    NODATA = "NODATA"
    SERVFAIL = "SERVFAIL"
    TIMEOUT = "TIMEOUT"
    ANSWER = "ANSWER"


@dataclass(frozen=True)
class ResponseOutcome:
    kind: OutcomeClass
    fingerprint: str | None = None

    def __post_init__(self):
        if (self.kind is OutcomeClass.ANSWER) != (self.fingerprint is not None):
            raise ValueError("a fingerprint is present exactly for ANSWER outcomes")

    @property
    def label(self) -> str:
        if self.kind is OutcomeClass.ANSWER:
            return f"ANSWER:{self.fingerprint}"
        return self.kind.value

    @classmethod
    def from_label(cls, label: str) -> ResponseOutcome:
        kind, _, fp = label.partition(":")
        return cls(OutcomeClass(kind), fp or None)


NXDOMAIN = ResponseOutcome(OutcomeClass.NXDOMAIN)
NODATA = ResponseOutcome(OutcomeClass.NODATA)
SERVFAIL = ResponseOutcome(OutcomeClass.SERVFAIL)
TIMEOUT = ResponseOutcome(OutcomeClass.TIMEOUT)


def answer_fingerprint(answers: Iterable) -> str:
    """Hash of the answer rdata set, ignoring owner names, TTLs and order.

    Owner names are left out on purpose: a wildcard gives every distinct
    qname the same rdata under a different owner.
    """
    canon = sorted({(rr.rtype, fold(encode_rdata(rr.rtype, rr.rdata))) for rr in answers})
    h = hashlib.sha256()
    for rtype, rdata in canon:
        h.update(rtype.to_bytes(2, "big") + len(rdata).to_bytes(2, "big") + rdata)
    return h.hexdigest()[:16]


def answer_outcome(answers: Iterable) -> ResponseOutcome:
    return ResponseOutcome(OutcomeClass.ANSWER, answer_fingerprint(answers))


def outcome_of(response: DnsMessage | None) -> ResponseOutcome:
    """Map an upstream response (``None`` for no response) to its outcome class."""
    if response is None:
        return TIMEOUT
    rcode = response.header.rcode
    if rcode == Rcode.NXDOMAIN:
        return NXDOMAIN
    if rcode != Rcode.NOERROR:
        return SERVFAIL
    if not response.answers:
        return NODATA
    return answer_outcome(response.answers)


def zone_of(qname: DomainName, depth: int = DEFAULT_ZONE_DEPTH) -> DomainName:
    """The aggregation zone: the last ``depth`` labels, or the whole name if shorter."""
    if depth < 1:
        raise ValueError("zone depth must be at least 1")
    return qname.suffix(min(depth, len(qname.labels)))


@dataclass
class ZoneStats:
    zone: DomainName
    total_responses: int = 0
    outcome_counts: dict[str, int] = field(default_factory=dict)
    first_seen: float | None = None
    last_seen: float | None = None
    _names: set = field(default_factory=set, repr=False)
    _distinct: int = 0

    @property
    def distinct_qnames(self) -> int:
        return self._distinct

    def add(self, qname: DomainName, outcome: ResponseOutcome, now: float) -> None:
        self.total_responses += 1
        label = outcome.label
        self.outcome_counts[label] = self.outcome_counts.get(label, 0) + 1
        if qname.key not in self._names and len(self._names) < DISTINCT_CAP:
            self._names.add(qname.key)
            self._distinct = len(self._names)
        if self.first_seen is None or now < self.first_seen:
            self.first_seen = now
        if self.last_seen is None or now > self.last_seen:
            self.last_seen = now

    def dominant(self) -> tuple[float, str, int]:
        if not self.total_responses:
            return 0.0, "", 0
        # highest count wins; equal counts go to the smallest label
        label, count = min(self.outcome_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return count / self.total_responses, label, self.total_responses

    def to_record(self) -> dict:
        return {
            "zone": self.zone.to_text(),
            "total": self.total_responses,
            "distinct_qnames": self.distinct_qnames,
            "counts": dict(sorted(self.outcome_counts.items())),
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
        }


@dataclass(frozen=True)
class Uniformity:
    dominant_fraction: float
    dominant_class: ResponseOutcome
    samples: int


class UniformityTracker:
    """Zone statistics; every mutation and every read of a zone holds one lock."""

    def __init__(self, zone_depth: int = DEFAULT_ZONE_DEPTH):
        if zone_depth < 1:
            raise ValueError("zone depth must be at least 1")
        self.zone_depth = zone_depth
        self._zones: dict[DomainName, ZoneStats] = {}
        self._lock = threading.Lock()

    def zone_for(self, qname: DomainName) -> DomainName:
        return zone_of(qname, self.zone_depth)

    def record_response(
        self, zone: DomainName, qname: DomainName, outcome: ResponseOutcome, now: float
    ) -> ZoneStats:
        if not zone.labels or not qname.is_subdomain_of(zone):
            raise ZoneMismatch(f"{qname} is not below {zone}")
        with self._lock:
            stats = self._zones.get(zone)
            if stats is None:
                stats = self._zones[zone] = ZoneStats(zone)
            stats.add(qname, outcome, now)
            return stats

    def observe(self, qname: DomainName, response: DnsMessage | None, now: float) -> ZoneStats:
        """Record a response under the qname's own zone."""
        return self.record_response(self.zone_for(qname), qname, outcome_of(response), now)

    def __contains__(self, zone: DomainName) -> bool:
        return zone in self._zones

    def __len__(self) -> int:
        return len(self._zones)

    def stats(self, zone: DomainName) -> ZoneStats:
        try:
            return self._zones[zone]
        except KeyError:
            raise UnknownZone(str(zone)) from None

    def uniformity(self, zone: DomainName) -> Uniformity:
        with self._lock:
            fraction, label, samples = self.stats(zone).dominant()
        return Uniformity(fraction, ResponseOutcome.from_label(label), samples)

    def is_uniform(
        self,
        zone: DomainName,
        min_samples: int = DEFAULT_MIN_SAMPLES,
        threshold: float = DEFAULT_THRESHOLD,
        min_distinct: int = 0,
    ) -> bool:
        if not 0.0 < threshold <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
        with self._lock:
            stats = self.stats(zone)
            fraction, _, samples = stats.dominant()
            distinct = stats.distinct_qnames
        return samples >= min_samples and fraction >= threshold and distinct >= min_distinct

    @classmethod
    def from_snapshot(cls, records: Iterable[dict], zone_depth: int = DEFAULT_ZONE_DEPTH) -> UniformityTracker:
        """Rebuild counters from exported records; qname identities are not kept."""
        tracker = cls(zone_depth)
        for rec in records:
            zone = parse_name(rec["zone"])
            counts = {label: int(n) for label, n in rec["counts"].items()}
            for label in counts:
                ResponseOutcome.from_label(label)
            tracker._zones[zone] = ZoneStats(
                zone,
                total_responses=sum(counts.values()),
                outcome_counts=counts,
                first_seen=rec.get("first_seen"),
                last_seen=rec.get("last_seen"),
                _distinct=min(int(rec.get("distinct_qnames", 0)), DISTINCT_CAP),
            )
        return tracker

    def copy(self) -> UniformityTracker:
        view = UniformityTracker(self.zone_depth)
        with self._lock:
            for zone, stats in self._zones.items():
                view._zones[zone] = replace(
                    stats, outcome_counts=dict(stats.outcome_counts), _names=set(stats._names)
                )
        return view

    def reset(self, zone: DomainName | None = None) -> None:
        with self._lock:
            if zone is None:
                self._zones.clear()
            else:
                self._zones.pop(zone, None)

    def zones(self) -> list[DomainName]:
        return sorted(self._zones)

    def snapshot(self) -> Iterator[dict]:
        with self._lock:
            records = [self._zones[z].to_record() for z in sorted(self._zones)]
        return iter(records)

    def export(self, fh: IO[str]) -> int:
        n = 0
        for record in self.snapshot():
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            n += 1
        return n


def read_snapshot(path: str | Path) -> list[dict]:
    """Parse an exported snapshot back into plain records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                parse_name(rec["zone"])
                if sum(rec["counts"].values()) != rec["total"]:
                    raise ValueError("class counts do not sum to total")
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed zone record: {exc}") from exc
            records.append(rec)
    return records


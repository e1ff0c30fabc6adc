"""Response cache keyed by (qname, qtype), with positive and negative entries."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

from ..codec import DomainName, QType, Rcode, ResourceRecord, SoaData

CacheKey = tuple[tuple[bytes, ...], int]


def cache_key(qname: DomainName, qtype: int) -> CacheKey:
    return qname.key, int(qtype)


@dataclass(frozen=True)
class TtlClamps:
    min_ttl: int = 1
    max_ttl: int = 86400
    negative_ttl: int = 60

    def __post_init__(self):
        if not 0 <= self.min_ttl <= self.max_ttl:
            raise ValueError("need 0 <= min_ttl <= max_ttl")
        if self.negative_ttl < 0:
            raise ValueError("negative_ttl must be non-negative")


@dataclass(frozen=True)
class CacheEntry:
    key: CacheKey
    answers: tuple[ResourceRecord, ...]
    rcode: int
    stored_at: float
    ttl: int

    @property
    def expires(self) -> float:
        return self.stored_at + self.ttl

    def fresh(self, now: float) -> bool:
        return now < self.expires

    @property
    def negative(self) -> bool:
        return self.rcode == Rcode.NXDOMAIN or not self.answers

    def answers_at(self, now: float) -> tuple[ResourceRecord, ...]:
        """Answers with TTLs counted down to what is left of the entry's lifetime."""
        left = max(0, math.ceil(self.expires - now))
        return tuple(rr.with_ttl(min(rr.ttl, left)) for rr in self.answers)


def entry_ttl(answers, rcode: int, clamps: TtlClamps, authorities=()) -> int | None:
    """Lifetime for a response, or ``None`` when it must not be cached."""
    if rcode == Rcode.NXDOMAIN or (rcode == Rcode.NOERROR and not answers):
        ttl = clamps.negative_ttl
        for rr in authorities:
            if rr.rtype == QType.SOA and isinstance(rr.rdata, SoaData):
                ttl = min(ttl, rr.ttl, rr.rdata.minimum)
        return max(clamps.min_ttl, ttl)
    if rcode != Rcode.NOERROR:
        return None
    ttl = min(rr.ttl for rr in answers)
    return min(clamps.max_ttl, max(clamps.min_ttl, ttl))


class ResponseCache:
    """Bounded cache; the oldest insertions are evicted first when full.

    Not locked: the service touches it only from its event loop thread.
    """

    def __init__(self, clamps: TtlClamps | None = None, max_entries: int = 100_000):
        self.clamps = clamps or TtlClamps()
        self.max_entries = max_entries
        self._entries: OrderedDict[CacheKey, CacheEntry] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: CacheKey, now: float) -> CacheEntry | None:
        entry = self._entries.get(key)
        if entry is None or not entry.fresh(now):
            if entry is not None:
                del self._entries[key]
            self.misses += 1
            return None
        self.hits += 1
        return entry

    def peek(self, key: CacheKey, now: float) -> bool:
        """Freshness probe that leaves hit/miss counters alone."""
        entry = self._entries.get(key)
        return entry is not None and entry.fresh(now)

    def put(self, key: CacheKey, answers, rcode: int, now: float, authorities=()) -> CacheEntry | None:
        ttl = entry_ttl(tuple(answers), rcode, self.clamps, authorities)
        if ttl is None:
            return None
        entry = CacheEntry(key, tuple(answers), int(rcode), now, ttl)
        self._entries.pop(key, None)
        self._entries[key] = entry
        while len(self._entries) > self.max_entries:
            self._entries.popitem(last=False)
        return entry

    def clear(self) -> None:
        self._entries.clear()

"""Tunnel domain registry: a pattern-checked whitelist and a suffix blacklist.

Registered tunnel domains are served when their query names fit the
generation pattern filed at registration. Blacklisted suffixes are always
refused. Invalidating a registration moves its domain onto the blacklist in
one step, so no lookup can observe it as neither.
"""

from __future__ import annotations

import json
import string
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .codec import MAX_LABEL_LENGTH, DomainName, InvalidName, fold, parse_name

ALPHABETS = {
    "base32": "abcdefghijklmnopqrstuvwxyz234567",
    "base64url": string.ascii_letters + string.digits + "-_",
    "hex": "0123456789abcdef",
    "alphanumeric": string.ascii_lowercase + string.digits,
}
CUSTOM_PREFIX = "custom:"
PROVENANCES = ("imported", "invalidated", "detected")
ACTIVE, INVALIDATED = "active", "invalidated"


class RegistryError(Exception):
    pass


class AlreadyRegistered(RegistryError):
    pass


class DomainBlacklisted(RegistryError):
    pass


class NotRegistered(RegistryError):
    pass


class IoFailure(RegistryError, OSError):
    pass


class MalformedRecord(RegistryError, ValueError):
    def __init__(self, lineno: int, reason: str, path: str | Path | None = None):
        where = f"{path}:{lineno}" if path is not None else f"line {lineno}"
        super().__init__(f"{where}: {reason}")
        self.lineno = lineno
        self.reason = reason


@dataclass(frozen=True)
class TunnelPattern:
    """How a registrant's encoded labels look.

    ``alphabet`` is one of the names in :data:`ALPHABETS` or ``"custom:<chars>"``.
    ``label_count_min``/``label_count_max`` bound the encoded labels that
    precede the registered suffix.
    """

    alphabet: str = "base32"
    max_label_length: int = MAX_LABEL_LENGTH
    max_total_length: int = 253
    label_count_min: int = 1
    label_count_max: int = 4

    def __post_init__(self):
        if self.alphabet.startswith(CUSTOM_PREFIX):
            if not self.alphabet[len(CUSTOM_PREFIX):]:
                raise ValueError("custom alphabet is empty")
        elif self.alphabet not in ALPHABETS:
            raise ValueError(f"unknown alphabet {self.alphabet!r}")
        for attr in ("max_label_length", "max_total_length", "label_count_min", "label_count_max"):
            if type(getattr(self, attr)) is not int:
                raise ValueError(f"{attr} must be an integer")
        if not 1 <= self.max_label_length <= MAX_LABEL_LENGTH:
            raise ValueError(f"max_label_length must lie in 1..{MAX_LABEL_LENGTH}")
        if not 1 <= self.max_total_length <= 255:
            raise ValueError("max_total_length must lie in 1..255")
        if not 0 <= self.label_count_min <= self.label_count_max:
            raise ValueError("label_count_min must not exceed label_count_max")

    @property
    def charset(self) -> frozenset[int]:
        chars = (
            self.alphabet[len(CUSTOM_PREFIX):]
            if self.alphabet.startswith(CUSTOM_PREFIX)
            else ALPHABETS[self.alphabet]
        )
        return frozenset(fold(chars.encode("utf-8")))

    def to_dict(self) -> dict:
        return {
            "alphabet": self.alphabet,
            "max_label_length": self.max_label_length,
            "max_total_length": self.max_total_length,
            "label_count_min": self.label_count_min,
            "label_count_max": self.label_count_max,
        }


def matches_pattern(
    prefix_labels: Sequence[bytes], pattern: TunnelPattern, suffix: DomainName | None = None
) -> bool:
    """Check encoded labels against a pattern; matching is ASCII case-insensitive.

    The total-length bound applies to the full presentation name, so the
    registered ``suffix`` is counted when given.
    """
    if not pattern.label_count_min <= len(prefix_labels) <= pattern.label_count_max:
        return False
    charset = pattern.charset
    for label in prefix_labels:
        if not label or len(label) > pattern.max_label_length:
            return False
        if not set(fold(label)) <= charset:
            return False
    total = sum(len(label) for label in prefix_labels) + len(prefix_labels)
    total += suffix.text_length if suffix is not None and suffix.labels else -1
    return total <= pattern.max_total_length


@dataclass(frozen=True)
class RegistryEntry:
    domain: DomainName
    pattern: TunnelPattern
    registrant: str = ""
    status: str = ACTIVE
    created: float = 0.0
    updated: float = 0.0

    @property
    def active(self) -> bool:
        return self.status == ACTIVE


@dataclass(frozen=True)
class BlacklistItem:
    domain: DomainName
    provenance: str
    created: float = 0.0
    updated: float = 0.0


@dataclass(frozen=True)
class WhitelistHit:
    entry: RegistryEntry
    matched: bool


class Registry:
    """Registered tunnel domains and a blacklist, persisted as JSON lines."""

    def __init__(self, clock=time.time):
        self._clock = clock
        self._entries: list[RegistryEntry] = []
        self._active: dict[DomainName, RegistryEntry] = {}
        self._blacklist: dict[DomainName, BlacklistItem] = {}
        self._lock = threading.RLock()

    # -- whitelist ------------------------------------------------------

    def register(self, domain: DomainName | str, pattern: TunnelPattern, registrant: str = "") -> RegistryEntry:
        domain = parse_name(domain)
        if len(domain.labels) < 2:
            raise InvalidName("registered domains need at least two labels")
        with self._lock:
            if domain in self._active:
                raise AlreadyRegistered(str(domain))
            if self.blacklist_contains(domain):
                raise DomainBlacklisted(str(domain))
            now = self._clock()
            entry = RegistryEntry(domain, pattern, registrant, ACTIVE, now, now)
            self._entries.append(entry)
            self._active[domain] = entry
            return entry

    def lookup_whitelist(self, qname: DomainName | str) -> WhitelistHit | None:
        qname = parse_name(qname)
        for suffix in qname.suffixes():
            entry = self._active.get(suffix)
            if entry is not None:
                prefix = qname.prefix_labels(suffix)
                return WhitelistHit(entry, matches_pattern(prefix, entry.pattern, suffix))
        return None

    def screen(self, qname: DomainName | str) -> tuple[bool, WhitelistHit | None]:
        """Blacklist membership and whitelist hit, read together under the lock."""
        qname = parse_name(qname)
        with self._lock:
            if self.blacklist_contains(qname):
                return True, None
            return False, self.lookup_whitelist(qname)

    def invalidate(self, domain: DomainName | str) -> RegistryEntry:
        domain = parse_name(domain)
        with self._lock:
            if domain not in self._active:
                raise NotRegistered(str(domain))
            # blacklist first: a concurrent reader then sees it blacklisted, never neither
            self._add_blacklist(domain, "invalidated")
            return self._deactivate(domain)

    def _deactivate(self, domain: DomainName) -> RegistryEntry:
        old = self._active.pop(domain)
        new = replace(old, status=INVALIDATED, updated=self._clock())
        self._entries[self._entries.index(old)] = new
        return new

    def entries(self) -> list[RegistryEntry]:
        return list(self._entries)

    def active_entries(self) -> list[RegistryEntry]:
        return [e for e in self._entries if e.active]

    # -- blacklist ------------------------------------------------------

    def blacklist_add(self, domain: DomainName | str, provenance: str = "imported") -> bool:
        """Add a suffix; returns False when it was already listed.

        Active registrations at or below the new suffix are invalidated.
        """
        domain = parse_name(domain)
        with self._lock:
            added = self._add_blacklist(domain, provenance)
            for registered in [d for d in self._active if d.is_subdomain_of(domain)]:
                self._deactivate(registered)
            return added

    def _add_blacklist(self, domain: DomainName, provenance: str) -> bool:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        if not domain.labels:
            raise InvalidName("cannot blacklist the root")
        if domain in self._blacklist:
            return False
        now = self._clock()
        self._blacklist[domain] = BlacklistItem(domain, provenance, now, now)
        return True

    def blacklist_contains(self, qname: DomainName | str) -> bool:
        qname = parse_name(qname)
        return any(suffix in self._blacklist for suffix in qname.suffixes())

    def blacklist(self) -> list[BlacklistItem]:
        return list(self._blacklist.values())

    def import_blacklist(self, path: str | Path, provenance: str = "imported") -> int:
        """Bulk-add domains from a plain text file; returns how many were new."""
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        added = 0
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                domain = parse_name(line)
            except InvalidName as exc:
                raise MalformedRecord(lineno, str(exc), path) from exc
            added += self.blacklist_add(domain, provenance)
        return added

    # -- persistence ----------------------------------------------------

    def records(self) -> list[dict]:
        out = []
        with self._lock:
            for e in self._entries:
                out.append(
                    {
                        "kind": "entry",
                        "domain": e.domain.to_text(),
                        "pattern": e.pattern.to_dict(),
                        "registrant": e.registrant,
                        "status": e.status,
                        "created": e.created,
                        "updated": e.updated,
                    }
                )
            for b in self._blacklist.values():
                out.append(
                    {
                        "kind": "blacklist",
                        "domain": b.domain.to_text(),
                        "provenance": b.provenance,
                        "created": b.created,
                        "updated": b.updated,
                    }
                )
        return out

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def save(self, path: str | Path) -> None:
        data = self.dumps()
        try:
            Path(path).write_text(data, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def loads(cls, text: str, path: str | Path | None = None, clock=time.time) -> Registry:
        reg = cls(clock=clock)
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                reg._load_record(json.loads(line))
            except MalformedRecord:
                raise
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise MalformedRecord(lineno, str(exc) or type(exc).__name__, path) from exc
        return reg

    @classmethod
    def load(cls, path: str | Path, clock=time.time) -> Registry:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return cls.loads(text, path, clock)

    def _load_record(self, rec: dict) -> None:
        if not isinstance(rec, dict):
            raise ValueError("record is not an object")
        kind = rec["kind"]
        domain = parse_name(rec["domain"])
        created, updated = _timestamp(rec["created"]), _timestamp(rec["updated"])
        if kind == "entry":
            extra = set(rec) - {"kind", "domain", "pattern", "registrant", "status", "created", "updated"}
            if extra:
                raise ValueError(f"unexpected fields {sorted(extra)}")
            if len(domain.labels) < 2:
                raise ValueError("registered domains need at least two labels")
            p = rec["pattern"]
            if set(p) != set(TunnelPattern().to_dict()):
                raise ValueError("pattern fields do not match the schema")
            pattern = TunnelPattern(**p)
            status = rec.get("status", ACTIVE)
            if status not in (ACTIVE, INVALIDATED):
                raise ValueError(f"unknown status {status!r}")
            registrant = rec.get("registrant", "")
            if not isinstance(registrant, str):
                raise ValueError("registrant must be text")
            entry = RegistryEntry(domain, pattern, registrant, status, created, updated)
            if entry.active:
                if domain in self._active:
                    raise ValueError(f"second active entry for {domain}")
                if self.blacklist_contains(domain):
                    raise ValueError(f"{domain} is both active and blacklisted")
                self._active[domain] = entry
            self._entries.append(entry)
        elif kind == "blacklist":
            extra = set(rec) - {"kind", "domain", "provenance", "created", "updated"}
            if extra:
                raise ValueError(f"unexpected fields {sorted(extra)}")
            provenance = rec.get("provenance", "imported")
            if provenance not in PROVENANCES:
                raise ValueError(f"unknown provenance {provenance!r}")
            if domain in self._blacklist:
                raise ValueError(f"duplicate blacklist item {domain}")
            if not domain.labels:
                raise ValueError("cannot blacklist the root")
            if any(d.is_subdomain_of(domain) for d in self._active):
                raise ValueError(f"{domain} covers an active registration")
            self._blacklist[domain] = BlacklistItem(domain, provenance, created, updated)
        else:
            raise ValueError(f"unknown kind {kind!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Registry):
            return NotImplemented
        return self.records() == other.records()


def _timestamp(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("timestamps must be numbers")
    return float(value)


"""A scriptable UDP DNS server standing in for upstream resolvers in tests.

A script maps name patterns to behaviours. ``"*.zone"`` covers the zone and
everything below it; a bare name covers only itself. The longest matching
pattern wins. Behaviours can be given as :class:`Behavior` objects or as
short strings::

    {"*.tun.example": "NXDOMAIN",
     "*.wild.example": "A 127.0.0.1",
     "slow.example": "silence",
     "*.cdn.example": "distinct"}
"""

from __future__ import annotations

import asyncio
import hashlib
import ipaddress
import threading
from dataclasses import dataclass, replace
from typing import Mapping

from ..codec import (
    DecodeError,
    DnsMessage,
    DomainName,
    QClass,
    QType,
    Rcode,
    ResourceRecord,
    decode,
    encode,
    make_response,
    parse_name,
)

KINDS = ("answer", "nxdomain", "nodata", "servfail", "silence", "distinct")


@dataclass(frozen=True)
class Behavior:
    kind: str
    records: tuple[tuple[int, object], ...] = ()  # (rtype, rdata) pairs for "answer"
    ttl: int = 300
    mismatch_first: bool = False  # send a reply with a wrong id before the real one

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown behaviour {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> Behavior:
        word, _, rest = text.strip().partition(" ")
        upper = word.upper()
        if upper in ("A", "AAAA"):
            addrs = tuple(ipaddress.ip_address(a) for a in rest.split())
            rtype = QType.A if upper == "A" else QType.AAAA
            return cls("answer", tuple((rtype, a) for a in addrs))
        if upper == "TXT":
            return cls("answer", ((QType.TXT, (rest.encode("utf-8"),)),))
        return cls(word.lower())


def _pattern_key(pattern: str) -> tuple[DomainName, bool]:
    if pattern.startswith("*."):
        return parse_name(pattern[2:]), True
    return parse_name(pattern), False


class StubUpstream:
    def __init__(self, script: Mapping[str, Behavior | str] | None = None, default: Behavior | str = "nxdomain"):
        self.rules: list[tuple[DomainName, bool, Behavior]] = []
        for pattern, behavior in (script or {}).items():
            name, wildcard = _pattern_key(pattern)
            b = behavior if isinstance(behavior, Behavior) else Behavior.parse(behavior)
            self.rules.append((name, wildcard, b))
        # longest pattern first; exact before wildcard on equal length
        self.rules.sort(key=lambda r: (-len(r[0].labels), r[1]))
        self.default = default if isinstance(default, Behavior) else Behavior.parse(default)
        self.received: list[DnsMessage] = []
        self.transport: asyncio.DatagramTransport | None = None
        self._lock = threading.Lock()

    def behavior_for(self, qname: DomainName) -> Behavior:
        for name, wildcard, b in self.rules:
            if (wildcard and qname.is_subdomain_of(name)) or qname == name:
                return b
        return self.default

    def respond(self, query: DnsMessage) -> list[DnsMessage]:
        """The datagrams the stub sends back for ``query`` (possibly none)."""
        if not query.questions:
            return [make_response(query, Rcode.FORMERR)]
        q = query.questions[0]
        b = self.behavior_for(q.qname)
        if b.kind == "silence":
            return []
        if b.kind == "nxdomain":
            reply = make_response(query, Rcode.NXDOMAIN, aa=True)
        elif b.kind == "servfail":
            reply = make_response(query, Rcode.SERVFAIL)
        elif b.kind == "nodata":
            reply = make_response(query, Rcode.NOERROR, aa=True)
        elif b.kind == "distinct":
            digest = hashlib.sha256(b".".join(q.qname.key)).digest()
            rr = ResourceRecord(q.qname, QType.A, QClass.IN, b.ttl, ipaddress.IPv4Address(digest[:4]))
            reply = make_response(query, Rcode.NOERROR, [rr], aa=True)
        else:
            rrs = [ResourceRecord(q.qname, rtype, QClass.IN, b.ttl, rdata) for rtype, rdata in b.records]
            reply = make_response(query, Rcode.NOERROR, rrs, aa=True)
        out = [reply]
        if b.mismatch_first:
            wrong = replace(reply.header, id=(reply.header.id + 1) & 0xFFFF)
            out.insert(0, replace(reply, header=wrong))
        return out

    def queries_for(self, qname: str | DomainName) -> list[DnsMessage]:
        name = parse_name(qname)
        return [m for m in self.received if m.questions and m.questions[0].qname == name]

    # -- asyncio server -------------------------------------------------

    class _Protocol(asyncio.DatagramProtocol):
        def __init__(self, stub: StubUpstream):
            self.stub = stub

        def connection_made(self, transport):
            self.stub.transport = transport

        def datagram_received(self, data, addr):
            try:
                query = decode(data)
            except DecodeError:
                return
            with self.stub._lock:
                self.stub.received.append(query)
            for reply in self.stub.respond(query):
                self.stub.transport.sendto(encode(reply), addr)

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        loop = asyncio.get_running_loop()
        await loop.create_datagram_endpoint(lambda: self._Protocol(self), local_addr=(host, port))
        return self.address

    @property
    def address(self) -> tuple[str, int]:
        return self.transport.get_extra_info("sockname")[:2]

    def close(self) -> None:
        if self.transport is not None:
            self.transport.close()


async def stub_upstream(script: Mapping[str, Behavior | str], default: Behavior | str = "nxdomain") -> StubUpstream:
    stub = StubUpstream(script, default)
    await stub.start()
    return stub

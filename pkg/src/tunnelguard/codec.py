"""DNS wire format: names, messages and resource records.

Only the subset needed by the forwarder is implemented (the RFC 1035 message format).
The encoder never emits compression pointers; the decoder follows them.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import total_ordering
from typing import Iterable, Union

MAX_LABEL_LENGTH = 63
MAX_NAME_LENGTH = 255  # wire octets, including length octets and the root
UDP_PAYLOAD_LIMIT = 512
HEADER_LENGTH = 12


class QType(IntEnum):
    A = 1
    NS = 2
    CNAME = 5
    SOA = 6
    PTR = 12
    MX = 15
    TXT = 16
    AAAA = 28
    NULL = 10
    ANY = 255


class QClass(IntEnum):
    IN = 1


class Rcode(IntEnum):
    NOERROR = 0
    FORMERR = 1
    SERVFAIL = 2
    NXDOMAIN = 3
    NOTIMP = 4
    REFUSED = 5


class DnsError(Exception):
    """Base class for everything the codec raises."""


class InvalidName(DnsError, ValueError):
    pass


class EmptyLabel(InvalidName):
    pass


class LabelTooLong(InvalidName):
    pass


class NameTooLong(InvalidName):
    pass


class DecodeError(DnsError, ValueError):
    pass


class Truncated(DecodeError):
    pass


class PointerLoop(DecodeError):
    pass


class BadLabelLength(DecodeError):
    pass


class MessageTooLarge(DnsError):
    pass


_ASCII_FOLD = bytes.maketrans(b"ABCDEFGHIJKLMNOPQRSTUVWXYZ", b"abcdefghijklmnopqrstuvwxyz")


def fold(label: bytes) -> bytes:
    """Lowercase ASCII letters only; every other octet is left alone."""
    return label.translate(_ASCII_FOLD)


@total_ordering
class DomainName:
    """An absolute domain name held as a tuple of raw label octets.

    Comparison and hashing fold ASCII case; the original octets are kept so
    re-encoding reproduces the input exactly.
    """

    __slots__ = ("labels", "_key")

    def __init__(self, labels: Iterable[bytes] = ()):
        labels = tuple(bytes(label) for label in labels)
        for label in labels:
            if not label:
                raise EmptyLabel("empty label")
            if len(label) > MAX_LABEL_LENGTH:
                raise LabelTooLong(f"label of {len(label)} octets exceeds {MAX_LABEL_LENGTH}")
        wire = sum(len(label) + 1 for label in labels) + 1
        if wire > MAX_NAME_LENGTH:
            raise NameTooLong(f"name of {wire} wire octets exceeds {MAX_NAME_LENGTH}")
        self.labels = labels
        self._key = tuple(fold(label) for label in labels)

    @property
    def key(self) -> tuple[bytes, ...]:
        return self._key

    @property
    def wire_length(self) -> int:
        return sum(len(label) + 1 for label in self.labels) + 1

    @property
    def text_length(self) -> int:
        """Octets of the name without the trailing dot, one per separator."""
        if not self.labels:
            return 0
        return sum(len(label) for label in self.labels) + len(self.labels) - 1

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DomainName):
            return NotImplemented
        return self._key == other._key

    def __lt__(self, other: DomainName) -> bool:
        if not isinstance(other, DomainName):
            return NotImplemented
        return self._key < other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"DomainName({self.to_text()!r})"

    def __str__(self) -> str:
        return self.to_text()

    def to_text(self) -> str:
        if not self.labels:
            return "."
        return ".".join(_escape_label(label) for label in self.labels)

    def suffix(self, n: int) -> DomainName:
        """The last ``n`` labels."""
        if n <= 0:
            return DomainName()
        return DomainName(self.labels[-n:])

    def prefix_labels(self, suffix: DomainName) -> tuple[bytes, ...]:
        return self.labels[: len(self.labels) - len(suffix.labels)]

    def is_subdomain_of(self, other: DomainName) -> bool:
        n = len(other._key)
        return n <= len(self._key) and (n == 0 or self._key[-n:] == other._key)

    def suffixes(self) -> Iterable[DomainName]:
        """Proper and improper suffixes, longest first, root excluded."""
        for i in range(len(self.labels)):
            yield DomainName(self.labels[i:])


def _escape_label(label: bytes) -> str:
    out = []
    for b in label:
        c = chr(b)
        if c in ".\\":
            out.append("\\" + c)
        elif 0x21 <= b <= 0x7E:
            out.append(c)
        else:
            out.append(f"\\{b:03d}")
    return "".join(out)


def parse_name(text: str | DomainName) -> DomainName:
    """Parse a presentation-format name; ``\\.`` and ``\\DDD`` escapes are honored."""
    if isinstance(text, DomainName):
        return text
    if text == ".":
        return DomainName()
    labels: list[bytes] = []
    current = bytearray()
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\":
            digits = text[i + 1 : i + 4]
            if len(digits) == 3 and digits.isdigit():
                current.append(int(digits) & 0xFF)
                i += 4
            elif i + 1 < len(text):
                current += text[i + 1].encode("utf-8")
                i += 2
            else:
                raise InvalidName(f"dangling escape in {text!r}")
            continue
        if c == ".":
            if not current:
                raise EmptyLabel(f"empty label in {text!r}")
            labels.append(bytes(current))
            current = bytearray()
        else:
            current += c.encode("utf-8")
        i += 1
    if current:
        labels.append(bytes(current))
    elif not labels:
        raise EmptyLabel("empty name")
    return DomainName(labels)


@dataclass(frozen=True)
class MxData:
    preference: int
    exchange: DomainName


@dataclass(frozen=True)
class SoaData:
    mname: DomainName
    rname: DomainName
    serial: int
    refresh: int
    retry: int
    expire: int
    minimum: int


Rdata = Union[
    ipaddress.IPv4Address, ipaddress.IPv6Address, tuple, DomainName, MxData, SoaData, bytes
]

_NAME_RDATA = {QType.CNAME, QType.NS, QType.PTR}


@dataclass(frozen=True)
class DnsHeader:
    id: int = 0
    qr: bool = False
    opcode: int = 0
    aa: bool = False
    tc: bool = False
    rd: bool = False
    ra: bool = False
    rcode: int = 0

    def flags(self) -> int:
        return (
            (self.qr << 15)
            | ((self.opcode & 0xF) << 11)
            | (self.aa << 10)
            | (self.tc << 9)
            | (self.rd << 8)
            | (self.ra << 7)
            | (self.rcode & 0xF)
        )

    @classmethod
    def from_flags(cls, id: int, flags: int) -> DnsHeader:
        return cls(
            id=id,
            qr=bool(flags >> 15 & 1),
            opcode=flags >> 11 & 0xF,
            aa=bool(flags >> 10 & 1),
            tc=bool(flags >> 9 & 1),
            rd=bool(flags >> 8 & 1),
            ra=bool(flags >> 7 & 1),
            rcode=flags & 0xF,
        )


@dataclass(frozen=True)
class Question:
    qname: DomainName
    qtype: int = QType.A
    qclass: int = QClass.IN


@dataclass(frozen=True)
class ResourceRecord:
    name: DomainName
    rtype: int
    rclass: int
    ttl: int
    rdata: Rdata

    def with_ttl(self, ttl: int) -> ResourceRecord:
        return ResourceRecord(self.name, self.rtype, self.rclass, ttl, self.rdata)


@dataclass(frozen=True)
class DnsMessage:
    header: DnsHeader = field(default_factory=DnsHeader)
    questions: tuple[Question, ...] = ()
    answers: tuple[ResourceRecord, ...] = ()
    authorities: tuple[ResourceRecord, ...] = ()
    additionals: tuple[ResourceRecord, ...] = ()

    def __post_init__(self):
        for name in ("questions", "answers", "authorities", "additionals"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    # Section counts are always derived from the sections themselves.
    @property
    def qdcount(self) -> int:
        return len(self.questions)

    @property
    def ancount(self) -> int:
        return len(self.answers)

    @property
    def nscount(self) -> int:
        return len(self.authorities)

    @property
    def arcount(self) -> int:
        return len(self.additionals)

    @property
    def rcode(self) -> int:
        return self.header.rcode


# -- encoding ---------------------------------------------------------------


def encode_name(name: DomainName) -> bytes:
    out = bytearray()
    for label in name.labels:
        out.append(len(label))
        out += label
    out.append(0)
    return bytes(out)


def _character_string(s: bytes) -> bytes:
    if len(s) > 255:
        raise ValueError("character-string longer than 255 octets")
    return bytes([len(s)]) + s


def encode_rdata(rtype: int, rdata: Rdata) -> bytes:
    if isinstance(rdata, bytes):
        return rdata
    if isinstance(rdata, (ipaddress.IPv4Address, ipaddress.IPv6Address)):
        return rdata.packed
    if isinstance(rdata, DomainName):
        return encode_name(rdata)
    if isinstance(rdata, tuple):
        return b"".join(_character_string(s) for s in rdata)
    if isinstance(rdata, MxData):
        return struct.pack("!H", rdata.preference) + encode_name(rdata.exchange)
    if isinstance(rdata, SoaData):
        return (
            encode_name(rdata.mname)
            + encode_name(rdata.rname)
            + struct.pack("!5I", rdata.serial, rdata.refresh, rdata.retry, rdata.expire, rdata.minimum)
        )
    raise TypeError(f"unsupported rdata {type(rdata).__name__} for type {rtype}")


def _encode_rr(rr: ResourceRecord) -> bytes:
    payload = encode_rdata(rr.rtype, rr.rdata)
    if len(payload) > 0xFFFF:
        raise ValueError("rdata too long")
    return encode_name(rr.name) + struct.pack("!HHIH", rr.rtype, rr.rclass, rr.ttl, len(payload)) + payload


def _encode_question(q: Question) -> bytes:
    return encode_name(q.qname) + struct.pack("!HH", q.qtype, q.qclass)


def encode(msg: DnsMessage) -> bytes:
    out = bytearray(
        struct.pack(
            "!6H", msg.header.id, msg.header.flags(), msg.qdcount, msg.ancount, msg.nscount, msg.arcount
        )
    )
    for q in msg.questions:
        out += _encode_question(q)
    for section in (msg.answers, msg.authorities, msg.additionals):
        for rr in section:
            out += _encode_rr(rr)
    return bytes(out)


def encode_udp(msg: DnsMessage, limit: int = UDP_PAYLOAD_LIMIT) -> bytes:
    """Encode for a UDP datagram; oversized messages lose whole records and get TC set."""
    wire = encode(msg)
    if len(wire) <= limit:
        return wire
    header = replace(msg.header, tc=True)
    size = HEADER_LENGTH + sum(len(_encode_question(q)) for q in msg.questions)
    if size > limit:
        raise MessageTooLarge(f"question section alone needs {size} octets")
    kept: list[list[ResourceRecord]] = [[], [], []]
    full = True
    for i, section in enumerate((msg.answers, msg.authorities, msg.additionals)):
        for rr in section:
            n = len(_encode_rr(rr))
            if not full or size + n > limit:
                full = False
                break
            kept[i].append(rr)
            size += n
    return encode(DnsMessage(header, msg.questions, *kept))


# -- decoding ---------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated(f"need {n} octets at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> DomainName:
        labels, self.pos = _read_name(self.data, self.pos)
        try:
            return DomainName(labels)
        except NameTooLong as exc:
            raise BadLabelLength(str(exc)) from exc


def _read_name(data: bytes, pos: int) -> tuple[list[bytes], int]:
    """Return the labels at ``pos`` and the offset just past the name in place."""
    labels: list[bytes] = []
    end = None
    visited: set[int] = set()
    while True:
        if pos >= len(data):
            raise Truncated(f"name runs past end of message at offset {pos}")
        length = data[pos]
        kind = length & 0xC0
        if kind == 0xC0:
            if pos + 1 >= len(data):
                raise Truncated("truncated compression pointer")
            target = (length & 0x3F) << 8 | data[pos + 1]
            if end is None:
                end = pos + 2
            if target in visited or len(visited) > len(data):
                raise PointerLoop(f"compression pointer loop at offset {pos}")
            visited.add(target)
            pos = target
            continue
        if kind:
            raise BadLabelLength(f"reserved label type 0x{length:02x} at offset {pos}")
        if length == 0:
            return labels, (end if end is not None else pos + 1)
        if pos + 1 + length > len(data):
            raise Truncated(f"label runs past end of message at offset {pos}")
        labels.append(data[pos + 1 : pos + 1 + length])
        pos += 1 + length


def _decode_rdata(reader: _Reader, rtype: int, rdlength: int) -> Rdata:
    start = reader.pos
    end = start + rdlength
    if end > len(reader.data):
        raise Truncated("rdata runs past end of message")
    raw = reader.data[start:end]
    try:
        if rtype == QType.A and rdlength == 4:
            value: Rdata = ipaddress.IPv4Address(raw)
        elif rtype == QType.AAAA and rdlength == 16:
            value = ipaddress.IPv6Address(raw)
        elif rtype == QType.TXT and rdlength > 0:
            strings = []
            i = 0
            while i < rdlength:
                n = raw[i]
                if i + 1 + n > rdlength:
                    raise Truncated("TXT character-string overruns rdata")
                strings.append(raw[i + 1 : i + 1 + n])
                i += 1 + n
            value = tuple(strings)
        elif rtype in _NAME_RDATA:
            value = reader.name()
        elif rtype == QType.MX:
            (pref,) = reader.unpack("!H")
            value = MxData(pref, reader.name())
        elif rtype == QType.SOA:
            mname = reader.name()
            rname = reader.name()
            value = SoaData(mname, rname, *reader.unpack("!5I"))
        else:
            value = raw
    finally:
        reader.pos = end
    return value


def _decode_rr(reader: _Reader) -> ResourceRecord:
    name = reader.name()
    rtype, rclass, ttl, rdlength = reader.unpack("!HHIH")
    return ResourceRecord(name, rtype, rclass, ttl, _decode_rdata(reader, rtype, rdlength))


def decode_header(data: bytes) -> DnsHeader:
    if len(data) < HEADER_LENGTH:
        raise Truncated(f"message of {len(data)} octets is shorter than the header")
    id_, flags = struct.unpack("!HH", data[:4])
    return DnsHeader.from_flags(id_, flags)


def decode(data: bytes) -> DnsMessage:
    reader = _Reader(bytes(data))
    header = decode_header(reader.data)
    _, _, qd, an, ns, ar = reader.unpack("!6H")
    questions = []
    for _ in range(qd):
        qname = reader.name()
        qtype, qclass = reader.unpack("!HH")
        questions.append(Question(qname, qtype, qclass))
    sections = []
    for count in (an, ns, ar):
        sections.append(tuple(_decode_rr(reader) for _ in range(count)))
    return DnsMessage(header, tuple(questions), *sections)


# -- convenience constructors -------------------------------------------------


def make_query(qname: str | DomainName, qtype: int = QType.A, id: int = 0, rd: bool = True) -> DnsMessage:
    return DnsMessage(DnsHeader(id=id, rd=rd), (Question(parse_name(qname), qtype, QClass.IN),))


def make_response(
    request: DnsMessage,
    rcode: int = Rcode.NOERROR,
    answers: Iterable[ResourceRecord] = (),
    authorities: Iterable[ResourceRecord] = (),
    additionals: Iterable[ResourceRecord] = (),
    aa: bool = False,
    ra: bool = True,
) -> DnsMessage:
    """A response that echoes the request id, opcode, RD bit and question section."""
    h = request.header
    header = DnsHeader(id=h.id, qr=True, opcode=h.opcode, aa=aa, rd=h.rd, ra=ra, rcode=rcode)
    return DnsMessage(header, request.questions, tuple(answers), tuple(authorities), tuple(additionals))

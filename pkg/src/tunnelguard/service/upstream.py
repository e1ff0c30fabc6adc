"""Query forwarding to an upstream resolver over UDP."""

from __future__ import annotations

import asyncio
import secrets
from dataclasses import dataclass, replace

from ..codec import DecodeError, DnsHeader, DnsMessage, Question, decode, encode

Address = tuple[str, int]


class UpstreamTimeout(Exception):
    def __init__(self, upstream: Address, transmissions: int):
        super().__init__(f"no valid answer from {upstream[0]}:{upstream[1]} after {transmissions} transmissions")
        self.upstream = upstream
        self.transmissions = transmissions


class MismatchedResponse(Exception):
    """A datagram whose id or question does not belong to the pending query."""


@dataclass
class Transmission:
    txid: int
    sent_at: float
    answered: bool = False


class _Collector(asyncio.DatagramProtocol):
    def __init__(self):
        self.queue: asyncio.Queue[bytes] = asyncio.Queue()

    def datagram_received(self, data, addr):
        self.queue.put_nowait(data)


def parse_address(text: str | Address, default_port: int = 53) -> Address:
    if isinstance(text, tuple):
        return text[0], int(text[1])
    host, sep, port = text.rpartition(":")
    if not sep:
        return text, default_port
    host = host.strip("[]")
    if not host:
        raise ValueError(f"bad address {text!r}")
    return host, int(port)


def check_response(data: bytes, txid: int, question: Question) -> DnsMessage:
    try:
        msg = decode(data)
    except DecodeError as exc:
        raise MismatchedResponse(f"undecodable response: {exc}") from exc
    if msg.header.id != txid or not msg.header.qr:
        raise MismatchedResponse("id mismatch")
    if len(msg.questions) != 1 or msg.questions[0] != question:
        raise MismatchedResponse("question mismatch")
    return msg


async def forward_upstream(
    question: Question,
    upstream: Address,
    timeout: float = 2.0,
    retries: int = 1,
    rd: bool = True,
    transmissions: list[Transmission] | None = None,
) -> DnsMessage:
    """Send ``question`` upstream, retrying on silence.

    Every transmission uses a fresh random id from a fresh socket. Datagrams
    that do not match the pending id and question are ignored and the wait
    continues until that transmission's deadline.
    """
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    loop = asyncio.get_running_loop()
    log = transmissions if transmissions is not None else []
    for _ in range(retries + 1):
        txid = secrets.randbits(16)
        query = DnsMessage(DnsHeader(id=txid, rd=rd), (question,))
        transport, proto = await loop.create_datagram_endpoint(_Collector, remote_addr=upstream)
        try:
            log.append(Transmission(txid, loop.time()))
            transport.sendto(encode(query))
            deadline = loop.time() + timeout
            while (left := deadline - loop.time()) > 0:
                try:
                    data = await asyncio.wait_for(proto.queue.get(), left)
                except asyncio.TimeoutError:
                    break
                try:
                    response = check_response(data, txid, question)
                except MismatchedResponse:
                    continue
                log[-1] = replace(log[-1], answered=True)
                return response
        finally:
            transport.close()
    raise UpstreamTimeout(upstream, retries + 1)

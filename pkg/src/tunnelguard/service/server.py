"""The UDP front ends: the tunnel-validating forwarder and the user-end splitter."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass

from ..classifier import Classifier, Reason, Verdict
from ..codec import (
    HEADER_LENGTH,
    DecodeError,
    DnsMessage,
    Question,
    Rcode,
    decode,
    decode_header,
    encode_udp,
    make_response,
)
from ..registry import Registry
from ..uniformity import UniformityTracker
from .cache import ResponseCache, TtlClamps, cache_key
from .config import BlockPolicy, Mode, ServiceConfig
from .forensics import INBOUND, OUTBOUND, ForensicLog, LogRecord, new_correlation_id
from .upstream import Address, Transmission, UpstreamTimeout, forward_upstream

logger = logging.getLogger(__name__)

_POLICY_RCODE = {BlockPolicy.NXDOMAIN: Rcode.NXDOMAIN, BlockPolicy.SERVFAIL: Rcode.SERVFAIL}


@dataclass(frozen=True)
class HandleResult:
    action: str
    response: DnsMessage | None
    verdict: Verdict | None = None
    upstream: Address | None = None


def _fmt(addr) -> str:
    if addr is None:
        return ""
    return f"{addr[0]}:{addr[1]}"


class _Frontend:
    mode = "validator"

    def __init__(self, config: ServiceConfig, classifier: Classifier, log: ForensicLog | None = None, clock=time.time):
        self.config = config
        self.classifier = classifier
        self.log = log if log is not None else ForensicLog(config.log, config.log_buffer)
        self.clock = clock

    # -- logging helpers ------------------------------------------------

    def _inbound(self, q: Question, client, verdict, action, rcode, cache_hit, corr, now):
        self.log.append(
            LogRecord(
                now, INBOUND, _fmt(client), q.qname.to_text(), int(q.qtype),
                verdict.decision.value if verdict else None,
                verdict.reason.value if verdict else None,
                verdict.score if verdict else None,
                action, None if rcode is None else int(rcode), cache_hit, corr, self.mode,
            )
        )

    def _outbound(self, q: Question, upstream, verdict, sent: list[Transmission], response, corr):
        for i, t in enumerate(sent):
            answered = t.answered and i == len(sent) - 1
            self.log.append(
                LogRecord(
                    self.clock(), OUTBOUND, _fmt(upstream), q.qname.to_text(), int(q.qtype),
                    verdict.decision.value if verdict else None,
                    verdict.reason.value if verdict else None,
                    verdict.score if verdict else None,
                    "forwarded", int(response.header.rcode) if answered and response else None,
                    False, corr, self.mode,
                )
            )

    async def _forward(self, q: Question, upstream: Address, verdict, corr) -> DnsMessage | None:
        """Forward and log each transmission; ``None`` means the upstream stayed silent."""
        sent: list[Transmission] = []
        response = None
        try:
            response = await forward_upstream(q, upstream, self.config.timeout, self.config.retries, transmissions=sent)
        except UpstreamTimeout:
            pass
        finally:
            self._outbound(q, upstream, verdict, sent, response, corr)
        return response

    # -- wire level -----------------------------------------------------

    async def handle_query(self, request: DnsMessage, client, now: float | None = None) -> HandleResult:
        raise NotImplementedError

    def _reject(self, request: DnsMessage, client, now) -> HandleResult:
        response = make_response(request, Rcode.FORMERR)
        q = request.questions[0] if request.questions else None
        if q is not None:
            self._inbound(q, client, None, "rejected", Rcode.FORMERR, False, new_correlation_id(), now)
        return HandleResult("rejected", response)

    async def handle_datagram(self, data: bytes, client) -> bytes | None:
        try:
            request = decode(data)
        except DecodeError:
            if len(data) < HEADER_LENGTH:
                return None
            header = decode_header(data)
            if header.qr:
                return None
            return encode_udp(make_response(DnsMessage(header), Rcode.FORMERR))
        if request.header.qr:
            return None
        result = await self.handle_query(request, client)
        if result.response is None:
            return None
        return encode_udp(result.response)


class TunnelValidator(_Frontend):
    """Classify, then block by policy or answer from cache / upstream."""

    mode = "validator"

    def __init__(
        self,
        config: ServiceConfig,
        classifier: Classifier,
        cache: ResponseCache | None = None,
        log: ForensicLog | None = None,
        clock=time.time,
    ):
        super().__init__(config, classifier, log, clock)
        if classifier.registry is None:
            classifier.registry = Registry()
        if classifier.tracker is None:
            classifier.tracker = UniformityTracker(config.classifier.zone_depth)
        self.cache = cache or ResponseCache(TtlClamps(config.min_ttl, config.max_ttl, config.negative_ttl))
        self._inflight: dict = {}

    @property
    def registry(self) -> Registry:
        return self.classifier.registry

    @property
    def tracker(self) -> UniformityTracker:
        return self.classifier.tracker

    async def handle_query(self, request: DnsMessage, client, now: float | None = None) -> HandleResult:
        now = self.clock() if now is None else now
        if len(request.questions) != 1 or request.header.opcode != 0:
            return self._reject(request, client, now)
        q = request.questions[0]
        key = cache_key(q.qname, q.qtype)
        probe = self.cache.peek(key, now)
        verdict = self.classifier.classify(q.qname, cache_probe=probe)
        corr = new_correlation_id()

        if not verdict.secure:
            if self.config.promote_detections and verdict.reason is Reason.UNIFORM_ZONE:
                self.registry.blacklist_add(self.tracker.zone_for(q.qname), "detected")
            if self.config.policy is BlockPolicy.DROP:
                self._inbound(q, client, verdict, "dropped", None, probe, corr, now)
                return HandleResult("dropped", None, verdict)
            rcode = _POLICY_RCODE[self.config.policy]
            self._inbound(q, client, verdict, "blocked", rcode, probe, corr, now)
            return HandleResult("blocked", make_response(request, rcode), verdict)

        entry = self.cache.get(key, now)
        if entry is not None:
            response = make_response(request, entry.rcode, entry.answers_at(now))
            self._inbound(q, client, verdict, "served_cache", entry.rcode, True, corr, now)
            return HandleResult("served_cache", response, verdict)

        upstream_response, corr = await self._coalesced(q, key, verdict, corr, now)
        if upstream_response is None:
            self._inbound(q, client, verdict, "forwarded", Rcode.SERVFAIL, probe, corr, now)
            return HandleResult("forwarded", make_response(request, Rcode.SERVFAIL), verdict, self.config.upstream)
        h = upstream_response.header
        response = make_response(
            request, h.rcode, upstream_response.answers, upstream_response.authorities,
            upstream_response.additionals, aa=False, ra=True,
        )
        self._inbound(q, client, verdict, "forwarded", h.rcode, probe, corr, now)
        return HandleResult("forwarded", response, verdict, self.config.upstream)

    async def _coalesced(self, q: Question, key, verdict, corr, now: float) -> tuple[DnsMessage | None, str]:
        """One upstream transaction per key; concurrent askers share its result."""
        pending = self._inflight.get(key)
        if pending is not None:
            return await asyncio.shield(pending)
        fut = asyncio.get_running_loop().create_future()
        self._inflight[key] = fut
        try:
            response = await self._forward(q, self.config.upstream, verdict, corr)
            self.tracker.observe(q.qname, response, now)
            if response is not None:
                self.cache.put(key, response.answers, response.header.rcode, now, response.authorities)
            fut.set_result((response, corr))
            return response, corr
        except BaseException as exc:
            fut.set_exception(exc)
            # followers (if any) observe the error; keep it from being reported as unretrieved
            fut.exception()
            raise
        finally:
            del self._inflight[key]


class Splitter(_Frontend):
    """User-end firewall: suspicious names go to the validator, the rest to a normal resolver."""

    mode = "splitter"

    def __init__(self, config: ServiceConfig, classifier: Classifier, log: ForensicLog | None = None, clock=time.time):
        super().__init__(config, classifier, log, clock)
        # no registry at the firewall; only uniformity and feature rules apply
        classifier.registry = None
        if classifier.tracker is None:
            classifier.tracker = UniformityTracker(config.classifier.zone_depth)

    @property
    def tracker(self) -> UniformityTracker:
        return self.classifier.tracker

    def choose(self, q: Question) -> tuple[Address, Verdict]:
        verdict = self.classifier.classify(q.qname)
        target = self.config.normal_upstream if verdict.secure else self.config.validator_upstream
        return target, verdict

    async def route(self, request: DnsMessage, client, now: float | None = None) -> HandleResult:
        now = self.clock() if now is None else now
        if len(request.questions) != 1 or request.header.opcode != 0:
            return self._reject(request, client, now)
        q = request.questions[0]
        target, verdict = self.choose(q)
        corr = new_correlation_id()
        upstream_response = await self._forward(q, target, verdict, corr)
        self.tracker.observe(q.qname, upstream_response, now)
        if upstream_response is None:
            response = make_response(request, Rcode.SERVFAIL)
        else:
            h = upstream_response.header
            response = DnsMessage(
                type(h)(id=request.header.id, qr=True, opcode=h.opcode, aa=h.aa, tc=h.tc, rd=h.rd, ra=h.ra, rcode=h.rcode),
                upstream_response.questions,
                upstream_response.answers,
                upstream_response.authorities,
                upstream_response.additionals,
            )
        self._inbound(q, client, verdict, "forwarded", response.header.rcode, False, corr, now)
        return HandleResult("forwarded", response, verdict, target)

    handle_query = route


class _ServerProtocol(asyncio.DatagramProtocol):
    def __init__(self, frontend: _Frontend):
        self.frontend = frontend
        self.transport: asyncio.DatagramTransport | None = None
        self.tasks: set[asyncio.Task] = set()

    def connection_made(self, transport):
        self.transport = transport

    def datagram_received(self, data, addr):
        task = asyncio.get_running_loop().create_task(self._answer(data, addr))
        self.tasks.add(task)
        task.add_done_callback(self.tasks.discard)

    async def _answer(self, data, addr):
        try:
            reply = await self.frontend.handle_datagram(data, addr)
        except Exception:
            logger.exception("query from %s failed", _fmt(addr))
            return
        if reply is not None and self.transport is not None:
            self.transport.sendto(reply, addr)


@dataclass
class RunningServer:
    frontend: _Frontend
    transport: asyncio.DatagramTransport
    protocol: _ServerProtocol
    log_task: asyncio.Task | None = None

    @property
    def address(self) -> Address:
        return self.transport.get_extra_info("sockname")[:2]

    async def close(self) -> None:
        self.transport.close()
        if self.protocol.tasks:
            await asyncio.gather(*self.protocol.tasks, return_exceptions=True)
        if self.log_task is not None:
            self.log_task.cancel()
            try:
                await self.log_task
            except asyncio.CancelledError:
                pass
        self.frontend.log.close()


def build_frontend(config: ServiceConfig, classifier: Classifier | None = None, log: ForensicLog | None = None) -> _Frontend:
    if classifier is None:
        registry = None
        if config.mode is Mode.VALIDATOR:
            registry = Registry.load(config.registry) if config.registry else Registry()
            if config.blacklist:
                registry.import_blacklist(config.blacklist)
        classifier = Classifier(config.classifier, registry, UniformityTracker(config.classifier.zone_depth))
    if config.mode is Mode.SPLITTER:
        return Splitter(config, classifier, log)
    return TunnelValidator(config, classifier, log=log)


async def start_server(frontend: _Frontend, listen: Address | None = None, flush_interval: float = 0.2) -> RunningServer:
    loop = asyncio.get_running_loop()
    listen = listen or frontend.config.listen
    transport, protocol = await loop.create_datagram_endpoint(lambda: _ServerProtocol(frontend), local_addr=listen)
    log_task = loop.create_task(frontend.log.run(flush_interval)) if flush_interval else None
    return RunningServer(frontend, transport, protocol, log_task)

import asyncio
import io
import ipaddress
import json
import random
import socket

import pytest

from tunnelguard.classifier import Classifier, Reason
from tunnelguard.codec import (
    DnsHeader, DnsMessage, QType, Question, Rcode, ResourceRecord, decode, encode, make_query, parse_name,
)
from tunnelguard.lab.stub import Behavior, StubUpstream
from tunnelguard.registry import Registry
from tunnelguard.service import (
    BlockPolicy, ForensicLog, LogRecord, Mode, ResponseCache, ServiceConfig, Splitter, TtlClamps,
    TunnelValidator, UpstreamTimeout, cache_key, forward_upstream, load_config, read_log, start_server,
)
from tunnelguard.uniformity import UniformityTracker

CLIENT = ("192.0.2.7", 40000)


def run(coro):
    return asyncio.run(coro)


def a_rr(name, ttl=300, addr="127.0.0.1"):
    return ResourceRecord(parse_name(name), QType.A, 1, ttl, ipaddress.IPv4Address(addr))


def make_validator(default_cfg, dictionary, upstream, registry=None, **kw):
    cfg = ServiceConfig(default_cfg, upstream=upstream, timeout=kw.pop("timeout", 0.3), **kw)
    clf = Classifier(default_cfg, registry or Registry(), UniformityTracker(), dictionary)
    return TunnelValidator(cfg, clf, log=ForensicLog(None, 1000))


# -- cache ---------------------------------------------------------------


def test_cache_positive_boundaries():
    c = ResponseCache(TtlClamps())
    key = cache_key(parse_name("www.example.com"), QType.A)
    c.put(key, [a_rr("www.example.com", 300)], Rcode.NOERROR, 1000.0)
    assert c.get(key, 1299.0) is not None
    assert c.get(key, 1301.0) is None
    assert (c.hits, c.misses) == (1, 1)


def test_cache_counts_ttl_down():
    c = ResponseCache(TtlClamps())
    key = cache_key(parse_name("www.example.com"), QType.A)
    c.put(key, [a_rr("www.example.com", 300)], Rcode.NOERROR, 0.0)
    (rr,) = c.get(key, 100.0).answers_at(100.0)
    assert rr.ttl == 200


def test_cache_negative_and_floor():
    c = ResponseCache(TtlClamps(min_ttl=1, negative_ttl=60))
    nx = cache_key(parse_name("nope.example"), QType.A)
    c.put(nx, [], Rcode.NXDOMAIN, 0.0)
    assert c.get(nx, 30.0) is not None
    assert c.get(nx, 61.0) is None
    zero = cache_key(parse_name("zero.example"), QType.A)
    entry = c.put(zero, [a_rr("zero.example", 0)], Rcode.NOERROR, 0.0)
    assert entry.ttl == 1
    assert c.get(zero, 0.5) is not None and c.get(zero, 1.0) is None


def test_cache_ignores_servfail_and_clamps_max():
    c = ResponseCache(TtlClamps(max_ttl=100))
    key = cache_key(parse_name("x.example"), QType.A)
    assert c.put(key, [], Rcode.SERVFAIL, 0.0) is None
    assert c.put(key, [a_rr("x.example", 10**6)], Rcode.NOERROR, 0.0).ttl == 100


def test_cache_key_is_case_insensitive():
    assert cache_key(parse_name("WWW.Example.com"), 1) == cache_key(parse_name("www.example.com"), 1)


# -- upstream forwarding -------------------------------------------------


def test_forward_happy_path():
    async def go():
        stub = StubUpstream({"www.example.com": "A 127.0.0.1"})
        addr = await stub.start()
        try:
            q = Question(parse_name("www.example.com"), QType.A)
            resp = await forward_upstream(q, addr, timeout=1.0)
        finally:
            stub.close()
        return resp, stub

    resp, stub = run(go())
    assert resp.header.rcode == Rcode.NOERROR
    assert resp.answers[0].rdata == ipaddress.IPv4Address("127.0.0.1")
    assert len(stub.received) == 1


def test_forward_silent_upstream_retries_then_times_out():
    async def go():
        stub = StubUpstream(default="silence")
        addr = await stub.start()
        sent = []
        try:
            with pytest.raises(UpstreamTimeout) as exc:
                await forward_upstream(Question(parse_name("a.example"), QType.A), addr, 0.1, 1, transmissions=sent)
        finally:
            stub.close()
        return exc.value, sent, stub

    err, sent, stub = run(go())
    assert err.transmissions == 2 and len(sent) == 2
    assert len(stub.received) == 2
    assert not any(t.answered for t in sent)


def test_forward_ignores_mismatched_id():
    async def go():
        stub = StubUpstream({"*.example": Behavior("nxdomain", mismatch_first=True)})
        addr = await stub.start()
        try:
            return await forward_upstream(Question(parse_name("a.example"), QType.A), addr, 1.0, 0)
        finally:
            stub.close()

    assert run(go()).header.rcode == Rcode.NXDOMAIN


# -- validator -----------------------------------------------------------


def test_validator_cold_then_warm(default_cfg, dictionary):
    async def go():
        stub = StubUpstream({"www.example.com": "A 127.0.0.1"})
        addr = await stub.start()
        v = make_validator(default_cfg, dictionary, addr)
        try:
            first = await v.handle_query(make_query("www.example.com", id=1), CLIENT, now=100.0)
            second = await v.handle_query(make_query("www.example.com", id=2), CLIENT, now=101.0)
        finally:
            stub.close()
        return v, stub, first, second

    v, stub, first, second = run(go())
    assert first.action == "forwarded" and second.action == "served_cache"
    assert len(stub.received) == 1
    assert second.response.header.id == 2
    assert second.response.answers[0].ttl == 299
    recs = v.log.records()
    inbound = [r for r in recs if r.direction == "inbound"]
    outbound = [r for r in recs if r.direction == "outbound"]
    assert len(inbound) == 2 and len(outbound) == 1
    assert outbound[0].correlation == inbound[0].correlation
    assert inbound[1].cache_hit and not inbound[0].cache_hit


@pytest.mark.parametrize("policy, rcode", [(BlockPolicy.NXDOMAIN, Rcode.NXDOMAIN), (BlockPolicy.SERVFAIL, Rcode.SERVFAIL), (BlockPolicy.DROP, None)])
def test_block_policies(default_cfg, dictionary, policy, rcode):
    reg = Registry()
    reg.blacklist_add("evil.example")

    async def go():
        stub = StubUpstream()
        addr = await stub.start()
        v = make_validator(default_cfg, dictionary, addr, reg, policy=policy)
        try:
            res = await v.handle_query(make_query("x.evil.example"), CLIENT, now=0.0)
        finally:
            stub.close()
        return v, stub, res

    v, stub, res = run(go())
    assert res.verdict.reason is Reason.BLACKLISTED
    assert stub.received == []
    recs = v.log.records()
    assert [r.direction for r in recs] == ["inbound"]
    if rcode is None:
        assert res.response is None and res.action == "dropped"
    else:
        assert res.response.header.rcode == rcode and res.action == "blocked"
        assert recs[0].rcode == rcode


def test_validator_timeout_gives_servfail(default_cfg, dictionary):
    async def go():
        stub = StubUpstream(default="silence")
        addr = await stub.start()
        v = make_validator(default_cfg, dictionary, addr, timeout=0.1)
        try:
            return v, await v.handle_query(make_query("www.example.com"), CLIENT, now=0.0)
        finally:
            stub.close()

    v, res = run(go())
    assert res.response.header.rcode == Rcode.SERVFAIL
    # one outbound record per transmission, none answered
    out = [r for r in v.log.records() if r.direction == "outbound"]
    assert len(out) == 2 and all(r.rcode is None for r in out)
    z = v.tracker.uniformity(parse_name("example.com"))
    assert z.dominant_class.label == "TIMEOUT"


def test_coalescing_concurrent_queries(default_cfg, dictionary):
    async def go():
        stub = StubUpstream({"www.example.com": "A 127.0.0.1"})
        addr = await stub.start()
        v = make_validator(default_cfg, dictionary, addr)
        try:
            results = await asyncio.gather(
                *(v.handle_query(make_query("www.example.com", id=i), CLIENT, now=0.0) for i in range(5))
            )
        finally:
            stub.close()
        return v, stub, results

    v, stub, results = run(go())
    assert len(stub.received) == 1
    assert [r.response.header.id for r in results] == list(range(5))
    assert all(r.response.answers for r in results)
    assert v.tracker.stats(parse_name("example.com")).total_responses == 1


def test_formerr_for_multiple_questions(default_cfg, dictionary):
    v = make_validator(default_cfg, dictionary, ("127.0.0.1", 9))
    q = Question(parse_name("a.example"), QType.A)
    msg = DnsMessage(DnsHeader(id=9, rd=True), (q, q))
    res = run(v.handle_query(msg, CLIENT, now=0.0))
    assert res.response.header.rcode == Rcode.FORMERR and res.action == "rejected"


def test_datagram_level_errors(default_cfg, dictionary):
    v = make_validator(default_cfg, dictionary, ("127.0.0.1", 9))
    assert run(v.handle_datagram(b"\x00\x01", CLIENT)) is None
    garbage = encode(make_query("a.example", id=77))[:-3]
    reply = decode(run(v.handle_datagram(garbage, CLIENT)))
    assert reply.header.id == 77 and reply.header.rcode == Rcode.FORMERR
    response_datagram = encode(DnsMessage(DnsHeader(id=1, qr=True)))
    assert run(v.handle_datagram(response_datagram, CLIENT)) is None


def test_log_replay_gives_same_verdicts(default_cfg, dictionary, tmp_path):
    reg = Registry()
    reg.blacklist_add("evil.example")
    names = ["www.example.com", "a.evil.example", "mfrgga3emfrgga3emfrgga3emfrgga3emfrgga3emfrgg.t.example"]

    async def go():
        stub = StubUpstream(default="nxdomain")
        addr = await stub.start()
        log_path = tmp_path / "traffic.jsonl"
        cfg = ServiceConfig(default_cfg, upstream=addr, timeout=0.3, log=str(log_path))
        clf = Classifier(default_cfg, reg, UniformityTracker(), dictionary)
        v = TunnelValidator(cfg, clf)
        try:
            for n in names:
                await v.handle_query(make_query(n), CLIENT, now=0.0)
        finally:
            stub.close()
        v.log.close()
        return log_path

    path = run(go())
    inbound = [r for r in read_log(path) if r.direction == "inbound"]
    replay = Classifier(default_cfg, reg, None, dictionary).classify_batch(
        [r.qname for r in inbound], [r.cache_hit for r in inbound]
    )
    assert [(v.decision.value, v.reason.value, v.score) for v in replay] == [
        (r.decision, r.reason, r.score) for r in inbound
    ]


def test_bounded_log_drops_oldest():
    log = ForensicLog(None, capacity=3)
    for i in range(5):
        log.append(LogRecord(float(i), "inbound", "", f"q{i}.example", 1, None, None, None, "x", None, False, "c"))
    assert log.dropped == 2
    assert [r.qname for r in log.records()] == ["q2.example", "q3.example", "q4.example"]


def test_log_record_json_round_trip():
    rec = LogRecord(1.5, "inbound", "1.2.3.4:5", "a.example", 1, "Secure", "ScoreBelowThreshold", 0.1, "forwarded", 0, False, "abc")
    assert LogRecord.from_json(rec.to_json()) == rec
    assert json.loads(rec.to_json())["qname"] == "a.example"


def test_promote_detections(default_cfg, dictionary):
    async def go():
        stub = StubUpstream({"*.tun.example": "NXDOMAIN"})
        addr = await stub.start()
        v = make_validator(default_cfg, dictionary, addr, promote_detections=True)
        try:
            reasons = []
            for i in range(25):
                res = await v.handle_query(make_query(f"n{i}.tun.example"), CLIENT, now=float(i))
                reasons.append(res.verdict.reason)
        finally:
            stub.close()
        return v, reasons

    v, reasons = run(go())
    n = default_cfg.min_samples
    # the first query after the sample floor trips the rule and blacklists the zone
    assert reasons[n] is Reason.UNIFORM_ZONE
    assert set(reasons[n + 1:]) == {Reason.BLACKLISTED}
    assert v.registry.blacklist_contains("anything.tun.example")
    assert v.registry.blacklist()[0].provenance == "detected"


# -- splitter ------------------------------------------------------------


def test_splitter_routes_by_score(default_cfg, dictionary):
    rng = random.Random(11)
    b32 = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz234567") for _ in range(240))
    long_name = ".".join([b32[:63], b32[63:126], b32[126:189], b32[189:240 - 24], "t.example"])

    async def go():
        normal = StubUpstream(default="A 10.0.0.1")
        validator = StubUpstream(default="NXDOMAIN")
        n_addr, v_addr = await normal.start(), await validator.start()
        cfg = ServiceConfig(default_cfg, mode=Mode.SPLITTER, upstream=None, validator_upstream=v_addr,
                            normal_upstream=n_addr, timeout=0.3)
        s = Splitter(cfg, Classifier(default_cfg, None, None, dictionary), ForensicLog(None))
        try:
            r1 = await s.route(make_query("www.example.com", id=5), CLIENT, now=0.0)
            r2 = await s.route(make_query(long_name, id=6), CLIENT, now=1.0)
        finally:
            normal.close()
            validator.close()
        return s, normal, validator, r1, r2, n_addr, v_addr

    s, normal, validator, r1, r2, n_addr, v_addr = run(go())
    assert r1.upstream == n_addr and r2.upstream == v_addr
    assert len(normal.received) == 1 and len(validator.received) == 1
    assert r1.response.header.id == 5 and r1.response.answers
    assert r2.response.header.rcode == Rcode.NXDOMAIN
    assert s.tracker.stats(parse_name("example.com")).total_responses == 1
    assert s.tracker.stats(parse_name("t.example")).total_responses == 1


# -- config and server ---------------------------------------------------


def test_load_config_merges_user_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"service": {"policy": "drop", "upstream": "9.9.9.9"}, "classifier": {"score": {"score_threshold": 0.7}}}))
    cfg = load_config(p)
    assert cfg.policy is BlockPolicy.DROP
    assert cfg.upstream == ("9.9.9.9", 53)
    assert cfg.classifier.weights.score_threshold == 0.7
    assert cfg.classifier.weights.cache_hit_bonus == 0.15


def test_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"service": {"polcy": "drop"}}))
    with pytest.raises(ValueError):
        load_config(p)


def test_udp_end_to_end(default_cfg, dictionary):
    async def go():
        stub = StubUpstream({"www.example.com": "A 127.0.0.1"})
        addr = await stub.start()
        v = make_validator(default_cfg, dictionary, addr)
        server = await start_server(v, ("127.0.0.1", 0), flush_interval=0)
        loop = asyncio.get_running_loop()
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setblocking(False)
        sock.connect(server.address)
        try:
            await loop.sock_sendall(sock, encode(make_query("www.example.com", id=4242)))
            data = await asyncio.wait_for(loop.sock_recv(sock, 4096), 2.0)
        finally:
            sock.close()
            await server.close()
            stub.close()
        return decode(data)

    reply = run(go())
    assert reply.header.id == 4242 and reply.header.qr
    assert reply.answers[0].rdata == ipaddress.IPv4Address("127.0.0.1")

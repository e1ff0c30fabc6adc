"""
The validating forwarder against a scripted upstream
====================================================

Start a stub upstream and the validator on loopback, send a few real UDP
queries and look at the forensic log they leave behind.
"""

import asyncio
import socket

from tunnelguard.classifier import Classifier, ClassifierConfig
from tunnelguard.codec import decode, encode, make_query
from tunnelguard.lab import StubUpstream
from tunnelguard.registry import Registry
from tunnelguard.service import ForensicLog, ServiceConfig, TunnelValidator, start_server
from tunnelguard.uniformity import UniformityTracker


async def ask(addr, name):
    loop = asyncio.get_running_loop()
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.setblocking(False)
    sock.connect(addr)
    try:
        await loop.sock_sendall(sock, encode(make_query(name)))
        return decode(await asyncio.wait_for(loop.sock_recv(sock, 4096), 1.0))
    except asyncio.TimeoutError:
        return None
    finally:
        sock.close()


async def main():
    stub = StubUpstream({"*.example.com": "A 192.0.2.10", "*.quiet.example": "NXDOMAIN"})
    upstream = await stub.start()

    cfg = ClassifierConfig.default()
    registry = Registry()
    registry.blacklist_add("evil.example")
    validator = TunnelValidator(
        ServiceConfig(cfg, upstream=upstream, timeout=0.5),
        Classifier(cfg, registry, UniformityTracker()),
        log=ForensicLog(None),
    )
    server = await start_server(validator, ("127.0.0.1", 0), flush_interval=0)

    # forwarded, then served from cache, then blocked by the blacklist
    for name in ["www.example.com", "www.example.com", "c2.evil.example"]:
        r = await ask(server.address, name)
        print(name, "->", r.header.rcode if r else "no reply", [str(a.rdata) for a in r.answers] if r else "")

    # a zone that answers everything with NXDOMAIN gets flagged after 20 names
    for i in range(22):
        await ask(server.address, f"h{i}.quiet.example")
    print("upstream saw", len(stub.received), "queries")

    await server.close()
    stub.close()
    for rec in validator.log.written[-4:]:
        print(rec.direction, rec.qname, rec.reason, rec.action)


asyncio.run(main())

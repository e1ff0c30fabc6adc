"""
Registered tunnels, blacklists and rule order
=============================================

A security vendor registers its legitimate DNS channel; an operator
blacklists a known bad zone. The classifier tries the rules in order and
reports which one decided.
"""

from tunnelguard.classifier import Classifier, ClassifierConfig
from tunnelguard.codec import parse_name
from tunnelguard.registry import Registry, TunnelPattern
from tunnelguard.uniformity import NXDOMAIN, UniformityTracker

registry = Registry()
registry.register("tunnel.vendor.example", TunnelPattern("base32", 63, 240, 1, 4), "VendorAV")
registry.blacklist_add("evil.example")

# a zone that has answered NXDOMAIN to 30 different names
tracker = UniformityTracker()
zone = parse_name("quiet.example")
for i in range(30):
    tracker.record_response(zone, parse_name(f"x{i}.quiet.example"), NXDOMAIN, float(i))

clf = Classifier(ClassifierConfig.default(), registry, tracker)

for name in [
    "mfrggzdfmztwq2lk.tunnel.vendor.example",  # matches the registered pattern
    "hello!.tunnel.vendor.example",              # registered zone, wrong alphabet
    "c2.evil.example",
    "anything.quiet.example",
    "www.example.com",
    "nbswy3dpeb3w64tmmqqgc3tenfxw4zjanfzsa4dsn5ygk4tm.peqgk3tdn5sgkzbaolwq2lmnfxgo4tp.t.example",
]:
    v = clf.classify(name)
    print(f"{v.decision.value:8s} {v.reason.value:20s} {name}")

# invalidating a registration moves it to the blacklist in one step
registry.invalidate("tunnel.vendor.example")
print(clf.classify("mfrggzdfmztwq2lk.tunnel.vendor.example").reason.value)

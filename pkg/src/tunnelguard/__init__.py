"""Tunnel-validating DNS forwarder with payload and response-uniformity detection."""

from .classifier import Classifier, ClassifierConfig, Decision, Reason, Verdict, classify
from .codec import DnsMessage, DomainName, decode, encode, parse_name
from .features import NameFeatures, ScoreWeights, extract_features, load_dictionary, suspicion_score
from .registry import Registry, TunnelPattern
from .uniformity import UniformityTracker

__version__ = "0.1.0"

__all__ = [
    "Classifier",
    "ClassifierConfig",
    "Decision",
    "DnsMessage",
    "DomainName",
    "NameFeatures",
    "Reason",
    "Registry",
    "ScoreWeights",
    "TunnelPattern",
    "UniformityTracker",
    "Verdict",
    "classify",
    "decode",
    "encode",
    "extract_features",
    "load_dictionary",
    "parse_name",
    "suspicion_score",
]

"""Service configuration: a JSON document with ``service`` and ``classifier`` sections."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from ..classifier import ClassifierConfig, default_config_path
from .upstream import Address, parse_address


class BlockPolicy(str, Enum):
    NXDOMAIN = "nxdomain"
    SERVFAIL = "servfail"
    DROP = "drop"


class Mode(str, Enum):
    VALIDATOR = "validator"
    SPLITTER = "splitter"


@dataclass(frozen=True)
class ServiceConfig:
    classifier: ClassifierConfig
    mode: Mode = Mode.VALIDATOR
    listen: Address = ("127.0.0.1", 5353)
    upstream: Address | None = ("127.0.0.1", 53)
    validator_upstream: Address | None = None
    normal_upstream: Address | None = None
    policy: BlockPolicy = BlockPolicy.NXDOMAIN
    min_ttl: int = 1
    max_ttl: int = 86400
    negative_ttl: int = 60
    timeout: float = 2.0
    retries: int = 1
    registry: str | None = None
    blacklist: str | None = None
    log: str | None = None
    log_buffer: int = 10_000
    promote_detections: bool = False

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")
        if self.mode is Mode.SPLITTER and (self.validator_upstream is None or self.normal_upstream is None):
            raise ValueError("splitter mode needs validator_upstream and normal_upstream")
        if self.mode is Mode.VALIDATOR and self.upstream is None:
            raise ValueError("validator mode needs an upstream")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], classifier: ClassifierConfig | None = None) -> ServiceConfig:
        svc = dict(data.get("service", {}))
        if classifier is None:
            classifier = ClassifierConfig.from_dict(data["classifier"])
        known = {f.name for f in fields(cls)} - {"classifier"}
        unknown = set(svc) - known
        if unknown:
            raise ValueError(f"unknown service keys: {sorted(unknown)}")
        return cls(classifier=classifier, **{k: _coerce(k, v) for k, v in svc.items()})

    def with_overrides(self, **overrides) -> ServiceConfig:
        return replace(self, **{k: _coerce(k, v) for k, v in overrides.items() if v is not None})


_ADDRESS_KEYS = {"listen", "upstream", "validator_upstream", "normal_upstream"}
_INT_KEYS = {"min_ttl", "max_ttl", "negative_ttl", "retries", "log_buffer"}


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _ADDRESS_KEYS:
        return parse_address(value)
    if key == "mode":
        return Mode(value)
    if key == "policy":
        return BlockPolicy(str(value).lower())
    if key in _INT_KEYS:
        return int(value)
    if key == "timeout":
        return float(value)
    if key == "promote_detections":
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    return value


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Read a config file; missing sections fall back to the shipped defaults."""
    with open(default_config_path(), encoding="utf-8") as fh:
        data = json.load(fh)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
        for section in ("service", "classifier"):
            if section in user:
                data[section] = _merge(data.get(section, {}), user[section])
    return ServiceConfig.from_dict(data)


def _merge(base: dict, top: dict) -> dict:
    out = dict(base)
    for k, v in top.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out

from .cache import CacheEntry, ResponseCache, TtlClamps, cache_key
from .config import BlockPolicy, Mode, ServiceConfig, load_config
from .forensics import ForensicLog, LogRecord, read_log
from .server import HandleResult, Splitter, TunnelValidator, build_frontend, start_server
from .upstream import MismatchedResponse, UpstreamTimeout, forward_upstream, parse_address

__all__ = [
    "BlockPolicy",
    "CacheEntry",
    "ForensicLog",
    "HandleResult",
    "LogRecord",
    "MismatchedResponse",
    "Mode",
    "ResponseCache",
    "ServiceConfig",
    "Splitter",
    "TtlClamps",
    "TunnelValidator",
    "UpstreamTimeout",
    "build_frontend",
    "cache_key",
    "forward_upstream",
    "load_config",
    "parse_address",
    "read_log",
    "start_server",
]

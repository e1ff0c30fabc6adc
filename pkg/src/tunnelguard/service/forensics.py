"""JSON-lines traffic log with a bounded in-memory buffer.

Handlers append records without ever waiting on the sink; a single consumer
writes them out in arrival order. When the buffer is full the oldest
pending record is dropped and counted.
"""

from __future__ import annotations

import asyncio
import json
import logging
import uuid
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO

logger = logging.getLogger(__name__)

INBOUND, OUTBOUND = "inbound", "outbound"
ACTIONS = ("served_cache", "forwarded", "blocked", "dropped", "rejected")


class IoFailure(OSError):
    pass


def new_correlation_id() -> str:
    return uuid.uuid4().hex[:16]


@dataclass(frozen=True)
class LogRecord:
    ts: float
    direction: str
    address: str
    qname: str
    qtype: int
    decision: str | None
    reason: str | None
    score: float | None
    action: str
    rcode: int | None
    cache_hit: bool
    correlation: str
    mode: str = "validator"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> LogRecord:
        return cls(**json.loads(line))


class ForensicLog:
    def __init__(self, sink: str | Path | IO[str] | None = None, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._pending: deque[LogRecord] = deque()
        self.dropped = 0
        self.written: list[LogRecord] = []
        self._path = Path(sink) if isinstance(sink, (str, Path)) else None
        self._stream = sink if sink is not None and self._path is None else None
        self._fh: IO[str] | None = None

    def append(self, record: LogRecord) -> None:
        if len(self._pending) >= self.capacity:
            self._pending.popleft()
            self.dropped += 1
        self._pending.append(record)

    @property
    def pending(self) -> int:
        return len(self._pending)

    def _open(self) -> IO[str] | None:
        if self._stream is not None:
            return self._stream
        if self._path is None:
            return None
        if self._fh is None:
            try:
                self._fh = open(self._path, "a", encoding="utf-8")
            except OSError as exc:
                raise IoFailure(f"cannot open log {self._path}: {exc}") from exc
        return self._fh

    def flush(self) -> int:
        """Write all pending records; returns how many were written."""
        fh = self._open()
        n = 0
        while self._pending:
            record = self._pending[0]
            if fh is not None:
                try:
                    fh.write(record.to_json() + "\n")
                except OSError as exc:
                    raise IoFailure(f"log write failed: {exc}") from exc
            else:
                self.written.append(record)
            self._pending.popleft()
            n += 1
        if fh is not None:
            try:
                fh.flush()
            except OSError as exc:
                raise IoFailure(f"log flush failed: {exc}") from exc
        return n

    def records(self) -> list[LogRecord]:
        """Everything handed to the in-memory sink plus what is still pending."""
        return self.written + list(self._pending)

    async def run(self, interval: float = 0.2) -> None:
        while True:
            try:
                self.flush()
            except IoFailure as exc:
                logger.error("%s (%d records pending, %d dropped)", exc, self.pending, self.dropped)
            await asyncio.sleep(interval)

    def close(self) -> None:
        try:
            self.flush()
        finally:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def read_log(path: str | Path) -> list[LogRecord]:
    with open(path, encoding="utf-8") as fh:
        return [LogRecord.from_json(line) for line in fh if line.strip()]


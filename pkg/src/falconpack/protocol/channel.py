"""In-memory duplex channel that records every frame it carries."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..exceptions import FalconPackError
from .wire import MsgType, frame, unframe


@dataclass
class MessageRecord:
    direction: str        # "c2s" or "s2c"
    kind: str
    frame_bytes: int
    payload_bits: int     # ciphertext content counted by the cost model


@dataclass
class MemoryChannel:
    log: list[MessageRecord] = field(default_factory=list)
    _queues: dict = field(default_factory=lambda: {"c2s": deque(), "s2c": deque()})

    def send(self, direction: str, kind: MsgType, payload: bytes, payload_bits: int = 0) -> None:
        blob = frame(kind, payload)
        self._queues[direction].append(blob)
        self.log.append(MessageRecord(direction, kind.name, len(blob), payload_bits))

    def recv(self, direction: str, expect: MsgType) -> bytes:
        if not self._queues[direction]:
            raise FalconPackError(f"no pending message on {direction}")
        kind, payload = unframe(self._queues[direction].popleft())
        if kind != expect:
            raise FalconPackError(f"expected {expect.name}, received {kind.name}")
        return payload

    def pending(self, direction: str) -> int:
        return len(self._queues[direction])

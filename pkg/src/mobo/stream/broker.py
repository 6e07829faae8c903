"""In-memory topic broker with dense per-topic offsets and group cursors."""
from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass, field

from . import frames
from .frames import Envelope

MAX_PAYLOAD = 1 << 20
TOPIC_NAME = re.compile(r"[a-z0-9._-]+")


class BrokerError(Exception):
    """Base class for errors reported by a broker."""


class InvalidTopicName(BrokerError, ValueError):
    pass


class UnknownTopic(BrokerError, KeyError):
    def __str__(self):
        return f"unknown topic {self.args[0]!r}"


class PayloadTooLarge(BrokerError, ValueError):
    pass


@dataclass
class Topic:
    name: str
    log: list[Envelope] = field(default_factory=list)

    def __len__(self):
        return len(self.log)


class ConsumerHandle:
    """A (topic, group) cursor on some broker; cursor state lives in the broker."""

    def __init__(self, broker, topic: str, group: str):
        self.broker = broker
        self.topic = topic
        self.group = group

    @property
    def cursor(self) -> int:
        return self.broker.cursor(self.topic, self.group)

    def poll(self, max_messages: int = 100, timeout_ms: int = 0) -> list[Envelope]:
        return self.broker.poll(self.topic, self.group, max_messages, timeout_ms)

    def seek(self, offset: int) -> None:
        self.broker.seek(self.topic, self.group, offset)


class Broker:
    """Thread-safe single-node broker.

    Appends are linearized by one lock; pollers wait on a condition variable
    that publishers notify. With ``log_dir`` set every envelope is also
    appended to ``<log_dir>/<topic>.log`` and reloaded on construction.
    """

    def __init__(self, log_dir: str | os.PathLike | None = None):
        self._topics: dict[str, Topic] = {}
        self._cursors: dict[tuple[str, str], int] = {}
        self._cond = threading.Condition()
        self._log_dir = os.fspath(log_dir) if log_dir is not None else None
        if self._log_dir is not None:
            os.makedirs(self._log_dir, exist_ok=True)
            self._reload()

    def _reload(self):
        for fname in sorted(os.listdir(self._log_dir)):
            if not fname.endswith(".log"):
                continue
            name = fname[:-4]
            topic = self._topics.setdefault(name, Topic(name))
            with open(os.path.join(self._log_dir, fname), "rb") as fh:
                for line in fh:
                    if not line.endswith(b"\n"):
                        break  # torn final write
                    topic.log.append(frames.decode_envelope(line))

    def _persist(self, env: Envelope):
        path = os.path.join(self._log_dir, env.topic + ".log")
        with open(path, "ab") as fh:
            fh.write(frames.encode_envelope(env, with_timestamp=True))

    def create_topic(self, name: str) -> Topic:
        if not isinstance(name, str) or not TOPIC_NAME.fullmatch(name):
            raise InvalidTopicName(f"invalid topic name {name!r}")
        with self._cond:
            topic = self._topics.get(name)
            if topic is None:
                topic = self._topics[name] = Topic(name)
                if self._log_dir is not None:
                    open(os.path.join(self._log_dir, name + ".log"), "ab").close()
            return topic

    def topics(self) -> list[str]:
        with self._cond:
            return sorted(self._topics)

    def _topic(self, name) -> Topic:
        try:
            return self._topics[name]
        except KeyError:
            raise UnknownTopic(name) from None

    def publish(self, topic: str, payload: bytes, key: str | None = None) -> int:
        payload = bytes(payload)
        if len(payload) > MAX_PAYLOAD:
            raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
        with self._cond:
            t = self._topic(topic)
            env = Envelope(topic, len(t.log), int(time.time() * 1000), key, payload)
            if self._log_dir is not None:
                self._persist(env)
            t.log.append(env)
            self._cond.notify_all()
            return env.offset

    def end_offset(self, topic: str) -> int:
        with self._cond:
            return len(self._topic(topic).log)

    def cursor(self, topic: str, group: str) -> int:
        with self._cond:
            self._topic(topic)
            return self._cursors.get((group, topic), 0)

    def seek(self, topic: str, group: str, offset: int) -> None:
        with self._cond:
            n = len(self._topic(topic).log)
            if not 0 <= offset <= n:
                raise BrokerError(f"seek offset {offset} outside [0, {n}]")
            self._cursors[(group, topic)] = offset

    def consumer(self, topic: str, group: str) -> ConsumerHandle:
        self.cursor(topic, group)
        return ConsumerHandle(self, topic, group)

    def poll(
        self, topic: str, group: str, max_messages: int = 100, timeout_ms: int = 0
    ) -> list[Envelope]:
        """Return up to ``max_messages`` envelopes past the group's cursor.

        Blocks for at most ``timeout_ms`` while nothing is available.
        """
        if max_messages < 1:
            raise ValueError("max_messages must be >= 1")
        deadline = time.monotonic() + max(0, timeout_ms) / 1000.0
        with self._cond:
            t = self._topic(topic)
            key = (group, topic)
            while True:
                start = self._cursors.get(key, 0)
                if start < len(t.log):
                    out = t.log[start : start + max_messages]
                    self._cursors[key] = start + len(out)
                    return out
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self._cond.wait(remaining)

"""Newline-delimited JSON frames shared by the TCP protocol and transcript files.

A frame is one compact JSON object on one line, UTF-8 encoded, terminated by
``\\n``. Payload bytes always travel base64-encoded. See ``docs/wire_protocol.md``.
"""
from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass

MAX_FRAME = 4 << 20


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    topic: str
    offset: int
    timestamp: int
    key: str | None
    payload: bytes


def encode(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True).encode("ascii") + b"\n"


def decode(line: bytes) -> dict:
    if len(line) > MAX_FRAME:
        raise FrameError(f"frame longer than {MAX_FRAME} bytes")
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"malformed frame: {exc}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("op"), str):
        raise FrameError("frame must be an object with a string 'op'")
    return obj


def b64(payload: bytes) -> str:
    return base64.b64encode(payload).decode("ascii")


def unb64(text) -> bytes:
    if not isinstance(text, str):
        raise FrameError("payload must be a base64 string")
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise FrameError(f"bad base64 payload: {exc}") from None


def record(env, with_timestamp: bool = False) -> dict:
    obj = {"op": "record", "topic": env.topic, "key": env.key, "payload": b64(env.payload),
           "offset": env.offset}
    if with_timestamp:
        obj["timestamp"] = env.timestamp
    return obj


def encode_envelope(env, with_timestamp: bool = False) -> bytes:
    return encode(record(env, with_timestamp))


def envelope_from(obj: dict, topic: str | None = None) -> Envelope:
    try:
        key = obj.get("key")
        if key is not None and not isinstance(key, str):
            raise FrameError("key must be a string or null")
        offset = obj["offset"]
        if not isinstance(offset, int) or offset < 0:
            raise FrameError("offset must be a nonnegative integer")
        return Envelope(
            topic=topic if topic is not None else obj["topic"],
            offset=offset,
            timestamp=int(obj.get("timestamp", 0)),
            key=key,
            payload=unb64(obj["payload"]),
        )
    except KeyError as exc:
        raise FrameError(f"frame missing field {exc}") from None


def decode_envelope(line: bytes) -> Envelope:
    obj = decode(line)
    if obj["op"] != "record":
        raise FrameError(f"expected a record frame, got op {obj['op']!r}")
    return envelope_from(obj)

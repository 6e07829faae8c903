"""Topic-based publish/subscribe: in-process broker, TCP server and client."""
from .broker import (
    MAX_PAYLOAD,
    Broker,
    BrokerError,
    ConsumerHandle,
    InvalidTopicName,
    PayloadTooLarge,
    Topic,
    UnknownTopic,
)
from .frames import Envelope, FrameError
from .tcp import BrokerConnectionError, BrokerServer, RemoteBroker, RemoteError, connect, serve_tcp

__all__ = [
    "MAX_PAYLOAD",
    "Broker",
    "BrokerConnectionError",
    "BrokerError",
    "BrokerServer",
    "ConsumerHandle",
    "Envelope",
    "FrameError",
    "InvalidTopicName",
    "PayloadTooLarge",
    "RemoteBroker",
    "RemoteError",
    "Topic",
    "UnknownTopic",
    "connect",
    "serve_tcp",
]

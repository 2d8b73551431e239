"""Client side of the simulator's line-delimited JSON protocol.

The agent process either speaks on its own stdio (when spawned by the
simulator) or connects to a local socket. One JSON object per line; see the
simulator package for the message catalogue.
"""

from __future__ import annotations

import json
import socket
import sys
from typing import Optional


class ProtocolError(RuntimeError):
    pass


class ServerConnection:
    def __init__(self, reader, writer, owner=None) -> None:
        self._reader = reader
        self._writer = writer
        self._owner = owner

    @classmethod
    def stdio(cls) -> "ServerConnection":
        return cls(sys.stdin.buffer, sys.stdout.buffer)

    @classmethod
    def connect(cls, host: str, port: int) -> "ServerConnection":
        sock = socket.create_connection((host, port))
        stream = sock.makefile("rwb")
        return cls(stream, stream, owner=sock)

    def send(self, message: dict) -> None:
        self._writer.write(json.dumps(message, separators=(",", ":")).encode() + b"\n")
        self._writer.flush()

    def recv(self) -> Optional[dict]:
        line = self._reader.readline()
        if not line:
            return None
        message = json.loads(line)
        if not isinstance(message, dict) or "type" not in message:
            raise ProtocolError(f"malformed message: {line[:200]!r}")
        if message["type"] == "error":
            raise ProtocolError(f"server reported: {message.get('message')}")
        return message

    def expect(self, *types: str) -> dict:
        message = self.recv()
        if message is None:
            raise ProtocolError(f"connection closed while waiting for {types}")
        if message["type"] not in types:
            raise ProtocolError(f"expected {types}, got {message['type']!r}")
        return message

    def close(self) -> None:
        if self._owner is not None:
            self._owner.close()

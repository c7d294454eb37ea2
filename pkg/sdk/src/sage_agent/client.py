"""Protocol v1 client: connect, observe, act.

The client keeps exactly one request in flight and never reorders or
rewrites messages; observation channels decode lazily so text-only
policies skip the image work entirely.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass

import numpy as np

from . import codecs

PROTOCOL_VERSION = 1


class ProtocolError(Exception):
    """Peer sent something malformed or out of order."""


class VersionError(ProtocolError):
    """Peer speaks a different protocol version."""


class Observation:
    """Lazy view over one observation payload.

    The raw dict is kept verbatim; channels decode on first access and are
    cached afterwards.
    """

    def __init__(self, raw: dict):
        self.raw = raw
        self._cache: dict = {}

    def _get(self, key: str, decoder):
        if key not in self._cache:
            payload = self.raw.get(key)
            self._cache[key] = None if payload is None else decoder(payload)
        return self._cache[key]

    @property
    def rgb(self) -> np.ndarray | None:
        return self._get("rgb", codecs.decode_rgb)

    @property
    def depth(self) -> np.ndarray | None:
        return self._get("depth", codecs.decode_depth)

    @property
    def semantic(self) -> np.ndarray | None:
        return self._get("semantic", codecs.decode_semantic)

    @property
    def instance_ids(self) -> list[str] | None:
        return self.raw.get("instance_ids")


@dataclass
class EnvClient:
    """One connection to a serving harness."""

    reader: object
    writer: object
    sock: socket.socket | None = None
    protocol: int = PROTOCOL_VERSION

    def send(self, msg: dict) -> None:
        self.writer.write((json.dumps(msg) + "\n").encode("utf-8"))
        self.writer.flush()

    def recv(self) -> dict | None:
        line = self.reader.readline()
        if not line:
            return None
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"invalid JSON from server: {exc}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError("messages must be JSON objects")
        return msg

    def close(self) -> None:
        for stream in (self.reader, self.writer):
            try:
                stream.close()
            except Exception:
                pass
        if self.sock is not None:
            try:
                self.sock.close()
            except Exception:
                pass


def connect(endpoint: str, timeout: float = 30.0) -> EnvClient:
    """Open and handshake a client.

    `endpoint` is "host:port" for sockets or "stdio" when the harness
    spawned this process and speaks over the standard streams.
    """
    if endpoint == "stdio":
        client = EnvClient(reader=sys.stdin.buffer, writer=sys.stdout.buffer)
    else:
        host, _, port = endpoint.rpartition(":")
        try:
            sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        except OSError as exc:
            raise ConnectionError(f"cannot reach harness at {endpoint}: {exc}") from exc
        sock.settimeout(timeout)
        client = EnvClient(reader=sock.makefile("rb"), writer=sock.makefile("wb"), sock=sock)

    hello = client.recv()
    if hello is None:
        client.close()
        raise ConnectionError("server closed before handshake")
    if hello.get("type") != "hello":
        client.close()
        raise ProtocolError(f"expected hello, got {hello.get('type')!r}")
    if hello.get("protocol") != PROTOCOL_VERSION:
        client.close()
        raise VersionError(f"server speaks protocol {hello.get('protocol')!r}, need {PROTOCOL_VERSION}")
    client.send({"type": "hello", "protocol": PROTOCOL_VERSION})
    return client


def _normalize_action(action) -> dict:
    if isinstance(action, str):
        return {"type": "action", "discrete": action}
    if isinstance(action, dict):
        out = {"type": "action"}
        if "discrete" in action:
            out["discrete"] = action["discrete"]
        elif "continuous" in action:
            out["continuous"] = action["continuous"]
        else:
            raise ValueError(f"action dict needs 'discrete' or 'continuous': {action}")
        return out
    raise ValueError(f"unsupported action {action!r}")


def run_policy(client: EnvClient, policy) -> dict | None:
    """Drive one episode with `policy(instruction, observation) -> action`.

    Returns {"episode_id", "steps", "done_reason"} or None when the server
    has no more episodes.  A policy exception closes the connection before
    propagating, so the harness sees a clean disconnect.
    """
    msg = client.recv()
    if msg is None:
        return None
    if msg.get("type") != "reset":
        raise ProtocolError(f"expected reset, got {msg.get('type')!r}")
    episode_id = msg["episode_id"]
    instruction = msg["instruction"]
    obs = Observation(msg.get("obs", {}))
    steps = 0
    done_reason = None
    try:
        while True:
            action = policy(instruction, obs)
            client.send(_normalize_action(action))
            reply = client.recv()
            if reply is None:
                raise ProtocolError("server closed mid-episode")
            if reply.get("type") != "step":
                raise ProtocolError(f"expected step, got {reply.get('type')!r}")
            steps += 1
            obs = Observation(reply.get("obs", {}))
            if reply.get("done"):
                done_reason = reply.get("done_reason")
                break
        end = client.recv()
        if end is None or end.get("type") != "end":
            raise ProtocolError("missing end-of-episode message")
    except ProtocolError:
        client.close()
        raise
    except Exception:
        client.close()  # clean disconnect; the harness logs a protocol failure
        raise
    return {"episode_id": episode_id, "steps": steps, "done_reason": done_reason}


def run_all(client: EnvClient, policy) -> list[dict]:
    """Drive episodes until the server closes; returns all summaries."""
    summaries = []
    while True:
        summary = run_policy(client, policy)
        if summary is None:
            break
        summaries.append(summary)
    return summaries

"""Wire protocol v1: newline-delimited JSON between harness and agents.

Message shapes (exact field names):

    hello:  {"type": "hello", "protocol": 1}
    reset:  {"type": "reset", "episode_id", "instruction", "obs"}
    action: {"type": "action", "discrete"?} or
            {"type": "action", "continuous": {"v", "omega", "duration"}}
    step:   {"type": "step", "obs", "contacts", "done", "done_reason"?}
    end:    {"type": "end", "log_id"}

Observations embed rgb and semantic channels as base64 PNG (8-bit RGB and
16-bit grayscale) and depth as base64 little-endian float32 rows.
"""

from __future__ import annotations

import base64
import io
import json
import select
import socket
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError
from .rendering import Frame
from .simulator import Action, ContactEvent

PROTOCOL_VERSION = 1


# ---------------------------------------------------------------------------
# Observation codec


def encode_rgb(rgb: np.ndarray) -> str:
    from PIL import Image

    img = Image.fromarray((np.clip(rgb, 0.0, 1.0) * 255).round().astype(np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_rgb(data: str) -> np.ndarray:
    from PIL import Image

    img = Image.open(io.BytesIO(base64.b64decode(data)))
    return np.asarray(img, dtype=np.uint8)


def encode_semantic(semantic: np.ndarray) -> str:
    from PIL import Image

    img = Image.fromarray(semantic.astype(np.uint16))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_semantic(data: str) -> np.ndarray:
    from PIL import Image

    img = Image.open(io.BytesIO(base64.b64decode(data)))
    return np.asarray(img, dtype=np.uint16)


def encode_depth(depth: np.ndarray) -> dict:
    finite = np.where(np.isfinite(depth), depth, np.finfo(np.float32).max).astype("<f4")
    return {
        "b64": base64.b64encode(finite.tobytes()).decode("ascii"),
        "width": int(depth.shape[1]),
        "height": int(depth.shape[0]),
    }


def decode_depth(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["b64"])
    arr = np.frombuffer(raw, dtype="<f4").reshape(payload["height"], payload["width"])
    return arr.copy()


def encode_obs(frame: Frame | dict | None) -> dict:
    if frame is None:
        return {}
    if isinstance(frame, dict):
        frame = Frame(
            rgb=frame.get("rgb"), depth=frame.get("depth"), semantic=frame.get("semantic"),
            instance_ids=frame.get("instance_ids"),
        )
    obs: dict = {}
    if frame.rgb is not None:
        obs["rgb"] = encode_rgb(frame.rgb)
    if frame.depth is not None:
        obs["depth"] = encode_depth(frame.depth)
    if frame.semantic is not None:
        obs["semantic"] = encode_semantic(frame.semantic)
    if frame.instance_ids is not None:
        obs["instance_ids"] = list(frame.instance_ids)
    return obs


# ---------------------------------------------------------------------------
# Messages


def hello_message() -> dict:
    return {"type": "hello", "protocol": PROTOCOL_VERSION}


def reset_message(episode_id: str, instruction: str, obs: dict) -> dict:
    return {"type": "reset", "episode_id": episode_id, "instruction": instruction, "obs": obs}


def step_message(obs: dict, contacts: list[ContactEvent], done: bool, done_reason: str | None) -> dict:
    msg: dict = {
        "type": "step",
        "obs": obs,
        "contacts": [
            {"instance_id": c.instance_id, "penetration_depth": c.penetration_depth, "t": c.t}
            for c in contacts
        ],
        "done": done,
    }
    if done:
        msg["done_reason"] = done_reason
    return msg


def end_message(log_id: str) -> dict:
    return {"type": "end", "log_id": log_id}


def parse_action(msg: dict) -> Action:
    if msg.get("type") != "action":
        raise ProtocolError(f"expected action message, got {msg.get('type')!r}")
    try:
        return Action.from_dict(msg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed action: {exc}") from exc


# ---------------------------------------------------------------------------
# Line-delimited JSON channels


@dataclass
class LineChannel:
    """One JSON object per line over a pair of binary streams."""

    reader: object  # file-like with .readline / or raw buffered reader
    writer: object  # file-like with .write / .flush

    def send(self, msg: dict) -> None:
        data = (json.dumps(msg, sort_keys=True) + "\n").encode("utf-8")
        try:
            self.writer.write(data)
            self.writer.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"peer went away: {exc}") from exc

    def recv(self, timeout: float | None = None) -> dict:
        """Read one message; TimeoutError on silence, ProtocolError on junk/EOF."""
        if timeout is not None:
            fileno = getattr(self.reader, "fileno", None)
            if fileno is not None:
                ready, _, _ = select.select([self.reader], [], [], timeout)
                if not ready:
                    raise TimeoutError(f"no message within {timeout}s")
        line = self.reader.readline()
        if not line:
            raise ProtocolError("connection closed by peer")
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"invalid JSON from peer: {exc}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError("protocol messages must be JSON objects")
        return msg

    def close(self) -> None:
        for stream in (self.reader, self.writer):
            try:
                stream.close()
            except Exception:
                pass


def channel_from_socket(conn: socket.socket) -> LineChannel:
    reader = conn.makefile("rb")
    writer = conn.makefile("wb")
    return LineChannel(reader=reader, writer=writer)


def handshake_server(channel: LineChannel, timeout: float = 10.0) -> None:
    channel.send(hello_message())
    reply = channel.recv(timeout=timeout)
    if reply.get("type") != "hello" or reply.get("protocol") != PROTOCOL_VERSION:
        channel.send({"type": "error", "error": "version"})
        raise ProtocolError(f"version handshake failed: {reply}")

"""Observation codecs for protocol v1.

rgb and semantic channels travel as base64 PNG (8-bit RGB / 16-bit gray);
depth travels as base64 little-endian float32 rows plus its dimensions.
Depth decode/encode is lossless by construction.
"""

from __future__ import annotations

import base64
import io

import numpy as np


def decode_rgb(data: str) -> np.ndarray:
    from PIL import Image

    img = Image.open(io.BytesIO(base64.b64decode(data)))
    return np.asarray(img, dtype=np.uint8)


def encode_rgb(rgb: np.ndarray) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(rgb.astype(np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_semantic(data: str) -> np.ndarray:
    from PIL import Image

    img = Image.open(io.BytesIO(base64.b64decode(data)))
    return np.asarray(img, dtype=np.uint16)


def encode_semantic(semantic: np.ndarray) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(semantic.astype(np.uint16)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_depth(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["b64"])
    return np.frombuffer(raw, dtype="<f4").reshape(payload["height"], payload["width"]).copy()


def encode_depth(depth: np.ndarray) -> dict:
    arr = depth.astype("<f4")
    return {
        "b64": base64.b64encode(arr.tobytes()).decode("ascii"),
        "width": int(arr.shape[1]),
        "height": int(arr.shape[0]),
    }

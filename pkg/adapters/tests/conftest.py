from __future__ import annotations

import base64
import io

import numpy as np
import pytest
from PIL import Image


def make_clip(
    t_count=10,
    size=(96, 96),
    rect=((200, 40, 40), (12, 12)),
    start=(10, 30),
    velocity=(2, 0),
    seed=5,
):
    """A small moving-rectangle clip on a static noise background."""
    rng = np.random.default_rng(seed)
    h, w = size
    noise = rng.integers(72, 121, size=(h, w), dtype=np.int64)
    background = np.repeat(noise[:, :, None], 3, axis=2).astype(np.uint8)
    color, (ow, oh) = rect
    frames = []
    for i in range(t_count):
        frame = background.copy()
        x = start[0] + velocity[0] * i
        y = start[1] + velocity[1] * i
        frame[y : y + oh, x : x + ow] = color
        frames.append(frame)
    return frames


def image_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def mask_b64_of(layer: np.ndarray, object_id: int = 1) -> str:
    from sdam_adapters.wire import encode_mask

    return encode_mask(np.where(layer, np.uint8(object_id), np.uint8(0)))


@pytest.fixture
def clip():
    return make_clip()

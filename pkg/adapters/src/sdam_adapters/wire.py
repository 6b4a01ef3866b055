"""Wire-format helpers: payload codecs and document validation.

The schema is the sdam backend protocol; this package serves it without
importing the pipeline, so the documents are restated here. Masks travel
as base64 indexed-color PNG (palette index = object id), images as base64
PNG or a shared-filesystem path.
"""

from __future__ import annotations

import base64
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

# Discrete confidence levels the grounder prompt requests, and their wire
# confidences. Adapter responses must only ever emit these values.
CONFIDENCE_LEVELS = {1: 0.1, 2: 0.3, 3: 0.5, 4: 0.7, 5: 0.9}

DIRECTIONS = ("forward", "backward")


class AdapterError(Exception):
    """Engine/session failures; served as HTTP 409."""


class WireError(ValueError):
    """Malformed request or engine output; served as HTTP 400."""


def _palette() -> list[int]:
    pal = []
    for k in range(256):
        r = g = b = 0
        c = k
        for shift in range(8):
            r |= ((c >> 0) & 1) << (7 - shift)
            g |= ((c >> 1) & 1) << (7 - shift)
            b |= ((c >> 2) & 1) << (7 - shift)
            c >>= 3
        pal += [r, g, b]
    return pal


PALETTE = _palette()


def decode_image(frame_doc: dict, field: str = "frame") -> np.ndarray:
    if "image_b64" in frame_doc:
        raw = base64.b64decode(frame_doc["image_b64"])
        return np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"), dtype=np.uint8)
    if "image_path" in frame_doc:
        path = Path(frame_doc["image_path"])
        if not path.is_file():
            raise WireError(f"{field}.image_path does not exist: {path}")
        return np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
    raise WireError(f"{field} needs image_b64 or image_path")


def decode_mask(data_b64: str) -> np.ndarray:
    im = Image.open(io.BytesIO(base64.b64decode(data_b64)))
    if im.mode != "P":
        im = im.convert("P")
    return np.asarray(im, dtype=np.uint8)


def encode_mask(mask: np.ndarray) -> str:
    im = Image.fromarray(mask.astype(np.uint8), mode="P")
    im.putpalette(PALETTE)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def expect(cond: bool, message: str):
    if not cond:
        raise WireError(message)


def parse_ground_request(doc: dict) -> tuple[str, str, list[tuple[int, np.ndarray]]]:
    expect(isinstance(doc, dict), "request must be an object")
    query = doc.get("query")
    expect(isinstance(query, str) and bool(query), "query must be a nonempty string")
    prompt = doc.get("prompt", "")
    expect(isinstance(prompt, str), "prompt must be a string")
    frames = doc.get("frames")
    expect(isinstance(frames, list) and bool(frames), "frames must be a nonempty list")
    out = []
    for i, fd in enumerate(frames):
        expect(isinstance(fd, dict), f"frames[{i}] must be an object")
        expect(isinstance(fd.get("t"), int), f"frames[{i}].t must be an integer")
        out.append((fd["t"], decode_image(fd, f"frames[{i}]")))
    return query, prompt, out


def parse_segment_request(doc: dict) -> list[tuple[int, np.ndarray, list[tuple[int, list[int]]]]]:
    expect(isinstance(doc, dict), "request must be an object")
    frames = doc.get("frames")
    expect(isinstance(frames, list) and bool(frames), "frames must be a nonempty list")
    out = []
    for i, fd in enumerate(frames):
        expect(isinstance(fd, dict), f"frames[{i}] must be an object")
        expect(isinstance(fd.get("t"), int), f"frames[{i}].t must be an integer")
        boxes = fd.get("boxes")
        expect(isinstance(boxes, list), f"frames[{i}].boxes must be a list")
        parsed_boxes = []
        for k, bd in enumerate(boxes):
            expect(isinstance(bd, dict), f"frames[{i}].boxes[{k}] must be an object")
            expect(isinstance(bd.get("id"), int), f"frames[{i}].boxes[{k}].id must be an integer")
            box = bd.get("box")
            expect(
                isinstance(box, list) and len(box) == 4 and all(isinstance(v, int) for v in box),
                f"frames[{i}].boxes[{k}].box must be [x1,y1,x2,y2]",
            )
            parsed_boxes.append((bd["id"], box))
        out.append((fd["t"], decode_image(fd, f"frames[{i}]"), parsed_boxes))
    return out


def parse_track_init_request(doc: dict) -> tuple[int, np.ndarray, np.ndarray, str]:
    expect(isinstance(doc, dict), "request must be an object")
    expect(isinstance(doc.get("t"), int), "t must be an integer")
    expect(isinstance(doc.get("mask_b64"), str), "mask_b64 must be a string")
    direction = doc.get("direction")
    expect(direction in DIRECTIONS, f"direction must be one of {DIRECTIONS}")
    return doc["t"], decode_image(doc, "request"), decode_mask(doc["mask_b64"]), direction


def parse_track_step_request(doc: dict) -> tuple[str, int, np.ndarray]:
    expect(isinstance(doc, dict), "request must be an object")
    expect(isinstance(doc.get("session"), str), "session must be a string")
    expect(isinstance(doc.get("t"), int), "t must be an integer")
    return doc["session"], doc["t"], decode_image(doc, "request")


def parse_engine_grounding(text: str, requested_ts: list[int]) -> list[dict]:
    """Validate the grounding engine's JSON and map levels to confidences.

    Expected shape:
      {"frames": [{"t": 3, "objects": [{"id", "label", "box"}],
                   "confidence_level": 1..5, "reasoning": "..."}]}
    Raises WireError on any malformation (the caller retries once with a
    repair prompt before giving up).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise WireError(f"engine output is not JSON: {e}") from e
    expect(isinstance(doc, dict) and isinstance(doc.get("frames"), list),
           "engine output must contain a frames list")
    by_t = {}
    for i, fd in enumerate(doc["frames"]):
        expect(isinstance(fd, dict), f"frames[{i}] must be an object")
        t = fd.get("t")
        expect(isinstance(t, int), f"frames[{i}].t must be an integer")
        level = fd.get("confidence_level")
        expect(level in CONFIDENCE_LEVELS, f"frames[{i}].confidence_level must be 1..5")
        objects = fd.get("objects")
        expect(isinstance(objects, list), f"frames[{i}].objects must be a list")
        cleaned = []
        for k, od in enumerate(objects):
            expect(isinstance(od, dict), f"frames[{i}].objects[{k}] must be an object")
            oid = od.get("id")
            expect(isinstance(oid, int) and oid >= 1, f"frames[{i}].objects[{k}].id must be >= 1")
            box = od.get("box")
            present = od.get("present", box is not None)
            if present:
                expect(
                    isinstance(box, list) and len(box) == 4
                    and all(isinstance(v, int) for v in box)
                    and box[2] > box[0] and box[3] > box[1],
                    f"frames[{i}].objects[{k}].box must be a nondegenerate [x1,y1,x2,y2]",
                )
            cleaned.append(
                {
                    "id": oid,
                    "label": str(od.get("label", f"object {oid}")),
                    "box": box if present else None,
                    "present": bool(present),
                }
            )
        by_t[t] = {
            "t": t,
            "objects": cleaned,
            "confidence": CONFIDENCE_LEVELS[level],
            "reasoning": str(fd.get("reasoning", "")),
        }
    missing = [t for t in requested_ts if t not in by_t]
    expect(not missing, f"engine output missing frames {missing}")
    return [by_t[t] for t in sorted(requested_ts)]

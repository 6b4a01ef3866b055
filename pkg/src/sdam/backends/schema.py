"""Wire schema for the grounder/segmenter/tracker endpoints.

Documents are canonical JSON: fixed field order, compact separators, ints
kept integral. parse(serialize(x)) == x and serialize(parse(doc)) == doc
byte-for-byte on canonical documents, so payloads can be logged, diffed,
and replayed.

Endpoints (all POST, JSON bodies, non-2xx replies carry {"error": "..."}):
  /ground      {"query","prompt","frames":[{"t",image}]}
               -> {"frames":[{"t","objects":[{"id","label","box","present"}],
                              "confidence","reasoning"}]}
  /segment     {"frames":[{"t",image,"boxes":[{"id","box"}]}]}
               -> {"frames":[{"t","masks":[{"id","mask_b64"}],
                              "iou":[{"id","score"}],"frame_score"}]}
  /track/init  {"t",image,"mask_b64","direction"} -> {"session"}
  /track/step  {"session","t",image} -> {"t","mask_b64"}

Image payloads are either base64 PNG ("image_b64") or a shared-filesystem
path ("image_path"); masks are base64 indexed-color PNG, palette index =
object id.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..frames import (
    image_to_png_bytes,
    mask_to_png_bytes,
    png_bytes_to_image,
    png_bytes_to_mask,
)
from .errors import SchemaError

DIRECTIONS = ("forward", "backward")

# Discrete confidence levels the grounder prompt asks for, mapped to S_mllm.
CONFIDENCE_LEVELS = {1: 0.1, 2: 0.3, 3: 0.5, 4: 0.7, 5: 0.9}

# The only placeholder is the literal token {query}, filled by plain string
# substitution so JSON braces in the template (or user overrides) stay as-is.
DEFAULT_PROMPT_TEMPLATE = """\
You are given frames from one video and a query describing one or more
target objects. Find every target in each frame.

Query: {query}

Reply with JSON only, one document per frame, shaped exactly like:
{"objects": [{"id": 1, "label": "<short name>", "box": [x1, y1, x2, y2]}],
 "confidence_level": <1-5>, "reasoning": "<one or two sentences>"}

Boxes are integer pixel coordinates with x2/y2 exclusive. Use the same id
for the same object in every frame; omit objects that are not visible.
confidence_level grades how certain you are that the boxed objects are the
ones the query describes: 1 = very unsure, 2 = unsure, 3 = borderline,
4 = confident, 5 = certain. State your reasoning before picking the level.
"""


def confidence_from_level(level: int) -> float:
    """Map a discrete 1..5 confidence level to the [0,1] wire confidence."""
    if level not in CONFIDENCE_LEVELS:
        raise SchemaError(f"confidence_level out of range: {level}")
    return CONFIDENCE_LEVELS[level]


def canonical_dumps(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def encode_image_b64(image: np.ndarray) -> str:
    return base64.b64encode(image_to_png_bytes(image)).decode("ascii")


def decode_image_b64(data: str) -> np.ndarray:
    return png_bytes_to_image(base64.b64decode(data))


def encode_mask_b64(mask: np.ndarray) -> str:
    return base64.b64encode(mask_to_png_bytes(mask)).decode("ascii")


def decode_mask_b64(data: str) -> np.ndarray:
    return png_bytes_to_mask(base64.b64decode(data))


# ---------------------------------------------------------------------------
# Domain-side result types


@dataclass(frozen=True)
class GroundedObject:
    object_id: int
    label: str
    box: tuple[int, int, int, int] | None  # None when the object is absent
    present: bool


@dataclass(frozen=True)
class GroundedFrame:
    t: int
    objects: tuple[GroundedObject, ...]
    confidence: float
    reasoning: str


@dataclass(frozen=True)
class GroundingResult:
    frames: tuple[GroundedFrame, ...]  # sorted by t

    def frame(self, t: int) -> GroundedFrame:
        for f in self.frames:
            if f.t == t:
                return f
        raise KeyError(t)

    @property
    def confidences(self) -> list[float]:
        return [f.confidence for f in self.frames]


@dataclass(frozen=True)
class SegmentedFrame:
    t: int
    layers: dict[int, np.ndarray]  # object id -> boolean layer
    iou: dict[int, float]
    frame_score: float


@dataclass(frozen=True)
class SegmentationResult:
    frames: tuple[SegmentedFrame, ...]

    def frame(self, t: int) -> SegmentedFrame:
        for f in self.frames:
            if f.t == t:
                return f
        raise KeyError(t)

    @property
    def frame_scores(self) -> list[float]:
        return [f.frame_score for f in self.frames]


@dataclass(frozen=True)
class TrackerSession:
    session_id: str
    direction: str
    init_t: int


def merge_layers(height: int, width: int, layers: dict[int, np.ndarray]) -> np.ndarray:
    """Combine per-object boolean layers into one label mask.

    Painted in ascending id order, so higher ids win overlaps (matching the
    synthetic renderer's draw order).
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    for object_id in sorted(layers):
        mask[layers[object_id]] = object_id
    return mask


def split_layers(mask: np.ndarray) -> dict[int, np.ndarray]:
    return {int(k): mask == k for k in np.unique(mask) if k != 0}


# ---------------------------------------------------------------------------
# Validation helpers


def _expect(cond: bool, field: str, detail: str):
    if not cond:
        raise SchemaError(f"{field} {detail}")


def _expect_int(value, field: str) -> int:
    _expect(isinstance(value, int) and not isinstance(value, bool), field, "must be an integer")
    return value


def _expect_number(value, field: str) -> float:
    _expect(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        field,
        "must be a number",
    )
    return float(value)


def _expect_str(value, field: str) -> str:
    _expect(isinstance(value, str), field, "must be a string")
    return value


def _expect_list(value, field: str) -> list:
    _expect(isinstance(value, list), field, "must be a list")
    return value


def _expect_dict(value, field: str) -> dict:
    _expect(isinstance(value, dict), field, "must be an object")
    return value


def _parse_box(value, field: str) -> tuple[int, int, int, int]:
    box = _expect_list(value, field)
    _expect(len(box) == 4, field, "must have 4 coordinates")
    x1, y1, x2, y2 = (_expect_int(v, f"{field}[{i}]") for i, v in enumerate(box))
    _expect(x2 > x1 and y2 > y1, field, f"is degenerate: {box}")
    return (x1, y1, x2, y2)


def _parse_confidence(value, field: str) -> float:
    conf = _expect_number(value, field)
    _expect(0.0 <= conf <= 1.0, field, f"out of range: {conf}")
    return conf


def _image_payload(image: np.ndarray | None, path: str | Path | None) -> dict:
    if path is not None:
        return {"image_path": str(path)}
    if image is None:
        raise SchemaError("frame needs image_b64 or image_path")
    return {"image_b64": encode_image_b64(image)}


def load_frame_image(frame_doc: dict, field: str) -> np.ndarray:
    """Decode a frame's image from whichever payload field it carries."""
    if "image_b64" in frame_doc:
        return decode_image_b64(_expect_str(frame_doc["image_b64"], f"{field}.image_b64"))
    if "image_path" in frame_doc:
        path = Path(_expect_str(frame_doc["image_path"], f"{field}.image_path"))
        if not path.is_file():
            raise SchemaError(f"{field}.image_path does not exist: {path}")
        return png_bytes_to_image(path.read_bytes())
    raise SchemaError(f"{field} needs image_b64 or image_path")


# ---------------------------------------------------------------------------
# /ground


def build_ground_request(
    frames: list[tuple[int, np.ndarray]],
    query: str,
    prompt: str,
    frame_paths: dict[int, str | Path] | None = None,
) -> dict:
    if not frames:
        raise SchemaError("frames must be nonempty")
    if not query:
        raise SchemaError("query must be nonempty")
    frame_paths = frame_paths or {}
    return {
        "query": query,
        "prompt": prompt,
        "frames": [
            {"t": t, **_image_payload(img, frame_paths.get(t))} for t, img in frames
        ],
    }


def parse_ground_request(doc: dict) -> tuple[str, str, list[tuple[int, np.ndarray]]]:
    body = _expect_dict(doc, "request")
    query = _expect_str(body.get("query"), "query")
    prompt = _expect_str(body.get("prompt", ""), "prompt")
    _expect(bool(query), "query", "must be nonempty")
    frames = _expect_list(body.get("frames"), "frames")
    _expect(bool(frames), "frames", "must be nonempty")
    out = []
    for i, fd in enumerate(frames):
        fd = _expect_dict(fd, f"frames[{i}]")
        t = _expect_int(fd.get("t"), f"frames[{i}].t")
        out.append((t, load_frame_image(fd, f"frames[{i}]")))
    return query, prompt, out


def build_ground_response(result: GroundingResult) -> dict:
    return {
        "frames": [
            {
                "t": f.t,
                "objects": [
                    {
                        "id": o.object_id,
                        "label": o.label,
                        "box": list(o.box) if o.box is not None else None,
                        "present": o.present,
                    }
                    for o in f.objects
                ],
                "confidence": f.confidence,
                "reasoning": f.reasoning,
            }
            for f in result.frames
        ]
    }


def parse_ground_response(doc: dict) -> GroundingResult:
    body = _expect_dict(doc, "response")
    frames = _expect_list(body.get("frames"), "frames")
    parsed = []
    for i, fd in enumerate(frames):
        fd = _expect_dict(fd, f"frames[{i}]")
        t = _expect_int(fd.get("t"), f"frames[{i}].t")
        objects = []
        for k, od in enumerate(_expect_list(fd.get("objects"), f"frames[{i}].objects")):
            od = _expect_dict(od, f"frames[{i}].objects[{k}]")
            oid = _expect_int(od.get("id"), f"frames[{i}].objects[{k}].id")
            _expect(oid >= 1, f"frames[{i}].objects[{k}].id", "must be >= 1")
            label = _expect_str(od.get("label", ""), f"frames[{i}].objects[{k}].label")
            present = od.get("present", True)
            _expect(
                isinstance(present, bool), f"frames[{i}].objects[{k}].present", "must be a bool"
            )
            box = None
            if od.get("box") is not None:
                box = _parse_box(od["box"], f"frames[{i}].objects[{k}].box")
            _expect(
                box is not None or not present,
                f"frames[{i}].objects[{k}].box",
                "missing for a present object",
            )
            objects.append(GroundedObject(oid, label, box, present))
        confidence = _parse_confidence(fd.get("confidence"), f"frames[{i}].confidence")
        reasoning = _expect_str(fd.get("reasoning", ""), f"frames[{i}].reasoning")
        parsed.append(GroundedFrame(t, tuple(objects), confidence, reasoning))
    parsed.sort(key=lambda f: f.t)
    return GroundingResult(tuple(parsed))


# ---------------------------------------------------------------------------
# /segment


def build_segment_request(
    frames: list[tuple[int, np.ndarray]],
    boxes: dict[int, list[tuple[int, tuple[int, int, int, int]]]],
    frame_paths: dict[int, str | Path] | None = None,
) -> dict:
    if not frames:
        raise SchemaError("frames must be nonempty")
    frame_paths = frame_paths or {}
    return {
        "frames": [
            {
                "t": t,
                **_image_payload(img, frame_paths.get(t)),
                "boxes": [
                    {"id": oid, "box": list(box)} for oid, box in boxes.get(t, [])
                ],
            }
            for t, img in frames
        ]
    }


def parse_segment_request(
    doc: dict,
) -> list[tuple[int, np.ndarray, list[tuple[int, tuple[int, int, int, int]]]]]:
    body = _expect_dict(doc, "request")
    frames = _expect_list(body.get("frames"), "frames")
    _expect(bool(frames), "frames", "must be nonempty")
    out = []
    for i, fd in enumerate(frames):
        fd = _expect_dict(fd, f"frames[{i}]")
        t = _expect_int(fd.get("t"), f"frames[{i}].t")
        image = load_frame_image(fd, f"frames[{i}]")
        boxes = []
        for k, bd in enumerate(_expect_list(fd.get("boxes"), f"frames[{i}].boxes")):
            bd = _expect_dict(bd, f"frames[{i}].boxes[{k}]")
            oid = _expect_int(bd.get("id"), f"frames[{i}].boxes[{k}].id")
            boxes.append((oid, _parse_box(bd.get("box"), f"frames[{i}].boxes[{k}].box")))
        out.append((t, image, boxes))
    return out


def build_segment_response(result: SegmentationResult) -> dict:
    frames = []
    for f in result.frames:
        ids = sorted(f.layers)
        frames.append(
            {
                "t": f.t,
                "masks": [
                    {
                        "id": oid,
                        "mask_b64": encode_mask_b64(
                            np.where(f.layers[oid], np.uint8(oid), np.uint8(0))
                        ),
                    }
                    for oid in ids
                ],
                "iou": [{"id": oid, "score": f.iou[oid]} for oid in ids],
                "frame_score": f.frame_score,
            }
        )
    return {"frames": frames}


def parse_segment_response(doc: dict) -> SegmentationResult:
    body = _expect_dict(doc, "response")
    frames = _expect_list(body.get("frames"), "frames")
    parsed = []
    for i, fd in enumerate(frames):
        fd = _expect_dict(fd, f"frames[{i}]")
        t = _expect_int(fd.get("t"), f"frames[{i}].t")
        layers: dict[int, np.ndarray] = {}
        for k, md in enumerate(_expect_list(fd.get("masks"), f"frames[{i}].masks")):
            md = _expect_dict(md, f"frames[{i}].masks[{k}]")
            oid = _expect_int(md.get("id"), f"frames[{i}].masks[{k}].id")
            raster = decode_mask_b64(
                _expect_str(md.get("mask_b64"), f"frames[{i}].masks[{k}].mask_b64")
            )
            layers[oid] = raster != 0
        iou: dict[int, float] = {}
        for k, sd in enumerate(_expect_list(fd.get("iou"), f"frames[{i}].iou")):
            sd = _expect_dict(sd, f"frames[{i}].iou[{k}]")
            oid = _expect_int(sd.get("id"), f"frames[{i}].iou[{k}].id")
            score = _expect_number(sd.get("score"), f"frames[{i}].iou[{k}].score")
            _expect(0.0 <= score <= 1.0, f"frames[{i}].iou[{k}].score", f"out of range: {score}")
            iou[oid] = score
        frame_score = _parse_confidence(fd.get("frame_score"), f"frames[{i}].frame_score")
        parsed.append(SegmentedFrame(t, layers, iou, frame_score))
    parsed.sort(key=lambda f: f.t)
    return SegmentationResult(tuple(parsed))


# ---------------------------------------------------------------------------
# /track


def build_track_init_request(
    t: int,
    image: np.ndarray,
    mask: np.ndarray,
    direction: str,
    image_path: str | Path | None = None,
) -> dict:
    if direction not in DIRECTIONS:
        raise SchemaError(f"direction must be one of {DIRECTIONS}: {direction!r}")
    return {
        "t": t,
        **_image_payload(image, image_path),
        "mask_b64": encode_mask_b64(mask),
        "direction": direction,
    }


def parse_track_init_request(doc: dict) -> tuple[int, np.ndarray, np.ndarray, str]:
    body = _expect_dict(doc, "request")
    t = _expect_int(body.get("t"), "t")
    image = load_frame_image(body, "request")
    mask = decode_mask_b64(_expect_str(body.get("mask_b64"), "mask_b64"))
    direction = _expect_str(body.get("direction"), "direction")
    _expect(direction in DIRECTIONS, "direction", f"must be one of {DIRECTIONS}")
    return t, image, mask, direction


def build_track_init_response(session_id: str) -> dict:
    return {"session": session_id}


def parse_track_init_response(doc: dict) -> str:
    body = _expect_dict(doc, "response")
    return _expect_str(body.get("session"), "session")


def build_track_step_request(
    session_id: str, t: int, image: np.ndarray, image_path: str | Path | None = None
) -> dict:
    return {"session": session_id, "t": t, **_image_payload(image, image_path)}


def parse_track_step_request(doc: dict) -> tuple[str, int, np.ndarray]:
    body = _expect_dict(doc, "request")
    session = _expect_str(body.get("session"), "session")
    t = _expect_int(body.get("t"), "t")
    return session, t, load_frame_image(body, "request")


def build_track_step_response(t: int, mask: np.ndarray) -> dict:
    return {"t": t, "mask_b64": encode_mask_b64(mask)}


def parse_track_step_response(doc: dict) -> tuple[int, np.ndarray]:
    body = _expect_dict(doc, "response")
    t = _expect_int(body.get("t"), "t")
    return t, decode_mask_b64(_expect_str(body.get("mask_b64"), "mask_b64"))


def build_error_response(message: str) -> dict:
    return {"error": message}

"""In-process deterministic backends for desk-scale runs.

The grounder and segmenter are oracles over synthetic-scene annotations;
the tracker is an exhaustive shift-search matcher. All three are pure
functions of their inputs plus the annotation document, so end-to-end runs
are bit-reproducible.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass

import numpy as np

from ..frames import MaskSequence
from .errors import ProtocolError, SchemaError
from .schema import (
    DIRECTIONS,
    GroundedFrame,
    GroundedObject,
    GroundingResult,
    SegmentationResult,
    SegmentedFrame,
    TrackerSession,
)

# Visibility-weighted grounding confidence: fully visible / clipped / absent.
CONF_FULL = 1.0
CONF_PARTIAL = 0.5
CONF_ABSENT = 0.1

STUB_REASONING = "stub grounder: boxes read from scene annotations"


def _annotation_index(annotations: dict) -> dict[int, dict]:
    index = {}
    for obj in annotations.get("objects", []):
        frames = {fr["t"]: fr for fr in obj["frames"]}
        index[int(obj["id"])] = {"label": obj.get("label", f"object {obj['id']}"), "frames": frames}
    return index


def match_query(annotations: dict, query: str) -> list[int]:
    """Object ids whose label occurs in the query, case-insensitive."""
    q = query.lower()
    return sorted(
        int(obj["id"])
        for obj in annotations.get("objects", [])
        if obj.get("label", f"object {obj['id']}").lower() in q
    )


class StubGrounder:
    """Oracle grounder: answers from ground-truth annotations."""

    def __init__(self, annotations: dict):
        self._index = _annotation_index(annotations)
        self._annotations = annotations

    def ground(self, frames: list[tuple[int, np.ndarray]], query: str, prompt: str) -> GroundingResult:
        if not frames:
            raise SchemaError("frames must be nonempty")
        if not query:
            raise SchemaError("query must be nonempty")
        target_ids = match_query(self._annotations, query)
        out = []
        for t, _image in sorted(frames, key=lambda ti: ti[0]):
            objects, confs = [], []
            for oid in target_ids:
                entry = self._index[oid]["frames"].get(t)
                label = self._index[oid]["label"]
                if entry is None or not entry["visible"]:
                    objects.append(GroundedObject(oid, label, None, False))
                    confs.append(CONF_ABSENT)
                else:
                    box = tuple(entry["box"])
                    objects.append(GroundedObject(oid, label, box, True))
                    confs.append(CONF_PARTIAL if entry["clipped"] else CONF_FULL)
            confidence = sum(confs) / len(confs) if confs else CONF_ABSENT
            out.append(GroundedFrame(t, tuple(objects), confidence, STUB_REASONING))
        return GroundingResult(tuple(out))


class StubSegmenter:
    """Box-fill segmenter; predicted IoU is exact against ground truth."""

    def __init__(self, gt_masks: MaskSequence | None = None):
        self._gt = gt_masks

    def segment(self, frames: list[tuple[int, np.ndarray]], grounding: GroundingResult) -> SegmentationResult:
        requested = sorted(t for t, _ in frames)
        grounded = sorted(f.t for f in grounding.frames)
        if requested != grounded:
            raise ProtocolError(
                f"grounding covers frames {grounded}, requested {requested}"
            )
        images = {t: img for t, img in frames}
        out = []
        for t in requested:
            gf = grounding.frame(t)
            h, w = images[t].shape[:2]
            layers: dict[int, np.ndarray] = {}
            iou: dict[int, float] = {}
            for obj in gf.objects:
                if not obj.present or obj.box is None:
                    continue
                x1, y1, x2, y2 = obj.box
                layer = np.zeros((h, w), dtype=bool)
                layer[max(0, y1) : min(h, y2), max(0, x1) : min(w, x2)] = True
                layers[obj.object_id] = layer
                iou[obj.object_id] = self._exact_iou(t, obj.object_id, layer)
            frame_score = sum(iou.values()) / len(iou) if iou else 0.0
            out.append(SegmentedFrame(t, layers, iou, frame_score))
        return SegmentationResult(tuple(out))

    def _exact_iou(self, t: int, object_id: int, layer: np.ndarray) -> float:
        if self._gt is None or not 1 <= t <= self._gt.length:
            return 1.0
        gt_layer = self._gt.mask(t) == object_id
        union = int(np.count_nonzero(layer | gt_layer))
        if union == 0:
            return 1.0
        return int(np.count_nonzero(layer & gt_layer)) / union


@dataclass
class _TrackedObject:
    template: np.ndarray  # boolean layer at absolute canvas coordinates
    color: tuple[int, int, int]


@dataclass
class _SessionState:
    direction: str
    last_t: int
    objects: dict[int, _TrackedObject]
    lock: threading.Lock


class StubTracker:
    """Exhaustive integer shift-search tracker.

    Each step shifts every object's previous mask within a Chebyshev radius
    and keeps the translation matching the most object-colored pixels.
    Ties break toward smaller (|dx|+|dy|), then smaller dy, then smaller
    dx. A zero-match step emits an empty layer but keeps the previous mask
    as the search template so a reappearing object can be reacquired.
    """

    def __init__(self, radius: int = 8):
        if radius < 0:
            raise ValueError("radius must be >= 0")
        self.radius = radius
        self._sessions: dict[str, _SessionState] = {}
        self._registry_lock = threading.Lock()

    def init(self, t: int, image: np.ndarray, mask: np.ndarray, direction: str) -> TrackerSession:
        if direction not in DIRECTIONS:
            raise ProtocolError(f"direction must be one of {DIRECTIONS}: {direction!r}")
        ids = [int(k) for k in np.unique(mask) if k != 0]
        if not ids:
            raise ProtocolError("no objects to memorize: mask is all background")
        objects = {}
        for oid in ids:
            layer = mask == oid
            pixels = image[layer]
            # Majority color of the object at init is the match target.
            colors, counts = np.unique(pixels.reshape(-1, 3), axis=0, return_counts=True)
            color = tuple(int(c) for c in colors[counts.argmax()])
            objects[oid] = _TrackedObject(layer, color)
        session_id = uuid.uuid4().hex
        state = _SessionState(direction, t, objects, threading.Lock())
        with self._registry_lock:
            self._sessions[session_id] = state
        return TrackerSession(session_id, direction, t)

    def step(self, session: TrackerSession | str, t: int, image: np.ndarray) -> np.ndarray:
        session_id = session.session_id if isinstance(session, TrackerSession) else session
        with self._registry_lock:
            state = self._sessions.get(session_id)
        if state is None:
            raise ProtocolError(f"unknown session: {session_id}")
        with state.lock:
            expected = state.last_t + (1 if state.direction == "backward" else -1)
            if t != expected:
                raise ProtocolError(
                    f"out-of-order step: session at {state.last_t} "
                    f"({state.direction}), expected {expected}, got {t}"
                )
            h, w = image.shape[:2]
            mask = np.zeros((h, w), dtype=np.uint8)
            for oid in sorted(state.objects):
                tracked = state.objects[oid]
                color_match = (image == np.array(tracked.color, dtype=np.uint8)).all(axis=2)
                shifted = self._best_shift(tracked.template, color_match)
                if shifted is not None:
                    mask[shifted] = oid
                    tracked.template = shifted
            state.last_t = t
            return mask

    def _best_shift(self, template: np.ndarray, color_match: np.ndarray) -> np.ndarray | None:
        h, w = template.shape
        r = self.radius
        best_key = None
        best_shift = (0, 0)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                src_y0, src_y1 = max(0, -dy), min(h, h - dy)
                src_x0, src_x1 = max(0, -dx), min(w, w - dx)
                if src_y0 >= src_y1 or src_x0 >= src_x1:
                    count = 0
                else:
                    count = int(
                        np.count_nonzero(
                            template[src_y0:src_y1, src_x0:src_x1]
                            & color_match[
                                src_y0 + dy : src_y1 + dy, src_x0 + dx : src_x1 + dx
                            ]
                        )
                    )
                key = (-count, abs(dx) + abs(dy), dy, dx)
                if best_key is None or key < best_key:
                    best_key = key
                    best_shift = (dy, dx)
        if best_key is None or best_key[0] == 0:
            return None  # nothing matched; keep the old template
        dy, dx = best_shift
        shifted = np.zeros_like(template)
        src_y0, src_y1 = max(0, -dy), min(h, h - dy)
        src_x0, src_x1 = max(0, -dx), min(w, w - dx)
        shifted[src_y0 + dy : src_y1 + dy, src_x0 + dx : src_x1 + dx] = template[
            src_y0:src_y1, src_x0:src_x1
        ]
        return shifted


def stub_backends_for_annotations(
    annotations: dict, gt_masks: MaskSequence | None = None, radius: int = 8
) -> tuple[StubGrounder, StubSegmenter, StubTracker]:
    return StubGrounder(annotations), StubSegmenter(gt_masks), StubTracker(radius)

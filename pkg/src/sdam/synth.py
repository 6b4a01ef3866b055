"""Synthetic scene rendering with analytic ground truth.

Objects are axis-aligned solid-color rectangles moving on a seeded static
noise background, so masks, boxes, and visibility are exact by construction.
Supported abrupt-change events: teleport, hide, show.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frames import FrameSequence, MaskSequence


class SceneError(ValueError):
    """Raised for invalid scene specifications."""


@dataclass(frozen=True)
class SceneEvent:
    """State change applied at the start of frame `frame` (1-based).

    kind: "teleport" (jump to `to` top-left), "hide", or "show".
    """

    frame: int
    kind: str
    to: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in ("teleport", "hide", "show"):
            raise SceneError(f"unknown event kind: {self.kind!r}")
        if self.kind == "teleport" and self.to is None:
            raise SceneError("teleport event requires a target position")


@dataclass(frozen=True)
class ObjectSpec:
    object_id: int
    size: tuple[int, int]  # (width, height) px
    color: tuple[int, int, int]
    start: tuple[int, int]  # top-left (x, y) at frame 1
    velocity: tuple[int, int] = (0, 0)  # integer px/frame
    visible_at_start: bool = True
    events: tuple[SceneEvent, ...] = ()

    def __post_init__(self):
        if self.object_id < 1:
            raise SceneError("object ids start at 1")
        if self.size[0] < 1 or self.size[1] < 1:
            raise SceneError("object size must be positive")


@dataclass(frozen=True)
class SyntheticScene:
    width: int
    height: int
    frame_count: int
    objects: tuple[ObjectSpec, ...]
    background_gray: int = 96
    noise_amplitude: int = 24
    name: str = "synthetic"

    def __post_init__(self):
        if self.frame_count < 1:
            raise SceneError("zero frames")
        if not self.objects:
            raise SceneError("zero objects")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SceneError("duplicate object ids")


@dataclass(frozen=True)
class ObjectState:
    position: tuple[int, int]
    visible: bool


def object_states(spec: ObjectSpec, frame_count: int) -> list[ObjectState]:
    """Walk the trajectory frame by frame, applying events on entry."""
    states = []
    x, y = spec.start
    visible = spec.visible_at_start
    events_by_frame: dict[int, list[SceneEvent]] = {}
    for ev in spec.events:
        events_by_frame.setdefault(ev.frame, []).append(ev)
    for t in range(1, frame_count + 1):
        if t > 1:
            x += spec.velocity[0]
            y += spec.velocity[1]
        for ev in events_by_frame.get(t, ()):
            if ev.kind == "teleport":
                x, y = ev.to  # type: ignore[misc]
            elif ev.kind == "hide":
                visible = False
            elif ev.kind == "show":
                visible = True
        states.append(ObjectState((x, y), visible))
    return states


def render_synthetic(scene: SyntheticScene, seed: int) -> tuple[FrameSequence, MaskSequence, dict]:
    """Render (frames, masks, annotations), a pure function of (scene, seed).

    The seed drives only the static background texture. Annotations carry
    per-frame tight bounding boxes (x2/y2 exclusive) and visibility per
    object, computed from the rendered masks so overlap and canvas clipping
    are accounted for exactly:
      full     -> rendered pixel count equals the nominal rectangle area
      partial  -> clipped by the canvas or occluded, but nonempty
      absent   -> no rendered pixels
    """
    rng = np.random.default_rng(seed)
    h, w = scene.height, scene.width
    noise = rng.integers(
        -scene.noise_amplitude, scene.noise_amplitude + 1, size=(h, w), endpoint=False
    )
    background = np.clip(scene.background_gray + noise, 0, 255).astype(np.uint8)
    background = np.repeat(background[:, :, None], 3, axis=2)

    trajectories = {o.object_id: object_states(o, scene.frame_count) for o in scene.objects}
    ordered = sorted(scene.objects, key=lambda o: o.object_id)

    frames, masks = [], []
    per_object_frames: dict[int, list[dict]] = {o.object_id: [] for o in scene.objects}
    for t in range(1, scene.frame_count + 1):
        frame = background.copy()
        mask = np.zeros((h, w), dtype=np.uint8)
        for obj in ordered:  # ascending id; later ids draw on top
            state = trajectories[obj.object_id][t - 1]
            if not state.visible:
                continue
            x, y = state.position
            ow, oh = obj.size
            x1, y1 = max(0, x), max(0, y)
            x2, y2 = min(w, x + ow), min(h, y + oh)
            if x1 < x2 and y1 < y2:
                frame[y1:y2, x1:x2] = obj.color
                mask[y1:y2, x1:x2] = obj.object_id
        frames.append(frame)
        masks.append(mask)
        for obj in ordered:
            layer = mask == obj.object_id
            count = int(layer.sum())
            if count == 0:
                entry = {"t": t, "box": None, "visible": False, "clipped": False}
            else:
                ys, xs = np.nonzero(layer)
                box = [int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1]
                full = count == obj.size[0] * obj.size[1]
                entry = {"t": t, "box": box, "visible": True, "clipped": not full}
            per_object_frames[obj.object_id].append(entry)

    annotations = {
        "sequence": scene.name,
        "objects": [
            {"id": obj.object_id, "label": f"object {obj.object_id}", "frames": per_object_frames[obj.object_id]}
            for obj in ordered
        ],
    }
    n = max(o.object_id for o in scene.objects)
    return (
        FrameSequence(tuple(frames), scene.name),
        MaskSequence(tuple(masks), n),
        annotations,
    )


def scene_from_dict(doc: dict) -> SyntheticScene:
    """Parse the scene JSON document used by the `synth` CLI subcommand."""
    try:
        objects = []
        for od in doc["objects"]:
            events = []
            for ed in od.get("events", ()):
                if "teleport" in ed:
                    events.append(SceneEvent(ed["frame"], "teleport", tuple(ed["teleport"])))
                elif ed.get("hide"):
                    events.append(SceneEvent(ed["frame"], "hide"))
                elif ed.get("show"):
                    events.append(SceneEvent(ed["frame"], "show"))
                else:
                    raise SceneError(f"unknown event: {ed}")
            objects.append(
                ObjectSpec(
                    object_id=od["id"],
                    size=tuple(od["size"]),
                    color=tuple(od["color"]),
                    start=tuple(od["start"]),
                    velocity=tuple(od.get("velocity", (0, 0))),
                    visible_at_start=od.get("visible_at_start", True),
                    events=tuple(events),
                )
            )
        return SyntheticScene(
            width=doc["width"],
            height=doc["height"],
            frame_count=doc["frames"],
            objects=tuple(objects),
            background_gray=doc.get("background_gray", 96),
            noise_amplitude=doc.get("noise_amplitude", 24),
            name=doc.get("name", "synthetic"),
        )
    except KeyError as e:
        raise SceneError(f"scene document missing field {e}") from e


def load_scene(path: str | Path) -> SyntheticScene:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def write_annotations(annotations: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(annotations, indent=2) + "\n")


def load_annotations(path: str | Path) -> dict:
    with open(path) as f:
        return json.load(f)

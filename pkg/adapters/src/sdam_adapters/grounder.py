"""Grounder role: text query + frames -> per-frame boxes and confidence.

An engine produces the model-side JSON (objects + discrete
confidence_level + reasoning); the adapter validates it, retrying once
with a repair prompt on malformed output, and maps levels to the wire
confidence values. The classical engine is a CPU-only saliency detector
so the role runs without any checkpoint; a vision-language engine loads
lazily when a model id is configured.
"""

from __future__ import annotations

import json
import re

import numpy as np
from scipy import ndimage

from .wire import AdapterError, WireError, parse_engine_grounding

REPAIR_PROMPT = (
    "\n\nYour previous reply was not valid JSON for the requested schema. "
    "Reply again with ONLY the JSON document, no prose around it."
)

_QUERY_ID = re.compile(r"object\s+(\d+)", re.IGNORECASE)

# Saliency thresholds for the classical engine.
COLOR_DISTANCE = 60
MIN_AREA = 12


class ClassicalGrounderEngine:
    """Deterministic color-saliency detector standing in for a VLM.

    Objects are connected components of pixels far from the frame's median
    color; identity comes from the component's quantized mean color, so a
    solid-colored object keeps its id across frames.
    """

    def generate(self, frames: list[tuple[int, np.ndarray]], query: str, prompt: str) -> str:
        target_ids = [int(m) for m in _QUERY_ID.findall(query)]
        out = []
        for t, image in frames:
            detections = self._detect(image)
            wanted = detections
            if target_ids:
                wanted = [d for d in detections if d["id"] in target_ids]
            if wanted:
                solid = min(d["solidity"] for d in wanted)
                level = 5 if solid > 0.85 else 3
            else:
                level = 1
            out.append(
                {
                    "t": t,
                    "objects": [
                        {"id": d["id"], "label": d["label"], "box": d["box"]} for d in wanted
                    ],
                    "confidence_level": level,
                    "reasoning": (
                        f"found {len(wanted)} of {len(detections)} salient regions "
                        f"matching '{query}'"
                    ),
                }
            )
        return json.dumps({"frames": out})

    def _detect(self, image: np.ndarray) -> list[dict]:
        median = np.median(image.reshape(-1, 3), axis=0)
        dist = np.abs(image.astype(np.int64) - median).max(axis=2)
        labels, count = ndimage.label(dist > COLOR_DISTANCE)
        detections = []
        for comp in range(1, count + 1):
            layer = labels == comp
            area = int(layer.sum())
            if area < MIN_AREA:
                continue
            ys, xs = np.nonzero(layer)
            box = [int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1]
            mean_color = tuple(int(c) // 32 for c in image[layer].mean(axis=0))
            detections.append(
                {
                    "color_key": mean_color,
                    "box": box,
                    "area": area,
                    "solidity": area / ((box[2] - box[0]) * (box[3] - box[1])),
                }
            )
        # Stable ids: rank by quantized color so the same object keeps its
        # id in every frame it appears in.
        detections.sort(key=lambda d: d["color_key"])
        for i, d in enumerate(detections, start=1):
            d["id"] = i
            d["label"] = f"object {i}"
        return detections


class VlmGrounderEngine:
    """Vision-language engine; loads a chat VLM checkpoint lazily."""

    def __init__(self, model_id: str, device: str = "cpu"):
        self.model_id = model_id
        self.device = device
        self._pipe = None

    def _load(self):
        if self._pipe is not None:
            return
        try:
            from transformers import AutoModelForImageTextToText, AutoProcessor
        except ImportError as e:
            raise AdapterError(f"transformers unavailable for {self.model_id}: {e}") from e
        try:
            processor = AutoProcessor.from_pretrained(self.model_id)
            model = AutoModelForImageTextToText.from_pretrained(self.model_id).to(self.device)
        except Exception as e:
            raise AdapterError(f"cannot load {self.model_id}: {e}") from e
        self._pipe = (processor, model)

    def generate(self, frames: list[tuple[int, np.ndarray]], query: str, prompt: str) -> str:
        self._load()
        processor, model = self._pipe
        from PIL import Image

        images = [Image.fromarray(img) for _, img in frames]
        ts = [t for t, _ in frames]
        full_prompt = (
            f"{prompt}\n\nThe frames are, in order, t = {ts}. Reply with one JSON "
            'document: {"frames": [<one entry per frame as specified>]}.'
        )
        messages = [
            {
                "role": "user",
                "content": [{"type": "image"} for _ in images]
                + [{"type": "text", "text": full_prompt}],
            }
        ]
        text = processor.apply_chat_template(messages, add_generation_prompt=True)
        inputs = processor(text=text, images=images, return_tensors="pt").to(self.device)
        generated = model.generate(**inputs, max_new_tokens=1024, do_sample=False)
        reply = processor.batch_decode(generated, skip_special_tokens=True)[-1]
        start, end = reply.find("{"), reply.rfind("}")
        return reply[start : end + 1] if start >= 0 <= end else reply


class GrounderAdapter:
    def __init__(self, engine):
        self.engine = engine

    def ground(self, query: str, prompt: str, frames: list[tuple[int, np.ndarray]]) -> dict:
        requested = [t for t, _ in frames]
        raw = self.engine.generate(frames, query, prompt)
        try:
            parsed = parse_engine_grounding(raw, requested)
        except WireError:
            raw = self.engine.generate(frames, query, prompt + REPAIR_PROMPT)
            parsed = parse_engine_grounding(raw, requested)  # second failure propagates
        return {"frames": parsed}


def build_grounder(model_id: str = "classical", device: str = "cpu") -> GrounderAdapter:
    if model_id == "classical":
        return GrounderAdapter(ClassicalGrounderEngine())
    return GrounderAdapter(VlmGrounderEngine(model_id, device))

"""Segmenter role: boxes -> per-object masks with predicted quality.

The classical engine refines each box by color coherence: foreground is
whatever matches the box's dominant color, and the predicted IoU is the
foreground fill fraction (solid objects score ~1). A promptable-mask
engine slot loads lazily when a checkpoint is configured.
"""

from __future__ import annotations

import numpy as np

from .wire import AdapterError, encode_mask

COLOR_TOLERANCE = 40


class ClassicalSegmenterEngine:
    def masks_for_frame(
        self, image: np.ndarray, boxes: list[tuple[int, list[int]]]
    ) -> list[tuple[int, np.ndarray, float]]:
        h, w = image.shape[:2]
        out = []
        for oid, (x1, y1, x2, y2) in boxes:
            x1c, y1c = max(0, x1), max(0, y1)
            x2c, y2c = min(w, x2), min(h, y2)
            layer = np.zeros((h, w), dtype=bool)
            if x1c < x2c and y1c < y2c:
                crop = image[y1c:y2c, x1c:x2c].astype(np.int64)
                dominant = np.median(crop.reshape(-1, 3), axis=0)
                fg = np.abs(crop - dominant).max(axis=2) <= COLOR_TOLERANCE
                if not fg.any():
                    fg[:] = True  # degenerate crop: fall back to the full box
                layer[y1c:y2c, x1c:x2c] = fg
            score = float(layer.sum() / max(1, (x2c - x1c) * (y2c - y1c)))
            out.append((oid, layer, min(max(score, 0.0), 1.0)))
        return out


class PromptableMaskEngine:
    """Slot for a promptable segmentation checkpoint (box prompts)."""

    def __init__(self, model_id: str, device: str = "cpu"):
        self.model_id = model_id
        self.device = device
        self._pipe = None

    def _load(self):
        if self._pipe is not None:
            return
        try:
            from transformers import SamModel, SamProcessor
        except ImportError as e:
            raise AdapterError(f"transformers unavailable for {self.model_id}: {e}") from e
        try:
            self._pipe = (
                SamProcessor.from_pretrained(self.model_id),
                SamModel.from_pretrained(self.model_id).to(self.device),
            )
        except Exception as e:
            raise AdapterError(f"cannot load {self.model_id}: {e}") from e

    def masks_for_frame(self, image, boxes):
        self._load()
        processor, model = self._pipe
        import torch
        from PIL import Image

        pil = Image.fromarray(image)
        out = []
        for oid, box in boxes:
            inputs = processor(pil, input_boxes=[[list(box)]], return_tensors="pt").to(self.device)
            with torch.no_grad():
                result = model(**inputs)
            masks = processor.image_processor.post_process_masks(
                result.pred_masks.cpu(),
                inputs["original_sizes"].cpu(),
                inputs["reshaped_input_sizes"].cpu(),
            )[0][0]
            scores = result.iou_scores.cpu().reshape(-1)
            best = int(scores.argmax())
            layer = masks[best].numpy().astype(bool)
            out.append((oid, layer, float(min(max(float(scores[best]), 0.0), 1.0))))
        return out


class SegmenterAdapter:
    def __init__(self, engine):
        self.engine = engine

    def segment(self, frames: list[tuple[int, np.ndarray, list]]) -> dict:
        out = []
        for t, image, boxes in sorted(frames, key=lambda f: f[0]):
            results = self.engine.masks_for_frame(image, boxes)
            masks_doc, iou_doc = [], []
            for oid, layer, score in sorted(results, key=lambda r: r[0]):
                raster = np.where(layer, np.uint8(oid), np.uint8(0))
                masks_doc.append({"id": oid, "mask_b64": encode_mask(raster)})
                iou_doc.append({"id": oid, "score": score})
            frame_score = (
                sum(d["score"] for d in iou_doc) / len(iou_doc) if iou_doc else 0.0
            )
            out.append(
                {"t": t, "masks": masks_doc, "iou": iou_doc, "frame_score": frame_score}
            )
        return {"frames": out}


def build_segmenter(model_id: str = "classical", device: str = "cpu") -> SegmenterAdapter:
    if model_id == "classical":
        return SegmenterAdapter(ClassicalSegmenterEngine())
    return SegmenterAdapter(PromptableMaskEngine(model_id, device))

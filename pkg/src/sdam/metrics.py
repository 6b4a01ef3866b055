"""Region similarity J, boundary accuracy F, and temporal stability.

DAVIS-convention definitions: J is intersection-over-union per object, F
the harmonic mean of boundary precision/recall under a pixel-distance
tolerance (default 0.8% of the image diagonal, at least 1 px). Frames
where an object is absent from both prediction and ground truth score 1,
so absent-object frames do not poison sequence means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .frames import MaskSequence


class MetricsError(ValueError):
    """Raised for mismatched metric inputs."""


def default_tolerance(height: int, width: int) -> int:
    return max(1, math.ceil(0.008 * math.hypot(height, width)))


def jaccard(pred: np.ndarray, gt: np.ndarray, object_id: int) -> float:
    """IoU of one object's binary layer; both-empty -> 1, one-empty -> 0."""
    if pred.shape != gt.shape:
        raise MetricsError(f"dim mismatch: {pred.shape} vs {gt.shape}")
    p = pred == object_id
    g = gt == object_id
    union = int(np.count_nonzero(p | g))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(p & g)) / union


def boundary_pixels(layer: np.ndarray) -> np.ndarray:
    """4-connected boundary: layer pixels with any neighbor off the layer.

    Pixels on the image border count as boundary (the off-image side is
    background).
    """
    if not layer.any():
        return np.zeros((0, 2), dtype=np.int64)
    padded = np.pad(layer, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return np.argwhere(layer & ~interior)


def _hits_within(src: np.ndarray, dst: np.ndarray, tol_sq: int) -> int:
    # Exact integer squared distances; no float drift against a naive oracle.
    d = src[:, None, :] - dst[None, :, :]
    min_sq = (d * d).sum(axis=2).min(axis=1)
    return int(np.count_nonzero(min_sq <= tol_sq))


def boundary_f(
    pred: np.ndarray, gt: np.ndarray, object_id: int, tolerance: float | None = None
) -> float:
    """Boundary F-measure for one object id."""
    if pred.shape != gt.shape:
        raise MetricsError(f"dim mismatch: {pred.shape} vs {gt.shape}")
    if tolerance is None:
        tolerance = default_tolerance(*pred.shape)
    p = boundary_pixels(pred == object_id)
    g = boundary_pixels(gt == object_id)
    if len(p) == 0 and len(g) == 0:
        return 1.0
    if len(p) == 0 or len(g) == 0:
        return 0.0
    tol_sq = int(math.floor(tolerance * tolerance))
    precision = _hits_within(p, g, tol_sq) / len(p)
    recall = _hits_within(g, p, tol_sq) / len(g)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def stability_trend(series: list[float], window: int = 5) -> list[float]:
    """Centered simple moving average; output length T - w + 1."""
    t = len(series)
    if window < 1 or window > t:
        raise MetricsError(f"window {window} outside [1, {t}]")
    if window % 2 == 0:
        raise MetricsError(f"window must be odd: {window}")
    out = []
    for i in range(t - window + 1):
        out.append(sum(series[i : i + window]) / window)
    return out


@dataclass(frozen=True)
class MetricsReport:
    object_ids: tuple[int, ...]
    per_frame_j: dict[int, list[float]]  # object id -> per-frame J
    per_frame_f: dict[int, list[float]]
    frame_j: list[float]  # per-frame mean over objects
    frame_f: list[float]
    frame_jf: list[float]
    mean_j: float
    mean_f: float
    mean_jf: float
    trend_window: int
    trend: list[float]

    def to_dict(self) -> dict:
        return {
            "objects": list(self.object_ids),
            "mean": {"J": self.mean_j, "F": self.mean_f, "J&F": self.mean_jf},
            "frames": [
                {"t": i + 1, "J": j, "F": f, "J&F": jf}
                for i, (j, f, jf) in enumerate(
                    zip(self.frame_j, self.frame_f, self.frame_jf)
                )
            ],
            "per_object": {
                str(oid): {"J": self.per_frame_j[oid], "F": self.per_frame_f[oid]}
                for oid in self.object_ids
            },
            "trend": {"window": self.trend_window, "values": self.trend},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        lines = [
            f"{'metric':<8}{'mean':>8}",
            f"{'J':<8}{self.mean_j:>8.4f}",
            f"{'F':<8}{self.mean_f:>8.4f}",
            f"{'J&F':<8}{self.mean_jf:>8.4f}",
        ]
        return "\n".join(lines)

    def trend_csv(self) -> str:
        half = (self.trend_window - 1) // 2
        rows = ["t,jf,ma"]
        for i, jf in enumerate(self.frame_jf):
            k = i - half
            ma = f"{self.trend[k]:.6f}" if 0 <= k < len(self.trend) else ""
            rows.append(f"{i + 1},{jf:.6f},{ma}")
        return "\n".join(rows) + "\n"


def evaluate(
    pred: MaskSequence,
    gt: MaskSequence,
    object_ids: list[int] | None = None,
    tolerance: float | None = None,
    trend_window: int = 5,
) -> MetricsReport:
    """Per-object J/F, per-frame and sequence means, and the MA trend.

    Evaluates the ground truth's object ids by default. The trend window
    shrinks (staying odd) for sequences shorter than the window.
    """
    if pred.length != gt.length:
        raise MetricsError(f"length mismatch: pred {pred.length} vs gt {gt.length}")
    ids = object_ids if object_ids is not None else list(range(1, gt.object_count + 1))
    if not ids:
        raise MetricsError("no object ids to evaluate")
    per_j = {oid: [] for oid in ids}
    per_f = {oid: [] for oid in ids}
    for t in range(1, gt.length + 1):
        pm, gm = pred.mask(t), gt.mask(t)
        for oid in ids:
            per_j[oid].append(jaccard(pm, gm, oid))
            per_f[oid].append(boundary_f(pm, gm, oid, tolerance))
    frame_j = [sum(per_j[oid][i] for oid in ids) / len(ids) for i in range(gt.length)]
    frame_f = [sum(per_f[oid][i] for oid in ids) / len(ids) for i in range(gt.length)]
    frame_jf = [(j + f) / 2.0 for j, f in zip(frame_j, frame_f)]
    mean_j = sum(frame_j) / len(frame_j)
    mean_f = sum(frame_f) / len(frame_f)
    window = min(trend_window, gt.length)
    if window % 2 == 0:
        window -= 1
    window = max(window, 1)
    return MetricsReport(
        object_ids=tuple(ids),
        per_frame_j=per_j,
        per_frame_f=per_f,
        frame_j=frame_j,
        frame_f=frame_f,
        frame_jf=frame_jf,
        mean_j=mean_j,
        mean_f=mean_f,
        mean_jf=(mean_j + mean_f) / 2.0,
        trend_window=window,
        trend=stability_trend(frame_jf, window),
    )

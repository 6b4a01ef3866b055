"""Motion-driven keyframe candidate sampling.

Anchor frames are placed at a fixed interval (default floor(T/4), clamped
to 1). Every other frame is scored against its segment's anchor by a
Gaussian-weighted feature difference; the Gaussian discounts frames near
the next anchor so the candidate set stays diverse. All member scores go
into one global queue and the top K-th percentile wins, anchors included
unconditionally.

Two baseline strategies ship alongside for ablation sweeps: "first_frame"
(frame 1 only) and "global" (anchor frames only).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderConfig, FeatureMap, encode
from .frames import FrameSequence

STRATEGIES = ("mds", "global", "first_frame")
DIFFERENCE_METRICS = ("cosine", "absdiff")


class SamplerError(ValueError):
    """Raised for invalid sampler configuration or inputs."""


def default_anchor_interval(t_count: int) -> int:
    return max(1, t_count // 4)


@dataclass(frozen=True)
class Segment:
    anchor: int
    members: tuple[int, ...]  # frames strictly after the anchor, in order

    @property
    def n(self) -> int:
        """Segment length counting the anchor as position j=1."""
        return len(self.members) + 1


@dataclass(frozen=True)
class AnchorSet:
    anchor_indices: tuple[int, ...]
    segments: tuple[Segment, ...]
    anchor_interval: int


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "mds"
    anchor_interval: int | None = None  # None -> floor(T/4), clamped to >= 1
    sigma: float | None = None  # None -> n/4 per segment
    percentile_k: float = 20.0  # top K percent of the score queue
    max_candidates: int = 16
    metric: str = "cosine"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SamplerError(f"unknown strategy {self.strategy!r}")
        if self.metric not in DIFFERENCE_METRICS:
            raise SamplerError(f"unknown difference metric {self.metric!r}")
        if not 0.0 < self.percentile_k <= 100.0:
            raise SamplerError("percentile_k must be in (0, 100]")
        if self.sigma is not None and self.sigma <= 0.0:
            raise SamplerError("sigma must be > 0")
        if self.anchor_interval is not None and self.anchor_interval < 1:
            raise SamplerError("anchor_interval must be >= 1")
        if self.max_candidates < 0:
            raise SamplerError("max_candidates must be >= 0")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "anchor_interval": self.anchor_interval,
            "sigma": self.sigma,
            "percentile_k": self.percentile_k,
            "max_candidates": self.max_candidates,
            "metric": self.metric,
            "encoder": self.encoder.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SamplerConfig":
        return cls(
            strategy=doc.get("strategy", "mds"),
            anchor_interval=doc.get("anchor_interval"),
            sigma=doc.get("sigma"),
            percentile_k=doc.get("percentile_k", 20.0),
            max_candidates=doc.get("max_candidates", 16),
            metric=doc.get("metric", "cosine"),
            encoder=EncoderConfig.from_dict(doc.get("encoder", {})),
        )


@dataclass(frozen=True)
class Candidate:
    t: int
    score: float | None  # None marks an anchor (unconditionally selected)
    anchor: bool


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[Candidate, ...]  # sorted by frame index

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(c.t for c in self.candidates)

    def to_json(self) -> str:
        return json.dumps(
            {
                "candidates": [
                    {"t": c.t, "score": c.score, "anchor": c.anchor}
                    for c in self.candidates
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CandidateSet":
        doc = json.loads(text)
        return cls(
            tuple(
                Candidate(d["t"], d["score"], d["anchor"])
                for d in doc["candidates"]
            )
        )


def place_anchors(t_count: int, interval: int) -> AnchorSet:
    """Anchors at 1, 1+interval, ...; members are the frames between anchors.

    The last segment runs through frame T. Segment-local position j counts
    the anchor as 1 and members as 2..n.
    """
    if t_count < 1:
        raise SamplerError("sequence length must be >= 1")
    if interval < 1:
        raise SamplerError("anchor interval must be >= 1")
    anchors = tuple(range(1, t_count + 1, interval))
    segments = []
    for i, anchor in enumerate(anchors):
        end = anchors[i + 1] - 1 if i + 1 < len(anchors) else t_count
        segments.append(Segment(anchor, tuple(range(anchor + 1, end + 1))))
    return AnchorSet(anchors, tuple(segments), interval)


def difference(fa: FeatureMap, fo: FeatureMap, metric: str = "cosine") -> float:
    """Feature-map difference; higher means more motion change.

    cosine: 1 - mean over grid cells of the cosine similarity between the
    cells' channel vectors (both-zero cells count as similarity 1, a single
    zero vector as 0); range [0, 2].
    absdiff: mean absolute difference over all grid values; range [0, 1].
    """
    if fa.values.shape != fo.values.shape:
        raise SamplerError(
            f"feature shape mismatch: {fa.values.shape} vs {fo.values.shape}"
        )
    if metric == "absdiff":
        return float(np.abs(fa.values - fo.values).mean())
    if metric != "cosine":
        raise SamplerError(f"unknown difference metric {metric!r}")
    a, b = fa.values, fo.values
    dot = (a * b).sum(axis=2)
    na = np.sqrt((a * a).sum(axis=2))
    nb = np.sqrt((b * b).sum(axis=2))
    denom = na * nb
    sim = np.where(
        (na == 0.0) & (nb == 0.0),
        1.0,
        np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0.0),
    )
    return float(1.0 - sim.mean())


def gaussian_weight(j: int, n: int, sigma: float) -> float:
    if sigma <= 0.0:
        raise SamplerError("sigma must be > 0")
    return math.exp(-((j - n / 2.0) ** 2) / (2.0 * sigma * sigma))


def score_segment(
    anchor_feat: FeatureMap,
    member_feats: list[FeatureMap],
    n: int,
    sigma: float,
    metric: str = "cosine",
) -> list[float]:
    """Gaussian-weighted anchor differences for members j = 2..n."""
    if sigma <= 0.0:
        raise SamplerError("sigma must be > 0")
    scores = []
    for pos, feat in enumerate(member_feats):
        j = pos + 2
        d = difference(anchor_feat, feat, metric)
        scores.append(gaussian_weight(j, n, sigma) * d)
    return scores


def select_from_scores(
    scored: list[tuple[int, float]], percentile_k: float, max_candidates: int
) -> list[int]:
    """Pick the top ceil(K% * queue size) frames by score, capped.

    Ties break toward the lower frame index, so selection is deterministic
    even on constant videos where every score is equal.
    """
    if not scored:
        return []
    take = min(math.ceil(percentile_k / 100.0 * len(scored)), max_candidates)
    ranked = sorted(scored, key=lambda sf: (-sf[1], sf[0]))
    return [t for t, _ in ranked[:take]]


def sample(seq: FrameSequence, cfg: SamplerConfig) -> CandidateSet:
    """Produce the keyframe candidate set for a sequence.

    Pure and deterministic: scores are assembled by frame index before
    selection, so any internal evaluation order yields the same output.
    """
    t_count = seq.length
    if cfg.strategy == "first_frame":
        return CandidateSet((Candidate(1, None, True),))

    interval = cfg.anchor_interval or default_anchor_interval(t_count)
    anchor_set = place_anchors(t_count, interval)
    if cfg.strategy == "global":
        return CandidateSet(
            tuple(Candidate(a, None, True) for a in anchor_set.anchor_indices)
        )

    feats = {t: encode(seq.frame(t), cfg.encoder) for t in range(1, t_count + 1)}
    scored: list[tuple[int, float]] = []
    for segment in anchor_set.segments:
        if not segment.members:
            continue
        sigma = cfg.sigma if cfg.sigma is not None else segment.n / 4.0
        member_feats = [feats[t] for t in segment.members]
        seg_scores = score_segment(
            feats[segment.anchor], member_feats, segment.n, sigma, cfg.metric
        )
        scored.extend(zip(segment.members, seg_scores))
    scored.sort(key=lambda sf: sf[0])
    chosen = set(select_from_scores(scored, cfg.percentile_k, cfg.max_candidates))
    score_by_t = dict(scored)

    entries = []
    anchor_ids = set(anchor_set.anchor_indices)
    for t in sorted(anchor_ids | chosen):
        if t in anchor_ids:
            entries.append(Candidate(t, None, True))
        else:
            entries.append(Candidate(t, score_by_t[t], False))
    return CandidateSet(tuple(entries))

"""Joint keyframe selection: fuse grounder and segmenter confidences.

Per-candidate fused score = a * s_grounder + (1 - a) * s_segmenter. The
candidate with the highest fused score becomes the keyframe; ties break
toward the lower frame index. Multi-keyframe selection (top-n) exists for
the ablation harness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class FusionError(ValueError):
    """Raised for malformed fusion inputs."""


class EmptyKeyMaskError(RuntimeError):
    """The chosen keyframe's mask is all background; caller should fall back."""

    def __init__(self, t: int):
        super().__init__(f"empty key mask at frame {t}")
        self.t = t


@dataclass(frozen=True)
class FusionConfig:
    a: float = 0.6  # weight on the grounder confidence

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise FusionError(f"a must be in [0, 1]: {self.a}")

    def to_dict(self) -> dict:
        return {"a": self.a}

    @classmethod
    def from_dict(cls, doc: dict) -> "FusionConfig":
        return cls(a=doc.get("a", 0.6))


@dataclass(frozen=True)
class ScoredCandidate:
    t: int
    s_grounder: float
    s_segmenter: float
    fused: float


@dataclass(frozen=True)
class KeyframeDecision:
    keyframes: tuple[int, ...]  # selected frame indices, best first
    scores: tuple[ScoredCandidate, ...]
    a: float
    runner_ups: tuple[int, ...]  # remaining candidates in rank order

    @property
    def key_t(self) -> int:
        return self.keyframes[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "key_t": self.key_t,
                "keyframes": list(self.keyframes),
                "scores": [
                    {
                        "t": s.t,
                        "s_mllm": s.s_grounder,
                        "s_sam": s.s_segmenter,
                        "fused": s.fused,
                    }
                    for s in self.scores
                ],
                "a": self.a,
            }
        )


def fuse(s_grounder: list[float], s_segmenter: list[float], cfg: FusionConfig) -> list[float]:
    """Affine score fusion, elementwise over aligned candidate lists."""
    if len(s_grounder) != len(s_segmenter):
        raise FusionError(
            f"length mismatch: {len(s_grounder)} grounder vs {len(s_segmenter)} segmenter scores"
        )
    for name, values in (("grounder", s_grounder), ("segmenter", s_segmenter)):
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise FusionError(f"{name} score out of range: {v}")
    a = cfg.a
    return [a * si + (1.0 - a) * sj for si, sj in zip(s_grounder, s_segmenter)]


def rank_candidates(candidate_ts: list[int], fused: list[float]) -> list[int]:
    """Candidates ordered by fused score, ties toward lower frame index."""
    if len(candidate_ts) != len(fused):
        raise FusionError("candidate/score length mismatch")
    if not candidate_ts:
        raise FusionError("empty candidate set")
    return [t for t, _ in sorted(zip(candidate_ts, fused), key=lambda tf: (-tf[1], tf[0]))]


def select(
    candidate_ts: list[int],
    fused: list[float],
    nonempty_mask_by_t: dict[int, bool],
    s_grounder: list[float],
    s_segmenter: list[float],
    a: float,
    n_keyframes: int = 1,
) -> KeyframeDecision:
    """Pick the top n_keyframes by fused score.

    Raises EmptyKeyMaskError when the winning frame's mask is all
    background; the pipeline promotes the runner-up and retries.
    """
    if n_keyframes < 1:
        raise FusionError("n_keyframes must be >= 1")
    ranked = rank_candidates(candidate_ts, fused)
    best = ranked[0]
    if not nonempty_mask_by_t.get(best, False):
        raise EmptyKeyMaskError(best)
    keyframes = tuple(ranked[: n_keyframes])
    scores = tuple(
        ScoredCandidate(t, sg, ss, fv)
        for t, sg, ss, fv in zip(candidate_ts, s_grounder, s_segmenter, fused)
    )
    return KeyframeDecision(keyframes, scores, a, tuple(ranked[n_keyframes:]))

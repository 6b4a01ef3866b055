"""End-to-end orchestration: sample -> ground -> segment -> fuse ->
memorize -> propagate.

Training-free by construction: nothing here updates weights; all
perception sits behind the backend role interfaces. Every intermediate
(candidates, per-frame confidences, fused scores, the decision, the
propagation plan) lands in the run manifest so a decision can be re-derived
offline. Timing data stays under manifest["timing"] so the rest of the
manifest is bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends.client import BackendEndpointConfig, build_backends
from .backends.schema import DEFAULT_PROMPT_TEMPLATE
from .backends.stubs import stub_backends_for_annotations
from .frames import FrameSequence, MaskSequence
from .fusion import EmptyKeyMaskError, FusionConfig, fuse, select
from .memory import MemoryBank, memorize
from .propagation import ownership_spans, plan, propagate, propagate_multi
from .sampler import CandidateSet, SamplerConfig, sample

MAX_KEYFRAME_FALLBACKS = 3


class NoViableKeyframeError(RuntimeError):
    """Every candidate keyframe (within the fallback budget) had an empty mask."""


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    backends: BackendEndpointConfig = field(default_factory=BackendEndpointConfig)
    prompt_template_path: str | None = None
    n_keyframes: int = 1
    ma_window: int = 5
    out_dir: str | None = None

    def prompt_template(self) -> str:
        if self.prompt_template_path:
            return Path(self.prompt_template_path).read_text()
        return DEFAULT_PROMPT_TEMPLATE

    def to_dict(self) -> dict:
        return {
            "sampler": self.sampler.to_dict(),
            "fusion": self.fusion.to_dict(),
            "backends": self.backends.to_dict(),
            "prompt_template": self.prompt_template_path,
            "n_keyframes": self.n_keyframes,
            "ma_window": self.ma_window,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        return cls(
            sampler=SamplerConfig.from_dict(doc.get("sampler", {})),
            fusion=FusionConfig.from_dict(doc.get("fusion", {})),
            backends=BackendEndpointConfig.from_dict(doc.get("backends", {})),
            prompt_template_path=doc.get("prompt_template"),
            n_keyframes=doc.get("n_keyframes", 1),
            ma_window=doc.get("ma_window", 5),
            out_dir=doc.get("out_dir"),
        )


def _candidate_images(seq: FrameSequence, candidates: CandidateSet):
    return [(t, seq.frame(t)) for t in candidates.indices]


def run_pipeline(
    seq: FrameSequence,
    query: str,
    cfg: PipelineConfig,
    backends=None,
    annotations: dict | None = None,
    gt_masks: MaskSequence | None = None,
    frame_paths: dict[int, str | Path] | None = None,
) -> tuple[MaskSequence, dict]:
    """Run the full pipeline on one sequence.

    backends: optional prebuilt (grounder, segmenter, tracker) trio;
    otherwise built from cfg.backends, with stub roles fed by annotations.
    """
    started = time.monotonic()
    if backends is None:
        backends = build_backends(
            cfg.backends,
            stub_factory=(
                (lambda: stub_backends_for_annotations(annotations, gt_masks))
                if annotations is not None
                else None
            ),
            frame_paths=frame_paths,
        )
    grounder, segmenter, tracker = backends

    candidates = sample(seq, cfg.sampler)
    frames = _candidate_images(seq, candidates)
    prompt = cfg.prompt_template().replace("{query}", query)

    grounding = grounder.ground(frames, query, prompt)
    segmentation = segmenter.segment(frames, grounding)

    candidate_ts = list(candidates.indices)
    s_grounder = [grounding.frame(t).confidence for t in candidate_ts]
    s_segmenter = [segmentation.frame(t).frame_score for t in candidate_ts]
    fused = fuse(s_grounder, s_segmenter, cfg.fusion)

    def key_mask_for(t: int) -> np.ndarray:
        from .backends.schema import merge_layers

        segf = segmentation.frame(t)
        return merge_layers(seq.height, seq.width, segf.layers)

    nonempty = {t: bool(key_mask_for(t).any()) for t in candidate_ts}

    # Empty-mask keyframes are rejected and the runner-up promoted, up to
    # MAX_KEYFRAME_FALLBACKS times; one bad keyframe must not sink the run.
    fallbacks: list[int] = []
    pool_ts, pool_g, pool_s, pool_f = candidate_ts, s_grounder, s_segmenter, fused
    decision = None
    while True:
        try:
            decision = select(
                pool_ts, pool_f, nonempty, pool_g, pool_s, cfg.fusion.a, cfg.n_keyframes
            )
            break
        except EmptyKeyMaskError as e:
            fallbacks.append(e.t)
            if len(fallbacks) > MAX_KEYFRAME_FALLBACKS:
                raise NoViableKeyframeError(
                    f"no viable keyframe: {fallbacks} all had empty masks"
                ) from e
            keep = [i for i, t in enumerate(pool_ts) if t != e.t]
            if not keep:
                raise NoViableKeyframeError("no viable keyframe: candidates exhausted") from e
            pool_ts = [pool_ts[i] for i in keep]
            pool_g = [pool_g[i] for i in keep]
            pool_s = [pool_s[i] for i in keep]
            pool_f = [pool_f[i] for i in keep]

    keyframes = [t for t in decision.keyframes if nonempty.get(t, False)]
    key_t = decision.key_t
    key_masks = {t: key_mask_for(t) for t in keyframes}

    bank = MemoryBank()
    for entry in memorize(seq.frame(key_t), key_t, key_masks[key_t], cfg.sampler.encoder):
        bank.insert(entry)
    bank_before = bank.snapshot()

    latencies: dict[int, float] = {}
    if len(keyframes) == 1:
        masks = propagate(seq, key_t, key_masks[key_t], tracker, latencies)
        plan_doc = {
            "key": key_t,
            "forward": list(plan(seq.length, key_t).forward),
            "backward": list(plan(seq.length, key_t).backward),
        }
    else:
        masks = propagate_multi(seq, keyframes, key_masks, tracker)
        spans = ownership_spans(seq.length, keyframes)
        plan_doc = {
            "keys": sorted(keyframes),
            "spans": {str(k): list(spans[k]) for k in sorted(keyframes)},
            "merge_rule": "nearest keyframe, ties to lower index",
        }

    assert bank.snapshot() == bank_before  # ledger is append-only during a run

    flags = []
    if max(fused) == 0.0:
        flags.append("low-confidence run")

    manifest = {
        "version": 1,
        "sequence": seq.sequence_id,
        "t_count": seq.length,
        "query": query,
        "config": cfg.to_dict(),
        "candidates": [
            {"t": c.t, "score": c.score, "anchor": c.anchor} for c in candidates.candidates
        ],
        "grounding": [
            {
                "t": f.t,
                "confidence": f.confidence,
                "reasoning": f.reasoning,
                "objects": [
                    {
                        "id": o.object_id,
                        "label": o.label,
                        "box": list(o.box) if o.box else None,
                        "present": o.present,
                    }
                    for o in f.objects
                ],
            }
            for f in grounding.frames
        ],
        "segmentation": [
            {
                "t": f.t,
                "frame_score": f.frame_score,
                "iou": [{"id": oid, "score": f.iou[oid]} for oid in sorted(f.iou)],
            }
            for f in segmentation.frames
        ],
        "fusion": {
            "a": cfg.fusion.a,
            "scores": [
                {"t": s.t, "s_mllm": s.s_grounder, "s_sam": s.s_segmenter, "fused": s.fused}
                for s in decision.scores
            ],
        },
        "decision": {
            "key_t": key_t,
            "keyframes": keyframes,
            "runner_ups": list(decision.runner_ups),
            "fallbacks": fallbacks,
        },
        "plan": plan_doc,
        "memory": [
            {
                "t": e.source_t,
                "id": e.object_id,
                "box": list(e.box),
                "area": e.area,
                "descriptor_len": len(e.descriptor),
            }
            for e in bank_before
        ],
        "backends": cfg.backends.to_dict(),
        "flags": flags,
        "timing": {
            "total_s": time.monotonic() - started,
            "tracker_latency_s": {str(t): latencies[t] for t in sorted(latencies)},
        },
    }
    return masks, manifest

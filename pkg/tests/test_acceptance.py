"""Acceptance suite: one test per shipping criterion, stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion.
"""

from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from sdam.ablation import build_default_corpus, render_table, sweep_strategies
from sdam.backends.server import StubBackendServer
from sdam.backends.client import HttpGrounder, HttpSegmenter, HttpTracker
from sdam.backends.stubs import stub_backends_for_annotations
from sdam.encoder import EncoderConfig
from sdam.frames import mask_to_png_bytes
from sdam.fusion import FusionConfig, fuse, rank_candidates
from sdam.metrics import (
    boundary_f,
    default_tolerance,
    evaluate,
    jaccard,
    stability_trend,
)
from sdam.pipeline import PipelineConfig, run_pipeline
from sdam.propagation import plan, propagate
from sdam.sampler import SamplerConfig, gaussian_weight, sample
from sdam.synth import ObjectSpec, SceneEvent, SyntheticScene, render_synthetic
from oracles import naive_boundary_f, naive_moving_average, naive_sample

GRID8 = EncoderConfig(grid_h=8, grid_w=8)


def _pass(name: str):
    print(f"ACCEPTANCE PASS: {name}")


# ---------------------------------------------------------------------------
# shared fixtures


def _e2e_scene():
    # Moving rectangle, hidden for the first 39 frames, teleports into view
    # at frame 40, then drifts right: the event splits the sequence and the
    # visibility confidence pins the keyframe to the post-event side.
    return SyntheticScene(
        width=128,
        height=128,
        frame_count=100,
        objects=(
            ObjectSpec(
                1, (16, 16), (200, 40, 40), (2, 30), velocity=(1, 0),
                visible_at_start=False,
                events=(SceneEvent(40, "teleport", (50, 60)), SceneEvent(40, "show")),
            ),
        ),
        name="e2e",
    )


@pytest.fixture(scope="module")
def e2e_bundle():
    frames, gt, ann = render_synthetic(_e2e_scene(), seed=11)
    return frames, gt, ann


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    build_default_corpus(root, seed=0)
    return root


# ---------------------------------------------------------------------------
# criterion: sampler equals an independent brute-force implementation


def _random_scene(seed: int) -> SyntheticScene:
    rng = np.random.default_rng(seed)
    t_count = int(rng.integers(4, 65))
    objs = []
    for oid in range(1, int(rng.integers(1, 3)) + 1):
        objs.append(
            ObjectSpec(
                oid,
                (int(rng.integers(3, 7)), int(rng.integers(3, 7))),
                (
                    int(rng.integers(80, 256)),
                    int(rng.integers(0, 100)),
                    int(rng.integers(0, 256)),
                ),
                (int(rng.integers(0, 10)), int(rng.integers(0, 10))),
                velocity=(int(rng.integers(-2, 3)), int(rng.integers(-2, 3))),
            )
        )
    return SyntheticScene(width=16, height=16, frame_count=t_count, objects=tuple(objs))


def test_sampler_oracle_equivalence_100_trials():
    started = time.monotonic()
    for seed in range(100):
        frames, _, _ = render_synthetic(_random_scene(seed), seed=seed)
        interval = max(1, frames.length // 4)
        cfg = SamplerConfig(anchor_interval=interval, encoder=GRID8)
        got = list(sample(frames, cfg).indices)
        want = naive_sample(
            [frames.frame(t) for t in range(1, frames.length + 1)],
            8, 8, interval, cfg.percentile_k, cfg.max_candidates,
        )
        assert got == want, f"seed {seed}: {got} != {want}"
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"100 trials took {elapsed:.2f}s"
    _pass(f"sampler oracle equivalence, 100 seeded trials in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# criterion: weighted-score point check


def test_weighted_score_point_check():
    got = gaussian_weight(2, 8, 2.0) * 0.5
    want = 0.5 * math.exp(-0.5)
    assert abs(got - want) < 1e-12
    _pass("gaussian-weighted score point check (n=8, sigma=2, j=2, D=0.5)")


# ---------------------------------------------------------------------------
# criterion: fusion correctness


def test_fusion_correctness():
    got = fuse([0.8, 0.6], [0.4, 0.9], FusionConfig(a=0.75))
    # Binary floats land within 1 ulp of the decimal targets.
    for g, want in zip(got, [0.7, 0.675]):
        assert abs(g - want) <= math.ulp(want), (g, want)

    s1 = [0.8, 0.6, 0.37]
    s2 = [0.4, 0.9, 0.22]
    assert fuse(s1, s2, FusionConfig(a=1.0)) == s1
    assert fuse(s1, s2, FusionConfig(a=0.0)) == s2

    rng = np.random.default_rng(23)
    ts = list(range(1, 13))
    scores = rng.random(12).tolist()
    base_key = rank_candidates(ts, scores)[0]
    for trial in range(1000):
        kind = trial % 3
        a = float(rng.uniform(0.05, 4.0))
        b = float(rng.uniform(-2.0, 2.0))
        if kind == 0:
            f = lambda s: a * s + b
        elif kind == 1:
            f = lambda s: math.tanh(a * s) + b
        else:
            f = lambda s: math.exp(a * s) + b
        assert rank_candidates(ts, [f(s) for s in scores])[0] == base_key
    _pass("fusion point values, boundary reduction, argmax invariance x1000")


# ---------------------------------------------------------------------------
# criterion: end-to-end synthetic run


def test_end_to_end_synthetic_run(e2e_bundle):
    frames, gt, ann = e2e_bundle
    cfg = PipelineConfig()
    started = time.monotonic()
    runs = []
    for _ in range(2):
        backends = stub_backends_for_annotations(ann, gt)
        masks, manifest = run_pipeline(frames, "object 1", cfg, backends=backends)
        runs.append((masks, manifest))
    elapsed = time.monotonic() - started

    masks, manifest = runs[0]
    report = evaluate(masks, gt, object_ids=[1])
    worst = min(min(v) for v in report.per_frame_j.values())
    assert worst >= 0.99, f"worst per-frame J {worst}"

    key_t = manifest["decision"]["key_t"]
    assert 40 <= key_t <= 50, f"keyframe {key_t} outside the post-event segment"

    assert elapsed < 10.0, f"two runs took {elapsed:.2f}s"

    m0 = {k: v for k, v in runs[0][1].items() if k != "timing"}
    m1 = {k: v for k, v in runs[1][1].items() if k != "timing"}
    assert json.dumps(m0, sort_keys=True) == json.dumps(m1, sort_keys=True)
    for a, b in zip(runs[0][0].masks, runs[1][0].masks):
        assert np.array_equal(a, b)
        assert mask_to_png_bytes(a) == mask_to_png_bytes(b)
    _pass(
        f"end-to-end run: min per-frame J={worst:.3f}, key={key_t}, "
        f"{elapsed:.2f}s for two bit-identical runs"
    )


# ---------------------------------------------------------------------------
# criterion: propagation plan


class _NullTracker:
    """Minimal protocol-conformant tracker; emits empty masks."""

    def __init__(self):
        self.init_calls = 0
        self._sessions = {}

    def init(self, t, image, mask, direction):
        self.init_calls += 1
        sid = f"s{self.init_calls}"
        self._sessions[sid] = (direction, t)
        from sdam.backends.schema import TrackerSession

        return TrackerSession(sid, direction, t)

    def step(self, session, t, image):
        return np.zeros(image.shape[:2], dtype=np.uint8)


def test_propagation_plan_everywhere():
    img = np.full((8, 8, 3), 120, dtype=np.uint8)
    key_mask = np.zeros((8, 8), dtype=np.uint8)
    key_mask[2:5, 2:5] = 1
    from sdam.frames import FrameSequence

    for t_count in range(1, 21):
        seq = FrameSequence(tuple(img.copy() for _ in range(t_count)), "p")
        for key in range(1, t_count + 1):
            p = plan(t_count, key)
            assert sorted((*p.forward, key, *p.backward)) == list(range(1, t_count + 1))
            tracker = _NullTracker()
            out = propagate(seq, key, key_mask, tracker)
            assert np.array_equal(out.mask(key), key_mask)
            expected_sessions = int(bool(p.forward)) + int(bool(p.backward))
            assert tracker.init_calls == expected_sessions
            if key in (1, t_count) and t_count > 1:
                assert tracker.init_calls == 1
    _pass("propagation plan: partition, verbatim key mask, session counts (T<=20)")


# ---------------------------------------------------------------------------
# criterion: metrics oracle


def test_metrics_oracle():
    def square(at, size=10, canvas=(20, 20)):
        m = np.zeros(canvas, dtype=np.uint8)
        m[at[0] : at[0] + size, at[1] : at[1] + size] = 1
        return m

    assert jaccard(square((0, 0)), square((0, 0)), 1) == 1.0
    a = square((0, 0), 5)
    b = square((10, 10), 5)
    assert jaccard(a, b, 1) == 0.0
    assert jaccard(square((0, 0)), square((0, 5)), 1) == pytest.approx(1 / 3)

    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        pred = (rng.random((32, 32)) < 0.35).astype(np.uint8)
        gt = (rng.random((32, 32)) < 0.35).astype(np.uint8)
        tol = default_tolerance(32, 32)
        got = boundary_f(pred, gt, 1, tol)
        want = naive_boundary_f(pred == 1, gt == 1, tol)
        assert abs(got - want) < 1e-9, f"seed {seed}"

    rng = np.random.default_rng(77)
    for _ in range(5):
        series = rng.random(21).tolist()
        got = stability_trend(series, 5)
        want = naive_moving_average(series, 5)
        assert got == pytest.approx(want, abs=1e-12)
    _pass("metrics: jaccard analytic cases, boundary-F oracle x10, trend x5")


# ---------------------------------------------------------------------------
# criterion: ablation ordering


def test_ablation_strategy_ordering(corpus):
    rows = sweep_strategies(sorted(corpus.iterdir()), PipelineConfig())
    table = render_table("sampling strategy", rows)
    print(table)
    by_label = {r["label"]: r["J&F"] for r in rows}
    assert by_label["mds"] >= by_label["global"] >= by_label["first_frame"]
    assert by_label["mds"] > by_label["first_frame"]  # strict separation overall
    _pass(
        "ablation ordering mds/global/first_frame = "
        f"{by_label['mds']:.3f}/{by_label['global']:.3f}/{by_label['first_frame']:.3f}"
    )


# ---------------------------------------------------------------------------
# criterion: wire-schema conformance


def test_wire_schema_conformance(e2e_bundle):
    frames, gt, ann = e2e_bundle
    cfg = PipelineConfig()

    local = stub_backends_for_annotations(ann, gt)
    masks_local, manifest_local = run_pipeline(frames, "object 1", cfg, backends=local)

    g, s, t = stub_backends_for_annotations(ann, gt)
    with StubBackendServer(g, s, t) as server:
        remote = (
            HttpGrounder(server.url),
            HttpSegmenter(server.url),
            HttpTracker(server.url),
        )
        masks_remote, manifest_remote = run_pipeline(frames, "object 1", cfg, backends=remote)

    assert manifest_local["decision"] == manifest_remote["decision"]
    for a, b in zip(masks_local.masks, masks_remote.masks):
        assert np.array_equal(a, b)
        assert mask_to_png_bytes(a) == mask_to_png_bytes(b)
    _pass("wire-schema conformance: loopback run byte-identical to in-process")

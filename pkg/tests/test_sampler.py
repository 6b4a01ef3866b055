from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdam.encoder import EncoderConfig, FeatureMap, encode
from sdam.frames import FrameSequence
from sdam.sampler import (
    CandidateSet,
    SamplerConfig,
    SamplerError,
    difference,
    gaussian_weight,
    place_anchors,
    sample,
    score_segment,
    select_from_scores,
)
from sdam.synth import ObjectSpec, SyntheticScene, render_synthetic
from oracles import naive_difference, naive_sample

GRID8 = EncoderConfig(grid_h=8, grid_w=8)


# ---------------------------------------------------------------------------
# place_anchors


def test_anchor_placement_basic():
    a = place_anchors(16, 4)
    assert a.anchor_indices == (1, 5, 9, 13)
    assert a.segments[0].members == (2, 3, 4)
    assert a.segments[-1].members == (14, 15, 16)


def test_anchor_placement_degenerate():
    a = place_anchors(1, 1)
    assert a.anchor_indices == (1,)
    assert a.segments[0].members == ()


def test_anchor_placement_remainder_segment():
    a = place_anchors(10, 2)
    assert a.anchor_indices == (1, 3, 5, 7, 9)
    assert a.segments[-1].members == (10,)


@given(st.integers(1, 200), st.integers(1, 50))
def test_anchor_segments_partition(t_count, interval):
    a = place_anchors(t_count, interval)
    covered = []
    for seg in a.segments:
        covered.append(seg.anchor)
        covered.extend(seg.members)
    assert sorted(covered) == list(range(1, t_count + 1))
    assert a.anchor_indices[0] == 1
    assert all(x < y for x, y in zip(a.anchor_indices, a.anchor_indices[1:]))


# ---------------------------------------------------------------------------
# difference


def _fm(arr) -> FeatureMap:
    return FeatureMap(np.asarray(arr, dtype=np.float64))


def test_difference_identity_zero():
    rng = np.random.default_rng(0)
    f = _fm(rng.random((4, 4, 3)))
    assert difference(f, f) == pytest.approx(0.0, abs=1e-12)


def test_difference_orthogonal_cells():
    a = np.zeros((2, 2, 2))
    b = np.zeros((2, 2, 2))
    a[:, :, 0] = 1.0
    b[:, :, 1] = 1.0
    assert difference(_fm(a), _fm(b)) == pytest.approx(1.0, abs=1e-12)


def test_difference_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(5):
        a, b = rng.random((4, 4, 3)), rng.random((4, 4, 3))
        got = difference(_fm(a), _fm(b))
        want = naive_difference(a.tolist(), b.tolist())
        assert got == pytest.approx(want, abs=1e-12)
        assert 0.0 <= got <= 2.0


def test_difference_zero_vector_conventions():
    a = np.zeros((1, 2, 3))
    b = np.zeros((1, 2, 3))
    b[0, 1, 0] = 1.0  # one cell both-zero, one cell single-zero
    assert difference(_fm(a), _fm(b)) == pytest.approx(0.5, abs=1e-12)


def test_difference_shape_mismatch():
    with pytest.raises(SamplerError, match="shape mismatch"):
        difference(_fm(np.zeros((2, 2, 3))), _fm(np.zeros((2, 3, 3))))


# ---------------------------------------------------------------------------
# score_segment (the weighted-score formula)


def test_score_peak_at_segment_center():
    # j = n/2 puts the Gaussian at its peak: score equals the raw difference.
    assert gaussian_weight(4, 8, 2.0) == pytest.approx(1.0, abs=1e-15)


def test_score_zero_difference_zero_scores():
    f = _fm(np.zeros((2, 2, 3)))
    assert score_segment(f, [f, f, f], 4, 1.0) == [0.0, 0.0, 0.0]


def test_score_point_check_against_direct_evaluation():
    # n=8, sigma=2, j=2, D=0.5 -> 0.5 * exp(-0.5), checked to 1e-12.
    anchor = _fm(np.array([[[1.0, 0.0]]]))
    # Member at 60 degrees from the anchor: cosine 0.5, so D = 0.5 exactly.
    member = _fm(np.array([[[0.5, math.sqrt(3) / 2]]]))
    got = score_segment(anchor, [member], 8, 2.0)[0]
    want = math.exp(-((2 - 8 / 2.0) ** 2) / (2.0 * 2.0**2)) * 0.5
    assert got == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(0.5 * math.exp(-0.5), abs=1e-15)


def test_score_requires_positive_sigma():
    f = _fm(np.zeros((1, 1, 2)))
    with pytest.raises(SamplerError, match="sigma"):
        score_segment(f, [f], 4, 0.0)


# ---------------------------------------------------------------------------
# selection


def test_selection_constant_video_tie_break():
    scored = [(t, 0.0) for t in range(2, 18)]  # 16 equal scores
    take = math.ceil(0.2 * 16)
    assert select_from_scores(scored, 20.0, 16) == list(range(2, 2 + take))


@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=40),
    st.integers(0, 39),
    st.floats(1, 100),
)
@settings(max_examples=80)
def test_selection_monotone_in_score(scores, bump_idx, k):
    scored = [(t + 1, s) for t, s in enumerate(scores)]
    chosen = set(select_from_scores(scored, k, 16))
    idx = bump_idx % len(scores)
    t_bumped = idx + 1
    if t_bumped not in chosen:
        return
    raised = [(t, s + 0.5 if t == t_bumped else s) for t, s in scored]
    assert t_bumped in set(select_from_scores(raised, k, 16))


# ---------------------------------------------------------------------------
# sample end to end


def _random_scene_frames(seed: int):
    rng = np.random.default_rng(seed)
    t_count = int(rng.integers(4, 65))
    objs = []
    for oid in range(1, int(rng.integers(1, 3)) + 1):
        objs.append(
            ObjectSpec(
                oid,
                (int(rng.integers(3, 7)), int(rng.integers(3, 7))),
                (int(rng.integers(80, 256)), int(rng.integers(0, 100)), int(rng.integers(0, 256))),
                (int(rng.integers(0, 10)), int(rng.integers(0, 10))),
                velocity=(int(rng.integers(-2, 3)), int(rng.integers(-2, 3))),
            )
        )
    scene = SyntheticScene(width=16, height=16, frame_count=t_count, objects=tuple(objs))
    frames, _, _ = render_synthetic(scene, seed=seed)
    return frames


def test_sample_matches_bruteforce_oracle():
    for seed in range(5):
        frames = _random_scene_frames(seed)
        interval = max(1, frames.length // 4)
        cfg = SamplerConfig(anchor_interval=interval, encoder=GRID8)
        got = sample(frames, cfg).indices
        want = naive_sample(
            [frames.frame(t) for t in range(1, frames.length + 1)],
            8, 8, interval, 20.0, 16,
        )
        assert list(got) == want, f"seed {seed}"


def test_sample_teleport_candidate(teleport_scene):
    frames, _, _ = teleport_scene
    cfg = SamplerConfig(anchor_interval=4, encoder=GRID8)
    got = sample(frames, cfg)
    assert 9 in got.indices or 10 in got.indices
    assert set(got.indices) >= {1, 5, 9, 13}  # anchors always present


def test_sample_every_frame_anchor():
    frames = _random_scene_frames(42)
    cfg = SamplerConfig(anchor_interval=1, encoder=GRID8)
    got = sample(frames, cfg)
    assert got.indices == tuple(range(1, frames.length + 1))
    assert all(c.anchor for c in got.candidates)


def test_sample_constant_video_degenerates_to_tiebreak():
    img = np.full((16, 16, 3), 99, dtype=np.uint8)
    frames = FrameSequence(tuple(img.copy() for _ in range(20)), "const")
    cfg = SamplerConfig(anchor_interval=5, encoder=GRID8)
    got = sample(frames, cfg)
    anchors = {1, 6, 11, 16}
    non_anchor_count = 20 - len(anchors)
    take = math.ceil(0.2 * non_anchor_count)
    earliest = []
    t = 1
    while len(earliest) < take:
        t += 1
        if t not in anchors:
            earliest.append(t)
    assert set(got.indices) == anchors | set(earliest)


def test_sample_strategies():
    frames = _random_scene_frames(7)
    first = sample(frames, SamplerConfig(strategy="first_frame", encoder=GRID8))
    assert first.indices == (1,)
    glob = sample(frames, SamplerConfig(strategy="global", anchor_interval=4, encoder=GRID8))
    assert glob.indices == tuple(range(1, frames.length + 1, 4))


def test_sample_deterministic(teleport_scene):
    frames, _, _ = teleport_scene
    cfg = SamplerConfig(anchor_interval=4, encoder=GRID8)
    a = sample(frames, cfg)
    b = sample(frames, cfg)
    assert a == b


def test_sample_indices_sorted_unique_in_range(teleport_scene):
    frames, _, _ = teleport_scene
    got = sample(frames, SamplerConfig(anchor_interval=3, encoder=GRID8))
    idx = got.indices
    assert list(idx) == sorted(set(idx))
    assert all(1 <= t <= frames.length for t in idx)
    assert len(idx) <= 16 + len(place_anchors(frames.length, 3).anchor_indices)


def test_candidate_json_roundtrip(teleport_scene):
    frames, _, _ = teleport_scene
    got = sample(frames, SamplerConfig(anchor_interval=4, encoder=GRID8))
    again = CandidateSet.from_json(got.to_json())
    assert again == got
    assert '"anchor":' in got.to_json().replace(" ", "")


def test_config_validation():
    with pytest.raises(SamplerError):
        SamplerConfig(percentile_k=0.0)
    with pytest.raises(SamplerError):
        SamplerConfig(sigma=-1.0)
    with pytest.raises(SamplerError):
        SamplerConfig(strategy="stratified")

from __future__ import annotations

import numpy as np
import pytest

from sdam_adapters.tracker import build_tracker
from sdam_adapters.wire import AdapterError
from conftest import make_clip


def _mask_for(clip_frame, color=(200, 40, 40), object_id=1):
    layer = (clip_frame == np.array(color, dtype=np.uint8)).all(axis=2)
    return np.where(layer, np.uint8(object_id), np.uint8(0))


def test_init_plus_steps_yields_all_masks(clip):
    tracker = build_tracker("classical")
    session = tracker.init(1, clip[0], _mask_for(clip[0]), "backward")
    masks = [tracker.step(session, t, clip[t - 1]) for t in range(2, 11)]
    assert len(masks) == 10 - 1
    for i, m in enumerate(masks):
        assert set(np.unique(m)) == {0, 1}, f"step {i}: ids not preserved"
        assert (m == 1).sum() == 144


def test_tracking_follows_motion(clip):
    tracker = build_tracker("classical")
    session = tracker.init(1, clip[0], _mask_for(clip[0]), "backward")
    for t in range(2, 11):
        out = tracker.step(session, t, clip[t - 1])
        assert np.array_equal(out, _mask_for(clip[t - 1])), f"frame {t}"


def test_forward_direction_decrements(clip):
    tracker = build_tracker("classical")
    session = tracker.init(5, clip[4], _mask_for(clip[4]), "forward")
    out = tracker.step(session, 4, clip[3])
    assert np.array_equal(out, _mask_for(clip[3]))
    with pytest.raises(AdapterError, match="out-of-order"):
        tracker.step(session, 4, clip[3])


def test_empty_mask_rejected(clip):
    tracker = build_tracker("classical")
    with pytest.raises(AdapterError, match="no objects"):
        tracker.init(1, clip[0], np.zeros(clip[0].shape[:2], dtype=np.uint8), "forward")


def test_unknown_session(clip):
    tracker = build_tracker("classical")
    with pytest.raises(AdapterError, match="unknown session"):
        tracker.step("nope", 2, clip[1])


def test_lost_object_emits_empty_and_reacquires():
    frames = make_clip(t_count=6, velocity=(0, 0), seed=8)
    # Object vanishes in frames 3-4, reappears in place afterwards.
    blank = make_clip(t_count=1, velocity=(0, 0), seed=8)[0].copy()
    blank[30:42, 10:22] = 100  # overwrite with background-ish gray
    frames[2] = blank
    frames[3] = blank.copy()
    tracker = build_tracker("classical")
    session = tracker.init(1, frames[0], _mask_for(frames[0]), "backward")
    out2 = tracker.step(session, 2, frames[1])
    assert (out2 == 1).sum() == 144
    out3 = tracker.step(session, 3, frames[2])
    assert not out3.any()
    out4 = tracker.step(session, 4, frames[3])
    assert not out4.any()
    out5 = tracker.step(session, 5, frames[4])
    assert (out5 == 1).sum() == 144


def test_sessions_isolated_interleaved():
    clip_a = make_clip(seed=5)
    clip_b = make_clip(rect=((40, 80, 200), (10, 10)), start=(60, 50), velocity=(-2, 1), seed=6)
    tracker = build_tracker("classical")
    sa = tracker.init(1, clip_a[0], _mask_for(clip_a[0]), "backward")
    sb = tracker.init(1, clip_b[0], _mask_for(clip_b[0], color=(40, 80, 200)), "backward")
    for t in range(2, 11):
        out_b = tracker.step(sb, t, clip_b[t - 1])
        out_a = tracker.step(sa, t, clip_a[t - 1])
        assert np.array_equal(out_a, _mask_for(clip_a[t - 1]))
        assert np.array_equal(out_b, _mask_for(clip_b[t - 1], color=(40, 80, 200)))


def test_two_objects_ids_preserved():
    frames = make_clip(t_count=5, seed=7)
    for f in frames:
        f[70:80, 70:82] = (40, 80, 200)
    mask = _mask_for(frames[0])
    mask[70:80, 70:82] = 2
    tracker = build_tracker("classical")
    session = tracker.init(1, frames[0], mask, "backward")
    for t in range(2, 6):
        out = tracker.step(session, t, frames[t - 1])
        assert set(np.unique(out)) == {0, 1, 2}
        assert (out == 2).sum() == 120

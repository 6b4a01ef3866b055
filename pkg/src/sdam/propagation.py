"""Bidirectional mask propagation from the keyframe.

The sequence splits at the keyframe: the forward leg walks key-1 down to
1, the backward leg key+1 up to T; the keyframe itself emits its mask
verbatim. Each leg runs an independent tracker session initialized from
the same (keyframe image, keyframe mask), so the two directions are
causally isolated and the output is deterministic regardless of leg
scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends.errors import BackendError
from .frames import FrameSequence, MaskSequence


class PropagationError(RuntimeError):
    """Tracker failure mid-leg; carries the last completed frame index."""

    def __init__(self, message: str, last_completed: int | None):
        super().__init__(message)
        self.last_completed = last_completed


@dataclass(frozen=True)
class PropagationPlan:
    key: int
    forward: tuple[int, ...]  # key-1 .. 1
    backward: tuple[int, ...]  # key+1 .. T


def plan(t_count: int, key: int) -> PropagationPlan:
    if not 1 <= key <= t_count:
        raise ValueError(f"key {key} outside [1, {t_count}]")
    return PropagationPlan(
        key=key,
        forward=tuple(range(key - 1, 0, -1)),
        backward=tuple(range(key + 1, t_count + 1)),
    )


def _run_leg(
    seq: FrameSequence,
    key: int,
    key_mask: np.ndarray,
    leg: tuple[int, ...],
    direction: str,
    tracker,
    out: dict[int, np.ndarray],
    latencies: dict[int, float] | None = None,
) -> None:
    if not leg:
        return
    import time

    last_completed = key
    try:
        session = tracker.init(key, seq.frame(key), key_mask, direction)
        for t in leg:
            t0 = time.monotonic()
            out[t] = tracker.step(session, t, seq.frame(t))
            if latencies is not None:
                latencies[t] = time.monotonic() - t0
            last_completed = t
    except BackendError as e:
        raise PropagationError(
            f"tracker failed on {direction} leg after frame {last_completed}: {e}",
            last_completed,
        ) from e


def propagate(
    seq: FrameSequence,
    key: int,
    key_mask: np.ndarray,
    tracker,
    latencies: dict[int, float] | None = None,
) -> MaskSequence:
    """Propagate the keyframe mask across the whole sequence.

    One tracker session per nonempty leg; the keyframe's own output is
    key_mask bit-exactly, never a re-prediction.
    """
    p = plan(seq.length, key)
    out: dict[int, np.ndarray] = {key: key_mask.copy()}
    _run_leg(seq, key, key_mask, p.forward, "forward", tracker, out, latencies)
    _run_leg(seq, key, key_mask, p.backward, "backward", tracker, out, latencies)
    masks = tuple(out[t] for t in range(1, seq.length + 1))
    n = max((int(m.max()) for m in masks), default=0)
    return MaskSequence(masks, max(n, 1))


def ownership_spans(t_count: int, keys: list[int]) -> dict[int, tuple[int, int]]:
    """Nearest-keyframe ownership; distance ties go to the lower keyframe."""
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate keys")
    ordered = sorted(keys)
    spans = {}
    for i, k in enumerate(ordered):
        lo = 1 if i == 0 else spans[ordered[i - 1]][1] + 1
        if i + 1 < len(ordered):
            # Last frame at distance <= the next key's distance.
            hi = (k + ordered[i + 1]) // 2
        else:
            hi = t_count
        spans[k] = (lo, hi)
    return spans


def propagate_multi(
    seq: FrameSequence,
    keys: list[int],
    key_masks: dict[int, np.ndarray],
    tracker,
) -> MaskSequence:
    """Multi-keyframe variant for the keyframe-count ablation.

    Each frame is owned by its nearest keyframe (ties toward the lower
    index); each keyframe propagates only within its owned span. Reduces
    to propagate() for a single key.
    """
    for k in keys:
        if not 1 <= k <= seq.length:
            raise ValueError(f"key {k} outside [1, {seq.length}]")
    spans = ownership_spans(seq.length, keys)
    out: dict[int, np.ndarray] = {}
    for k in sorted(keys):
        lo, hi = spans[k]
        key_mask = key_masks[k]
        out[k] = key_mask.copy()
        forward = tuple(range(k - 1, lo - 1, -1))
        backward = tuple(range(k + 1, hi + 1))
        _run_leg(seq, k, key_mask, forward, "forward", tracker, out)
        _run_leg(seq, k, key_mask, backward, "backward", tracker, out)
    masks = tuple(out[t] for t in range(1, seq.length + 1))
    n = max((int(m.max()) for m in masks), default=0)
    return MaskSequence(masks, max(n, 1))

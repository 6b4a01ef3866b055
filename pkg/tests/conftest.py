from __future__ import annotations

import numpy as np
import pytest

from sdam.synth import ObjectSpec, SceneEvent, SyntheticScene, render_synthetic


def make_scene(**kw) -> SyntheticScene:
    defaults = dict(
        width=32,
        height=32,
        frame_count=8,
        objects=(ObjectSpec(1, (10, 10), (200, 40, 40), (4, 4)),),
        name="test",
    )
    defaults.update(kw)
    return SyntheticScene(**defaults)


@pytest.fixture
def static_scene():
    return render_synthetic(make_scene(), seed=3)


@pytest.fixture
def moving_scene():
    scene = make_scene(
        width=64,
        height=64,
        frame_count=12,
        objects=(ObjectSpec(1, (10, 10), (200, 40, 40), (4, 20), velocity=(2, 0)),),
    )
    return render_synthetic(scene, seed=5)


@pytest.fixture
def teleport_scene():
    scene = make_scene(
        frame_count=16,
        objects=(
            ObjectSpec(
                1, (8, 8), (200, 40, 40), (2, 2), velocity=(1, 0),
                events=(SceneEvent(9, "teleport", (20, 20)),),
            ),
        ),
    )
    return render_synthetic(scene, seed=7)


def random_image(rng: np.random.Generator, h=16, w=16) -> np.ndarray:
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)

"""The documented wire contract, checked over live HTTP for all 3 roles."""

from __future__ import annotations

import numpy as np
import pytest
import requests

from sdam_adapters.grounder import build_grounder
from sdam_adapters.segmenter import build_segmenter
from sdam_adapters.server import AdapterServer
from sdam_adapters.tracker import build_tracker
from sdam_adapters.wire import CONFIDENCE_LEVELS, decode_mask
from conftest import image_b64, mask_b64_of, make_clip

ALLOWED_CONFIDENCES = set(CONFIDENCE_LEVELS.values())


@pytest.fixture(scope="module")
def servers():
    started = {
        "grounder": AdapterServer("grounder", build_grounder("classical")).start(),
        "segmenter": AdapterServer("segmenter", build_segmenter("classical")).start(),
        "tracker": AdapterServer("tracker", build_tracker("classical")).start(),
    }
    yield started
    for s in started.values():
        s.stop()


@pytest.fixture(scope="module")
def clip10():
    return make_clip()


def _post(server, path, doc):
    return requests.post(f"{server.url}{path}", json=doc, timeout=10)


def _check_box(box):
    assert isinstance(box, list) and len(box) == 4
    assert all(isinstance(v, int) for v in box)
    assert box[2] > box[0] and box[3] > box[1]


def test_ground_response_schema(servers, clip10):
    doc = {
        "query": "object 1",
        "prompt": "find it",
        "frames": [{"t": 1, "image_b64": image_b64(clip10[0])},
                   {"t": 4, "image_b64": image_b64(clip10[3])}],
    }
    resp = _post(servers["grounder"], "/ground", doc)
    assert resp.status_code == 200
    body = resp.json()
    assert set(body) == {"frames"}
    assert [f["t"] for f in body["frames"]] == [1, 4]
    for fd in body["frames"]:
        assert set(fd) == {"t", "objects", "confidence", "reasoning"}
        assert fd["confidence"] in ALLOWED_CONFIDENCES
        assert isinstance(fd["reasoning"], str)
        for od in fd["objects"]:
            assert set(od) == {"id", "label", "box", "present"}
            assert isinstance(od["id"], int) and od["id"] >= 1
            if od["present"]:
                _check_box(od["box"])


def test_ground_blank_image_health(servers):
    blank = np.zeros((16, 16, 3), dtype=np.uint8)
    doc = {"query": "anything", "prompt": "", "frames": [{"t": 1, "image_b64": image_b64(blank)}]}
    resp = _post(servers["grounder"], "/ground", doc)
    assert resp.status_code == 200
    (fd,) = resp.json()["frames"]
    assert fd["objects"] == []
    assert 0.0 <= fd["confidence"] <= 1.0


def test_ground_error_shape(servers):
    resp = _post(servers["grounder"], "/ground", {"query": "", "prompt": "", "frames": []})
    assert resp.status_code == 400
    assert set(resp.json()) == {"error"}


def test_segment_response_schema(servers, clip10):
    doc = {
        "frames": [
            {"t": 2, "image_b64": image_b64(clip10[1]),
             "boxes": [{"id": 1, "box": [12, 30, 24, 42]}]},
        ]
    }
    resp = _post(servers["segmenter"], "/segment", doc)
    assert resp.status_code == 200
    (fd,) = resp.json()["frames"]
    assert set(fd) == {"t", "masks", "iou", "frame_score"}
    (md,) = fd["masks"]
    assert set(md) == {"id", "mask_b64"}
    layer = decode_mask(md["mask_b64"])
    assert layer.shape == clip10[1].shape[:2]
    assert set(np.unique(layer)) <= {0, 1}
    (sd,) = fd["iou"]
    assert set(sd) == {"id", "score"}
    assert 0.0 <= sd["score"] <= 1.0
    assert 0.0 <= fd["frame_score"] <= 1.0


def test_track_roundtrip_schema(servers, clip10):
    layer = (clip10[0] == np.array([200, 40, 40], dtype=np.uint8)).all(axis=2)
    init = {
        "t": 1,
        "image_b64": image_b64(clip10[0]),
        "mask_b64": mask_b64_of(layer),
        "direction": "backward",
    }
    resp = _post(servers["tracker"], "/track/init", init)
    assert resp.status_code == 200
    assert set(resp.json()) == {"session"}
    session = resp.json()["session"]

    masks = []
    for t in range(2, 11):
        step = {"session": session, "t": t, "image_b64": image_b64(clip10[t - 1])}
        resp = _post(servers["tracker"], "/track/step", step)
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"t", "mask_b64"}
        assert body["t"] == t
        masks.append(decode_mask(body["mask_b64"]))
    assert len(masks) == 9  # exactly T-1 masks
    assert all(set(np.unique(m)) == {0, 1} for m in masks)

    # Out-of-order step is a protocol violation, not a 500.
    resp = _post(servers["tracker"], "/track/step",
                 {"session": session, "t": 99, "image_b64": image_b64(clip10[0])})
    assert resp.status_code == 409
    assert "error" in resp.json()


def test_wrong_route_404(servers):
    resp = _post(servers["grounder"], "/segment", {"frames": []})
    assert resp.status_code in (400, 404)
    assert "error" in resp.json()


def test_bad_json_400(servers):
    resp = requests.post(f"{servers['grounder'].url}/ground", data=b"{not json", timeout=10)
    assert resp.status_code == 400
    assert "error" in resp.json()

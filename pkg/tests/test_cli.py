from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from sdam.ablation import write_scene
from sdam.cli import main
from sdam.frames import read_masks
from conftest import make_scene

SCENE_DOC = {
    "name": "cli-scene",
    "width": 48,
    "height": 48,
    "frames": 10,
    "objects": [
        {
            "id": 1,
            "size": [10, 10],
            "color": [200, 40, 40],
            "start": [6, 20],
            "velocity": [2, 0],
        }
    ],
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def rendered(tmp_path, runner):
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(SCENE_DOC))
    out = tmp_path / "scene"
    res = runner.invoke(
        main, ["synth", "--scene", str(scene_path), "--seed", "3", "--out", str(out)]
    )
    assert res.exit_code == 0, res.output
    return out


def test_synth_outputs(rendered):
    assert (rendered / "frames" / "00001.png").is_file()
    assert (rendered / "masks" / "00010.png").is_file()
    ann = json.loads((rendered / "annotations.json").read_text())
    assert ann["objects"][0]["id"] == 1


def test_sample_json(rendered, runner):
    res = runner.invoke(
        main,
        ["sample", "--frames", str(rendered / "frames"), "--anchors", "4",
         "--sampler.encoder.grid_h", "8", "--sampler.encoder.grid_w", "8"],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output.strip().splitlines()[-1])
    ts = [c["t"] for c in doc["candidates"]]
    assert set(ts) >= {1, 5, 9}
    anchors = [c for c in doc["candidates"] if c["anchor"]]
    assert all(c["score"] is None for c in anchors)


def test_run_eval_stability_flow(rendered, runner, tmp_path):
    out = tmp_path / "run"
    res = runner.invoke(
        main,
        ["run", "--frames", str(rendered / "frames"), "--query", "object 1",
         "--out", str(out), "--stub", "--gt", str(rendered / "masks"), "--a", "0.6"],
    )
    assert res.exit_code == 0, res.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["fusion"]["a"] == 0.6
    memory_lines = (out / "memory.jsonl").read_text().strip().splitlines()
    assert json.loads(memory_lines[0])["t"] == manifest["decision"]["key_t"]
    assert (out / "report.json").is_file()
    report = json.loads((out / "report.json").read_text())
    assert report["mean"]["J&F"] == 1.0

    res = runner.invoke(
        main, ["eval", "--pred", str(out / "masks"), "--gt", str(rendered / "masks")]
    )
    assert res.exit_code == 0, res.output
    assert "J&F" in res.output and "1.0000" in res.output

    csv_path = tmp_path / "trend.csv"
    res = runner.invoke(
        main,
        ["stability", "--pred", str(out / "masks"), "--gt", str(rendered / "masks"),
         "--window", "5", "--csv", str(csv_path)],
    )
    assert res.exit_code == 0, res.output
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "t,jf,ma"
    assert len(lines) == 11  # header + T rows
    trend_values = [ln.split(",")[2] for ln in lines[1:] if ln.split(",")[2]]
    assert len(trend_values) == 10 - 5 + 1


def test_run_is_deterministic(rendered, runner, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        res = runner.invoke(
            main,
            ["run", "--frames", str(rendered / "frames"), "--query", "object 1",
             "--out", str(out), "--stub"],
        )
        assert res.exit_code == 0, res.output
        manifest = json.loads((out / "manifest.json").read_text())
        manifest.pop("timing")
        mask_bytes = b"".join(
            (out / "masks" / f"{t:05d}.png").read_bytes() for t in range(1, 11)
        )
        outs.append((json.dumps(manifest, sort_keys=True), mask_bytes))
    assert outs[0] == outs[1]


def test_run_dotted_override(rendered, runner, tmp_path):
    out = tmp_path / "run"
    res = runner.invoke(
        main,
        ["run", "--frames", str(rendered / "frames"), "--query", "object 1",
         "--out", str(out), "--stub", "--sampler.percentile_k", "30",
         "--sampler.max_candidates", "4"],
    )
    assert res.exit_code == 0, res.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["sampler"]["percentile_k"] == 30
    assert manifest["config"]["sampler"]["max_candidates"] == 4


def test_run_backend_failure_exit_2(rendered, runner, tmp_path):
    cfg = {
        "backends": {
            "grounder": {"mode": "remote", "url": "http://127.0.0.1:9"},
            "segmenter": {"mode": "remote", "url": "http://127.0.0.1:9"},
            "tracker": {"mode": "remote", "url": "http://127.0.0.1:9"},
            "timeout_s": 0.2,
            "retries": 0,
        }
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    res = runner.invoke(
        main,
        ["run", "--frames", str(rendered / "frames"), "--query", "object 1",
         "--out", str(tmp_path / "out"), "--config", str(cfg_path)],
    )
    assert res.exit_code == 2, res.output


def test_run_no_viable_keyframe_exit_3(runner, tmp_path):
    from sdam.synth import ObjectSpec

    scene = make_scene(
        frame_count=8,
        objects=(ObjectSpec(1, (8, 8), (200, 40, 40), (10, 10), visible_at_start=False),),
    )
    scene_dir = write_scene(tmp_path / "scene", scene, seed=1)
    res = runner.invoke(
        main,
        ["run", "--frames", str(scene_dir / "frames"), "--query", "object 1",
         "--out", str(tmp_path / "out"), "--stub"],
    )
    assert res.exit_code == 3, res.output


def test_eval_identical_dirs(rendered, runner):
    res = runner.invoke(
        main, ["eval", "--pred", str(rendered / "masks"), "--gt", str(rendered / "masks")]
    )
    assert res.exit_code == 0
    assert "1.0000" in res.output


def test_ablate_small_corpus(runner, tmp_path):
    from sdam.synth import ObjectSpec, SceneEvent

    corpus = tmp_path / "corpus"
    for i, window in enumerate([(1, 4), (6, 9)]):
        s, e = window
        events = []
        if s > 1:
            events.append(SceneEvent(s, "show"))
        if e < 12:
            events.append(SceneEvent(e + 1, "hide"))
        scene = make_scene(
            width=48,
            height=48,
            frame_count=12,
            objects=(
                ObjectSpec(1, (8, 8), (200, 40, 40), (12 + 4 * i, 12),
                           visible_at_start=(s == 1), events=tuple(events)),
            ),
            name=f"scene_{i}",
        )
        write_scene(corpus / scene.name, scene, seed=i)
    json_path = tmp_path / "ablate.json"
    res = runner.invoke(
        main,
        ["ablate", "--corpus", str(corpus), "--json", str(json_path),
         "--out", str(tmp_path / "ablate.txt")],
    )
    assert res.exit_code == 0, res.output
    assert "sampling strategy" in res.output
    assert "mds" in res.output and "global" in res.output and "first_frame" in res.output
    doc = json.loads(json_path.read_text())
    assert {r["label"] for r in doc["strategy"]} == {"first_frame", "global", "mds"}
    assert len(doc["fusion_weight"]) == 4
    assert len(doc["keyframe_count"]) == 3


def test_run_masks_readable(rendered, runner, tmp_path):
    out = tmp_path / "run"
    res = runner.invoke(
        main,
        ["run", "--frames", str(rendered / "frames"), "--query", "object 1",
         "--out", str(out), "--stub"],
    )
    assert res.exit_code == 0, res.output
    masks = read_masks(out / "masks")
    assert masks.length == 10
    assert all((m == 1).any() for m in masks.masks)

"""Ablation harness: sampling strategy, fusion weight, and keyframe count.

Runs the pipeline over a corpus of synthetic scenes (one directory per
scene: frames/, masks/, annotations.json, query.txt) and reports mean
J/F/J&F per configuration row. Runs that end with no viable keyframe
score 0 for their scene: no output earns no credit.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .backends.stubs import match_query, stub_backends_for_annotations
from .frames import load_sequence, read_masks, write_frames, write_masks
from .metrics import evaluate
from .pipeline import NoViableKeyframeError, PipelineConfig, run_pipeline
from .synth import (
    ObjectSpec,
    SceneEvent,
    SyntheticScene,
    load_annotations,
    render_synthetic,
    write_annotations,
)

STRATEGY_GRID = ("first_frame", "global", "mds")
A_GRID = (0.4, 0.5, 0.6, 0.75)
N_GRID = (1, 2, 3)

DEFAULT_QUERY = "object 1"


def build_default_corpus(root: str | Path, seed: int = 0) -> list[Path]:
    """Render the standard 10-scene corpus with abrupt mid-sequence events.

    Every scene has the queried object appearing only inside a visibility
    window plus a slow distractor; windows are placed so the three sampling
    strategies separate: some include frame 1, some sit mid-segment away
    from every anchor, some contain a later anchor.
    """
    # (window_start, window_end) inclusive, T=40, anchors at {1, 11, 21, 31}.
    windows = [
        (1, 8),
        (1, 6),
        (1, 10),
        (14, 19),
        (13, 18),
        (23, 28),
        (33, 38),
        (19, 24),
        (28, 33),
        (9, 14),
    ]
    root = Path(root)
    scene_dirs = []
    for i, (s, e) in enumerate(windows):
        events = []
        if s > 1:
            events.append(SceneEvent(s, "show"))
        if e < 40:
            events.append(SceneEvent(e + 1, "hide"))
        target = ObjectSpec(
            object_id=1,
            size=(12, 12),
            color=(200, 40, 40),
            start=(16 + 3 * i, 20 + 2 * (i % 4)),
            velocity=(1, 0) if i % 2 == 0 else (0, 1),
            visible_at_start=(s == 1),
            events=tuple(events),
        )
        distractor = ObjectSpec(
            object_id=2,
            size=(8, 8),
            color=(40, 80, 200),
            start=(72, 70),
            velocity=(-1, 0),
        )
        scene = SyntheticScene(
            width=96,
            height=96,
            frame_count=40,
            objects=(target, distractor),
            name=f"scene_{i:02d}",
        )
        scene_dirs.append(write_scene(root / scene.name, scene, seed + i))
    return scene_dirs


def write_scene(
    scene_dir: str | Path, scene: SyntheticScene, seed: int, query: str = DEFAULT_QUERY
) -> Path:
    scene_dir = Path(scene_dir)
    frames, masks, annotations = render_synthetic(scene, seed)
    write_frames(frames, scene_dir / "frames")
    write_masks(masks, scene_dir / "masks")
    write_annotations(annotations, scene_dir / "annotations.json")
    (scene_dir / "query.txt").write_text(query + "\n")
    (scene_dir / "scene.json").write_text(
        json.dumps({"name": scene.name, "seed": seed}, indent=2) + "\n"
    )
    return scene_dir


def scene_paths(corpus_dir: str | Path) -> list[Path]:
    corpus = Path(corpus_dir)
    scenes = sorted(p for p in corpus.iterdir() if (p / "frames").is_dir())
    if not scenes:
        raise FileNotFoundError(f"no scene directories under {corpus}")
    return scenes


def run_scene(scene_dir: Path, cfg: PipelineConfig) -> dict:
    """One pipeline run on one scene, scored against its ground truth."""
    seq = load_sequence(scene_dir / "frames")
    gt = read_masks(scene_dir / "masks")
    annotations = load_annotations(scene_dir / "annotations.json")
    query_file = scene_dir / "query.txt"
    query = query_file.read_text().strip() if query_file.is_file() else DEFAULT_QUERY
    target_ids = match_query(annotations, query) or [1]
    backends = stub_backends_for_annotations(annotations, gt)
    try:
        pred, manifest = run_pipeline(seq, query, cfg, backends=backends)
    except NoViableKeyframeError:
        return {"scene": scene_dir.name, "failed": True, "J": 0.0, "F": 0.0, "J&F": 0.0}
    report = evaluate(pred, gt, object_ids=target_ids)
    return {
        "scene": scene_dir.name,
        "failed": False,
        "key_t": manifest["decision"]["key_t"],
        "J": report.mean_j,
        "F": report.mean_f,
        "J&F": report.mean_jf,
    }


def _mean_row(label: str, results: list[dict]) -> dict:
    n = len(results)
    return {
        "label": label,
        "scenes": n,
        "failures": sum(r["failed"] for r in results),
        "J": sum(r["J"] for r in results) / n,
        "F": sum(r["F"] for r in results) / n,
        "J&F": sum(r["J&F"] for r in results) / n,
        "per_scene": results,
    }


def sweep_strategies(scenes: list[Path], base: PipelineConfig, grid=STRATEGY_GRID) -> list[dict]:
    rows = []
    for strategy in grid:
        cfg = dataclasses.replace(
            base, sampler=dataclasses.replace(base.sampler, strategy=strategy)
        )
        rows.append(_mean_row(strategy, [run_scene(s, cfg) for s in scenes]))
    return rows


def sweep_fusion_weight(scenes: list[Path], base: PipelineConfig, grid=A_GRID) -> list[dict]:
    rows = []
    for a in grid:
        cfg = dataclasses.replace(base, fusion=dataclasses.replace(base.fusion, a=a))
        rows.append(_mean_row(f"a={a}", [run_scene(s, cfg) for s in scenes]))
    return rows


def sweep_keyframe_count(scenes: list[Path], base: PipelineConfig, grid=N_GRID) -> list[dict]:
    # Keyframe-count rows run in global sampling mode so the comparison
    # isolates the propagation scheme from the sampler.
    rows = []
    for n in grid:
        cfg = dataclasses.replace(
            base,
            n_keyframes=n,
            sampler=dataclasses.replace(base.sampler, strategy="global"),
        )
        rows.append(_mean_row(f"n={n}", [run_scene(s, cfg) for s in scenes]))
    return rows


def ablate(corpus_dir: str | Path, base: PipelineConfig) -> dict:
    scenes = scene_paths(corpus_dir)
    return {
        "strategy": sweep_strategies(scenes, base),
        "fusion_weight": sweep_fusion_weight(scenes, base),
        "keyframe_count": sweep_keyframe_count(scenes, base),
    }


def render_table(title: str, rows: list[dict]) -> str:
    width = max(len(title), max(len(r["label"]) for r in rows)) + 2
    lines = [f"{title:<{width}}{'J':>8}{'F':>8}{'J&F':>8}{'fail':>6}"]
    for r in rows:
        lines.append(
            f"{r['label']:<{width}}{r['J']:>8.4f}{r['F']:>8.4f}{r['J&F']:>8.4f}"
            f"{r['failures']:>6d}"
        )
    return "\n".join(lines)


def render_report(results: dict) -> str:
    sections = [
        render_table("sampling strategy", results["strategy"]),
        render_table("confidence weight", results["fusion_weight"]),
        render_table("keyframe count", results["keyframe_count"]),
    ]
    return "\n\n".join(sections) + "\n"

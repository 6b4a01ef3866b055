"""Command-line surface: sample, run, eval, stability, synth, ablate.

Configuration is one JSON document; any field can be overridden with a
flag of the same dotted name (e.g. --sampler.percentile_k 25), and the
common knobs have short flags. Exit codes for `run`: 0 success, 2 backend
failure, 3 no viable keyframe.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import ablation as ablation_mod
from .backends.errors import BackendError
from .frames import indexed_frame_paths, load_sequence, read_masks, write_frames, write_masks
from .memory import MemoryBank, memorize
from .metrics import evaluate
from .pipeline import NoViableKeyframeError, PipelineConfig, run_pipeline
from .propagation import PropagationError
from .sampler import SamplerConfig, sample
from .synth import load_annotations, load_scene, render_synthetic, write_annotations


def _set_dotted(doc: dict, path: str, raw: str) -> None:
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    try:
        node[keys[-1]] = json.loads(raw)
    except json.JSONDecodeError:
        node[keys[-1]] = raw


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    """Trailing `--dotted.name value` pairs into a nested dict."""
    doc: dict = {}
    items = list(pairs)
    while items:
        flag = items.pop(0)
        if not flag.startswith("--"):
            raise click.UsageError(f"expected --dotted.name, got {flag!r}")
        if "=" in flag:
            name, raw = flag[2:].split("=", 1)
        else:
            if not items:
                raise click.UsageError(f"missing value for {flag}")
            name, raw = flag[2:], items.pop(0)
        _set_dotted(doc, name, raw)
    return doc


def _merge(base: dict, overlay: dict) -> dict:
    out = dict(base)
    for k, v in overlay.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _load_config(config_path: str | None, overrides: tuple[str, ...]) -> dict:
    doc = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text())
    return _merge(doc, _parse_overrides(overrides))


def _sampler_flags(doc: dict, a, k_percentile, sigma, anchors, n_keyframes):
    if a is not None:
        doc.setdefault("fusion", {})["a"] = a
    sampler = doc.setdefault("sampler", {})
    if k_percentile is not None:
        sampler["percentile_k"] = k_percentile
    if sigma is not None:
        sampler["sigma"] = None if sigma == "auto" else float(sigma)
    if anchors is not None:
        sampler["anchor_interval"] = None if anchors == "auto" else int(anchors)
    if n_keyframes is not None:
        doc["n_keyframes"] = n_keyframes
    return doc


@click.group()
def main():
    """Training-free video object segmentation pipeline."""


@main.command("sample", context_settings={"ignore_unknown_options": True})
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--k-percentile", type=float, default=None)
@click.option("--sigma", default=None, help="'auto' (n/4 per segment) or a float")
@click.option("--anchors", default=None, help="'auto' (floor(T/4)) or an interval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
def sample_cmd(frames_dir, k_percentile, sigma, anchors, config_path, out_path, overrides):
    """Emit the keyframe candidate set for a frame directory as JSON."""
    doc = _load_config(config_path, overrides)
    doc = _sampler_flags(doc, None, k_percentile, sigma, anchors, None)
    cfg = SamplerConfig.from_dict(doc.get("sampler", {}))
    seq = load_sequence(frames_dir)
    candidates = sample(seq, cfg)
    text = candidates.to_json()
    if out_path:
        Path(out_path).write_text(text + "\n")
    click.echo(text)


@main.command("run", context_settings={"ignore_unknown_options": True})
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--query", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--stub", is_flag=True, help="force all backend roles to stub mode")
@click.option("--annotations", "annotations_path", type=click.Path(), default=None,
              help="scene annotations for stub backends (default: sibling of --frames)")
@click.option("--gt", "gt_dir", type=click.Path(), default=None,
              help="ground-truth mask directory; enables report.json")
@click.option("--a", type=float, default=None)
@click.option("--k-percentile", type=float, default=None)
@click.option("--sigma", default=None)
@click.option("--anchors", default=None)
@click.option("--n-keyframes", type=int, default=None)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
def run_cmd(frames_dir, query, config_path, out_dir, stub, annotations_path, gt_dir,
            a, k_percentile, sigma, anchors, n_keyframes, overrides):
    """Run the full pipeline and write masks/, manifest.json, report.json."""
    doc = _load_config(config_path, overrides)
    doc = _sampler_flags(doc, a, k_percentile, sigma, anchors, n_keyframes)
    if stub:
        doc = _merge(doc, {"backends": {
            "grounder": {"mode": "stub", "url": None},
            "segmenter": {"mode": "stub", "url": None},
            "tracker": {"mode": "stub", "url": None},
        }})
    cfg = PipelineConfig.from_dict(doc)

    frames_path = Path(frames_dir)
    seq = load_sequence(frames_path)
    annotations = None
    if not all(m == "remote" for m in (
        cfg.backends.grounder.mode, cfg.backends.segmenter.mode, cfg.backends.tracker.mode
    )):
        ann_path = Path(annotations_path) if annotations_path else frames_path.parent / "annotations.json"
        if not ann_path.is_file():
            raise click.UsageError(
                f"stub backends need annotations; not found at {ann_path}"
            )
        annotations = load_annotations(ann_path)
    gt = read_masks(gt_dir) if gt_dir else None

    try:
        masks, manifest = run_pipeline(
            seq, query, cfg,
            annotations=annotations,
            gt_masks=gt,
            frame_paths=indexed_frame_paths(frames_path),
        )
    except NoViableKeyframeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(3)
    except (BackendError, PropagationError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_masks(masks, out / "masks")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    # Debug dump of what was memorized from the keyframe (the propagated
    # output at the keyframe is the key mask verbatim).
    key_t = manifest["decision"]["key_t"]
    bank = MemoryBank()
    for entry in memorize(seq.frame(key_t), key_t, masks.mask(key_t), cfg.sampler.encoder):
        bank.insert(entry)
    (out / "memory.jsonl").write_text(bank.dump_jsonl())
    if gt is not None:
        report = evaluate(masks, gt, trend_window=cfg.ma_window)
        (out / "report.json").write_text(report.to_json() + "\n")
        click.echo(report.to_table())
    click.echo(f"keyframe: {manifest['decision']['key_t']}")


@main.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True))
@click.option("--objects", default=None, help="comma-separated object ids (default: all in gt)")
@click.option("--window", type=int, default=5)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def eval_cmd(pred_dir, gt_dir, objects, window, report_path, csv_path):
    """Score a prediction mask directory against ground truth."""
    pred = read_masks(pred_dir)
    gt = read_masks(gt_dir)
    ids = [int(x) for x in objects.split(",")] if objects else None
    report = evaluate(pred, gt, object_ids=ids, trend_window=window)
    click.echo(report.to_table())
    if report_path:
        Path(report_path).write_text(report.to_json() + "\n")
    if csv_path:
        Path(csv_path).write_text(report.trend_csv())


@main.command("stability")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True))
@click.option("--window", type=int, default=5)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def stability_cmd(pred_dir, gt_dir, window, csv_path):
    """Per-frame J&F series with its centered moving-average trend."""
    pred = read_masks(pred_dir)
    gt = read_masks(gt_dir)
    report = evaluate(pred, gt, trend_window=window)
    text = report.trend_csv()
    if csv_path:
        Path(csv_path).write_text(text)
    click.echo(text, nl=False)


@main.command("synth")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--query", default=ablation_mod.DEFAULT_QUERY)
def synth_cmd(scene_path, seed, out_dir, query):
    """Render a synthetic scene JSON into frames/masks/annotations."""
    scene = load_scene(scene_path)
    frames, masks, annotations = render_synthetic(scene, seed)
    out = Path(out_dir)
    write_frames(frames, out / "frames")
    write_masks(masks, out / "masks")
    write_annotations(annotations, out / "annotations.json")
    (out / "query.txt").write_text(query + "\n")
    click.echo(f"rendered {scene.name}: T={scene.frame_count} "
               f"{scene.width}x{scene.height}, {len(scene.objects)} objects")


@main.command("ablate")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path())
@click.option("--build-default", is_flag=True,
              help="render the standard 10-scene corpus into --corpus if absent")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def ablate_cmd(corpus_dir, build_default, seed, out_path, json_path, config_path):
    """Sweep sampling strategy, fusion weight a, and keyframe count n."""
    corpus = Path(corpus_dir)
    if build_default and not corpus.is_dir():
        ablation_mod.build_default_corpus(corpus, seed)
    base = PipelineConfig.from_dict(
        json.loads(Path(config_path).read_text()) if config_path else {}
    )
    results = ablation_mod.ablate(corpus, base)
    text = ablation_mod.render_report(results)
    click.echo(text, nl=False)
    if out_path:
        Path(out_path).write_text(text)
    if json_path:
        slim = {
            section: [{k: v for k, v in row.items() if k != "per_scene"} for row in rows]
            for section, rows in results.items()
        }
        Path(json_path).write_text(json.dumps(slim, indent=2) + "\n")


if __name__ == "__main__":
    main()

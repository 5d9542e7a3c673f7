"""Command-line entry points for every pipeline stage."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import manifest as mf

from .synthetic import DEFAULT_RATES, generate_base_tiles, generate_corpus


@click.group()
def main():
    """Curation tools for scraped image-text corpora."""


@main.command("gen-tiles")
@click.option("--out", required=True, type=click.Path())
@click.option("--n", default=50, show_default=True)
@click.option("--size", default=192, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen_tiles(out, n, size, seed):
    """Generate procedurally textured clean base tiles."""
    paths = generate_base_tiles(out, n, size=size, seed=seed)
    click.echo(f"wrote {len(paths)} tiles to {out}")


@main.command("gen-corpus")
@click.option("--base", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--n", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--rates", default=",".join(str(r) for r in DEFAULT_RATES), show_default=True)
def gen_corpus(base, out, n, seed, rates):
    """Generate a labeled synthetic corpus with composited impurities."""
    rate_tuple = tuple(float(r) for r in rates.split(","))
    entries, labels = generate_corpus(base, out, n, rates=rate_tuple, seed=seed)
    n_any = sum(1 for ls in labels.values() if ls.any)
    click.echo(f"wrote {len(entries)} images to {out} ({n_any} with impurities)")


@main.command("split")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--ratios", default="0.7,0.15,0.15", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def split_cmd(manifest_path, fmt, ratios, seed, out):
    """Assign train/val/test splits to a manifest."""
    entries = mf.load_manifest(manifest_path, fmt).entries
    r = tuple(float(x) for x in ratios.split(","))
    assignments = mf.split([e.image_id for e in entries], r, seed)
    mf.emit_splits(assignments, out)
    sizes = {s: sum(1 for a in assignments if a.split == s) for s in ("train", "val", "test")}
    click.echo(f"split sizes: {sizes}")


@main.command("verify")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
def verify_cmd(manifest_path, fmt):
    """Check presence, decodability, and hashes of manifest images."""
    entries = mf.load_manifest(manifest_path, fmt).entries
    report = mf.verify_images(entries)
    click.echo(json.dumps(report.counts))
    if report.counts["ok"] != len(entries):
        sys.exit(2)


@main.command("annotate-serve")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--db", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--static", "static_dir", default=None, type=click.Path())
def annotate_serve(manifest_path, fmt, db, port, seed, static_dir):
    """Serve the annotation REST API (and the browser UI if built)."""
    import uvicorn

    from .annotation import AnnotationStore, create_app

    store = AnnotationStore(db)
    if store.progress()[1] == 0:
        entries = mf.load_manifest(manifest_path, fmt).entries
        store.create_queue(entries, seed)
    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = str(bundled) if bundled.is_dir() else None
    app = create_app(store, static_dir)
    uvicorn.run(app, host="0.0.0.0", port=port)


@main.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--splits", "splits_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--backbone", default="resnet50d", show_default=True)
@click.option("--input-size", default=224, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--max-epochs", default=100, show_default=True)
@click.option("--patience", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--augmentation", default="standard-v1", show_default=True)
def train_cmd(manifest_path, fmt, labels_path, splits_path, out, backbone, input_size,
              batch_size, lr, max_epochs, patience, seed, augmentation):
    """Train the multi-label impurity classifier."""
    from .classifier import TrainConfig, train

    entries = {e.image_id: e for e in mf.load_manifest(manifest_path, fmt).entries}
    labels = mf.load_labels(labels_path)
    splits = mf.load_splits(splits_path)
    train_entries = [entries[a.image_id] for a in splits if a.split == "train" and a.image_id in entries]
    val_entries = [entries[a.image_id] for a in splits if a.split == "val" and a.image_id in entries]
    config = TrainConfig(
        backbone=backbone, input_size=input_size, batch_size=batch_size,
        learning_rate=lr, max_epochs=max_epochs, early_stop_patience=patience,
        seed=seed, augmentation=augmentation,
    )
    run = train(train_entries, val_entries, labels, config, out)
    click.echo(
        f"selected epoch {run.selected_epoch} "
        f"(val loss {run.val_losses[run.selected_epoch]:.4f}), checkpoint in {out}"
    )


@main.command("predict")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--out", required=True, type=click.Path())
def predict_cmd(ckpt, manifest_path, fmt, out):
    """Run the classifier over a manifest."""
    from .classifier import emit_predictions, load_checkpoint, predict

    model, config = load_checkpoint(ckpt)
    entries = mf.load_manifest(manifest_path, fmt).entries
    records = predict(model, config, entries)
    emit_predictions(records, out)
    n_err = sum(1 for r in records if r.error)
    click.echo(f"wrote {len(records)} predictions to {out} ({n_err} errors)")


@main.command("evaluate")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--splits", "splits_path", default=None, type=click.Path(exists=True))
@click.option("--split", "which", default="test", show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path())
def evaluate_cmd(ckpt, manifest_path, fmt, labels_path, splits_path, which, report_path):
    """Evaluate a checkpoint; report mirrors the per-category metrics table."""
    from .classifier import evaluate, load_checkpoint, predict

    model, config = load_checkpoint(ckpt)
    entries = mf.load_manifest(manifest_path, fmt).entries
    if splits_path:
        wanted = {a.image_id for a in mf.load_splits(splits_path) if a.split == which}
        entries = [e for e in entries if e.image_id in wanted]
    labels = mf.load_labels(labels_path)
    report = evaluate(predict(model, config, entries), labels)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    for row in report["rows"]:
        auc = f"{row['auc']:.4f}" if row["auc"] is not None else "n/a"
        click.echo(f"{row['category']:>20}: acc={row['accuracy']:.4f} auc={auc}")


@main.command("score-clip")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--scorer", "scorer_id", default="stub", show_default=True)
@click.option("--out", required=True, type=click.Path())
def score_clip(manifest_path, fmt, scorer_id, out):
    """Score image-text alignment for every pair in a manifest."""
    from .semantic import StubScorer, emit_scores, score_pairs

    if scorer_id != "stub":
        raise click.ClickException(f"no binding for scorer {scorer_id!r}; 'stub' is bundled")
    entries = mf.load_manifest(manifest_path, fmt).entries
    scores, failures = score_pairs(StubScorer(), entries)
    emit_scores(scores, out)
    click.echo(f"scored {len(scores)} pairs ({len(failures)} failures)")


@main.command("filter-semantic")
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--out-dir", required=True, type=click.Path())
def filter_semantic(scores_path, manifest_path, fmt, out_dir):
    """Keep the pairs whose score strictly exceeds the median."""
    from .pipeline import apply_pair_filter
    from .semantic import load_scores, median_filter

    scores = load_scores(scores_path)
    entries = mf.load_manifest(manifest_path, fmt).entries
    kept, dropped, median = median_filter(scores)
    variant = apply_pair_filter(entries, kept, dropped, median, out_dir, "semantic_filtered", "unfiltered")
    summary = {"n": len(scores), "median": median, "n_kept": len(kept), "n_dropped": len(dropped)}
    with open(Path(out_dir) / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    click.echo(json.dumps(summary))
    click.echo(f"kept manifest: {variant.manifest_path}")


@main.group("pipeline")
def pipeline_group():
    """Orchestrated multi-stage runs."""


@pipeline_group.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def pipeline_run(config_path):
    """Run the full pipeline from a YAML config."""
    from .pipeline import ConfigError, PipelineError, run_pipeline

    try:
        report = run_pipeline(config_path)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    except (PipelineError, OSError) as e:
        click.echo(f"stage failure (resumable): {e}", err=True)
        sys.exit(3)
    click.echo(json.dumps({n: v["content_hash"] for n, v in report["variants"].items()}))


@pipeline_group.command("filter")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["csv", "jsonl"]))
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
def pipeline_filter(manifest_path, fmt, predictions, out_dir):
    """Emit the impurity-filtered variant."""
    from .classifier import load_predictions
    from .pipeline import filter_dataset

    entries = mf.load_manifest(manifest_path, fmt).entries
    variant = filter_dataset(entries, load_predictions(predictions), out_dir)
    click.echo(json.dumps(variant.to_json_obj(), sort_keys=True))


@pipeline_group.command("derive-prompts")
@click.option("--metadata", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def pipeline_prompts(metadata, out):
    """Derive one prompt per distinct (organ, tumor_type)."""
    from .pipeline import derive_prompts

    rows = [json.loads(line) for line in Path(metadata).read_text().splitlines() if line.strip()]
    prompts = derive_prompts(rows)
    with open(out, "w", encoding="utf-8") as f:
        json.dump([p.__dict__ for p in prompts], f, indent=2, sort_keys=True)
    click.echo(f"wrote {len(prompts)} prompts")


@pipeline_group.command("crops")
@click.option("--metadata", required=True, type=click.Path(exists=True))
@click.option("--crop-size", default=64, show_default=True)
@click.option("--n-per-image", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
def pipeline_crops(metadata, crop_size, n_per_image, seed, out_dir):
    """Sample reference crops grouped by condition."""
    from .pipeline import condition_key, sample_reference_crops

    rows = [json.loads(line) for line in Path(metadata).read_text().splitlines() if line.strip()]
    items = [
        {"image_path": r["image_path"], "condition": condition_key(r["organ"], r["tumor_type"])}
        for r in rows
    ]
    result = sample_reference_crops(items, crop_size, n_per_image, seed, out_dir)
    total = sum(len(v) for v in result.by_condition.values())
    click.echo(f"wrote {total} crops ({len(result.skipped)} images skipped)")


@pipeline_group.command("generate")
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True))
@click.option("--adapter", default="noise-stub", show_default=True)
@click.option("--total-n", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
def pipeline_generate(prompts_path, adapter, total_n, seed, out_dir):
    """Drive the generator adapter across prompts."""
    from .pipeline import PromptSpec, build_adapter, run_generation

    specs = [PromptSpec(**p) for p in json.loads(Path(prompts_path).read_text())]
    result = run_generation(build_adapter(adapter), specs, total_n, seed, out_dir)
    click.echo(json.dumps({k: len(v) for k, v in sorted(result.items())}))


@pipeline_group.command("fid")
@click.option("--generated", required=True, type=click.Path(exists=True))
@click.option("--reference", required=True, type=click.Path(exists=True))
@click.option("--extractor", default="pixel-stats-v1", show_default=True)
@click.option("--out", required=True, type=click.Path())
def pipeline_fid(generated, reference, extractor, out):
    """Conditional Fréchet distance between two grouped image directories."""
    from .metrics import conditional_fid
    from .pipeline import build_extractor, collect_grouped_images, features_by_condition

    ext = build_extractor(extractor)
    gen = features_by_condition(ext, collect_grouped_images(generated))
    ref = features_by_condition(ext, collect_grouped_images(reference))
    fid = conditional_fid(gen, ref)
    report = {
        "extractor_id": ext.extractor_id,
        "n_generated": int(sum(len(v) for v in gen.values())),
        "n_reference": int(sum(len(v) for v in ref.values())),
        "per_condition": fid["per_condition"],
        "mean": fid["mean"],
        "skipped_conditions": fid["skipped_conditions"],
    }
    with open(out, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    click.echo(f"mean FID {fid['mean']:.4f} over {len(fid['per_condition'])} conditions")


@main.command("prevalence")
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
def prevalence_cmd(labels_path):
    """Per-category and any-impurity prevalence of a label file."""
    from .annotation import compute_prevalence

    labels = mf.load_labels(labels_path)
    click.echo(json.dumps(compute_prevalence(labels), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()

"""Pipeline orchestration: variants -> prompts -> crops -> generation -> FID report.

Every stage writes a completion marker keyed by a content hash of its
inputs, so an interrupted run resumes instead of recomputing. All JSON is
emitted with sorted keys and no timestamps: identical inputs give
byte-identical outputs.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import yaml

from ..classifier.train import load_checkpoint, load_predictions, predict, emit_predictions
from ..manifest import load_manifest
from ..semantic import StubScorer, median_filter, score_pairs, emit_scores
from .crops import sample_reference_crops
from .extractors import build_extractor, collect_grouped_images, features_by_condition
from .generate import build_adapter, run_generation
from .prompts import DEFAULT_TEMPLATE_ID, derive_prompts
from .variants import (
    DatasetVariant,
    PipelineError,
    VARIANT_NAMES,
    apply_pair_filter,
    file_sha256,
    filter_dataset,
)
from ..metrics import conditional_fid


class ConfigError(PipelineError):
    pass


class StageFailure(PipelineError):
    pass


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        cfg = yaml.safe_load(f)
    for key in ("workdir", "manifest", "references", "generation"):
        if key not in cfg:
            raise ConfigError(f"config missing required key {key!r}")
    cfg.setdefault("seed", 0)
    cfg.setdefault("manifest_format", "jsonl")
    cfg.setdefault("filter_mode", "any_flag")
    cfg.setdefault("variants", list(VARIANT_NAMES))
    cfg.setdefault("extractor", "pixel-stats-v1")
    cfg.setdefault("prompt_template", DEFAULT_TEMPLATE_ID)
    unknown = set(cfg["variants"]) - set(VARIANT_NAMES)
    if unknown:
        raise ConfigError(f"unknown variants {sorted(unknown)}")
    if "predictions" not in cfg and "checkpoint" not in cfg:
        raise ConfigError("config needs either 'predictions' or 'checkpoint'")
    return cfg


class Pipeline:
    def __init__(self, config: dict):
        self.cfg = config
        self.workdir = Path(config["workdir"])
        self.workdir.mkdir(parents=True, exist_ok=True)

    # -- resumability --------------------------------------------------------

    def _stage_done(self, name: str, key: str) -> bool:
        marker = self.workdir / f".{name}.done"
        if marker.is_file():
            if json.loads(marker.read_text())["key"] == key:
                return True
        return False

    def _mark_stage(self, name: str, key: str) -> None:
        (self.workdir / f".{name}.done").write_text(json.dumps({"key": key}))

    # -- stages --------------------------------------------------------------

    def run(self) -> dict:
        entries = load_manifest(self.cfg["manifest"], self.cfg["manifest_format"]).entries
        predictions = self._predictions(entries)
        variants = self._variants(entries, predictions)
        prompts = self._prompts()
        crops = self._crops()
        generated = self._generate(variants, prompts)
        fid_reports = self._fid(variants, crops, generated)
        return self.emit_report(variants, fid_reports)

    def _predictions(self, entries):
        if "predictions" in self.cfg:
            return load_predictions(self.cfg["predictions"])
        out = self.workdir / "predictions.jsonl"
        key = _hash_obj([self.cfg["checkpoint"], file_sha256(self.cfg["manifest"])])
        if not (self._stage_done("predict", key) and out.is_file()):
            model, ckpt_cfg = load_checkpoint(self.cfg["checkpoint"])
            emit_predictions(predict(model, ckpt_cfg, entries), out)
            self._mark_stage("predict", key)
        return load_predictions(out)

    def _variants(self, entries, predictions) -> dict[str, DatasetVariant]:
        """Emit the selected dataset variants.

        The semantic median is computed once over the full pair population;
        both_filtered applies that same threshold to the impurity
        survivors, so the subset chain over variants holds by construction.
        """
        out_dir = self.workdir / "variants"
        variants: dict[str, DatasetVariant] = {}
        from .variants import write_variant

        variants["unfiltered"] = write_variant(
            "unfiltered", entries, out_dir, None, {}, drops=[]
        )
        impurity = filter_dataset(
            entries, predictions, out_dir, mode=self.cfg["filter_mode"]
        )
        variants["impurity_filtered"] = impurity

        scorer = StubScorer() if self.cfg.get("scorer", "stub") == "stub" else None
        if scorer is None:
            raise ConfigError(f"unknown scorer {self.cfg.get('scorer')!r}")
        scores, failures = score_pairs(scorer, entries)
        if failures:
            raise StageFailure(f"{len(failures)} pairs failed to score, e.g. {failures[:2]}")
        emit_scores(scores, self.workdir / "scores.jsonl")
        kept, dropped, median = median_filter(scores)
        variants["semantic_filtered"] = apply_pair_filter(
            entries, kept, dropped, median, out_dir, "semantic_filtered", "unfiltered"
        )

        impurity_ids = {
            e.image_id
            for e in load_manifest(impurity.manifest_path, "jsonl").entries
        }
        both_kept = [p for p in kept if p.image_id in impurity_ids]
        both_kept_set = set(both_kept)
        both_dropped = [p for p in scores if p not in both_kept_set]
        variants["both_filtered"] = apply_pair_filter(
            [e for e in entries if e.image_id in impurity_ids],
            both_kept,
            both_dropped,
            median,
            out_dir,
            "both_filtered",
            "impurity_filtered",
        )
        selected = {n: v for n, v in variants.items() if n in self.cfg["variants"]}
        with open(self.workdir / "variants.json", "w", encoding="utf-8") as f:
            json.dump({n: v.to_json_obj() for n, v in selected.items()}, f, indent=2, sort_keys=True)
        return selected

    def _reference_rows(self, ref_cfg) -> list[dict]:
        rows = []
        with open(ref_cfg["metadata"], encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    rows.append(json.loads(line))
        return rows

    def _prompts(self):
        all_rows = []
        for ref in self.cfg["references"]:
            all_rows.extend(self._reference_rows(ref))
        return derive_prompts(all_rows, self.cfg["prompt_template"])

    def _crops(self) -> dict[str, dict[str, list[str]]]:
        from .prompts import condition_key

        out: dict[str, dict[str, list[str]]] = {}
        for ref in self.cfg["references"]:
            rows = self._reference_rows(ref)
            items = [
                {"image_path": r["image_path"], "condition": condition_key(r["organ"], r["tumor_type"])}
                for r in rows
            ]
            ref_dir = self.workdir / "crops" / ref["name"]
            key = _hash_obj([items, ref.get("crop_size", 64), ref.get("n_per_image", 2), self.cfg["seed"]])
            if not self._stage_done(f"crops-{ref['name']}", key):
                sample_reference_crops(
                    items,
                    crop_size=ref.get("crop_size", 64),
                    n_per_image=ref.get("n_per_image", 2),
                    seed=self.cfg["seed"],
                    out_dir=ref_dir,
                )
                self._mark_stage(f"crops-{ref['name']}", key)
            out[ref["name"]] = collect_grouped_images(ref_dir)
        return out

    def _generate(self, variants, prompts) -> dict[str, dict[str, list[str]]]:
        gen_cfg = self.cfg["generation"]
        adapter = build_adapter(gen_cfg.get("adapter", "noise-stub"))
        out: dict[str, dict[str, list[str]]] = {}
        for name, variant in variants.items():
            # variant content feeds the seed, so distinct variants generate
            # distinct sets while reruns stay byte-identical
            sub_seed = (
                self.cfg["seed"],
                int.from_bytes(bytes.fromhex(variant.content_hash[:16]), "big"),
            )
            gen_dir = self.workdir / "generated" / name
            key = _hash_obj([adapter.adapter_id, gen_cfg["total_n"], list(sub_seed)])
            if not self._stage_done(f"generate-{name}", key):
                run_generation(
                    adapter,
                    prompts,
                    gen_cfg["total_n"],
                    seed=sub_seed[1] ^ self.cfg["seed"],
                    out_dir=gen_dir,
                )
                self._mark_stage(f"generate-{name}", key)
            out[name] = collect_grouped_images(gen_dir)
        return out

    def _fid(self, variants, crops, generated) -> dict[str, dict[str, dict]]:
        extractor = build_extractor(self.cfg["extractor"])
        reports: dict[str, dict[str, dict]] = {}
        for variant_name in variants:
            gen_feats = features_by_condition(extractor, generated[variant_name])
            reports[variant_name] = {}
            for ref_name, grouped in crops.items():
                ref_feats = features_by_condition(extractor, grouped)
                fid = conditional_fid(gen_feats, ref_feats)
                reports[variant_name][ref_name] = {
                    "extractor_id": extractor.extractor_id,
                    "n_generated": int(sum(len(v) for v in generated[variant_name].values())),
                    "n_reference": int(sum(len(v) for v in grouped.values())),
                    "per_condition": fid["per_condition"],
                    "mean": fid["mean"],
                    "skipped_conditions": fid["skipped_conditions"],
                }
        return reports

    def emit_report(self, variants, fid_reports) -> dict:
        report = {
            "variants": {n: v.to_json_obj() for n, v in variants.items()},
            "fid": fid_reports,
        }
        with open(self.workdir / "report.json", "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
        ref_names = sorted({r for per in fid_reports.values() for r in per})
        lines = ["| variant | " + " | ".join(ref_names) + " |",
                 "|---|" + "---|" * len(ref_names)]
        for name in sorted(variants):
            cells = []
            for ref in ref_names:
                block = fid_reports.get(name, {}).get(ref)
                cells.append(f"{block['mean']:.4f}" if block else "n/a")
            lines.append(f"| {name} | " + " | ".join(cells) + " |")
        (self.workdir / "report.md").write_text("\n".join(lines) + "\n")
        return report


def run_pipeline(config_path: str | Path) -> dict:
    return Pipeline(load_config(config_path)).run()

"""Training, inference, and evaluation of the multi-label impurity classifier.

Loss is independent per-label binary cross-entropy with logits (the eight
categories co-occur freely, so softmax would be wrong), with per-label
positive-class weighting N_neg/N_pos computed from the training split.
Early stopping and model selection follow the validation loss.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from PIL import Image
from torch.utils.data import DataLoader

from ..labels import CATEGORY_NAMES, ImpurityLabelSet, N_CATEGORIES
from ..manifest import ManifestEntry
from ..metrics import binary_report_row
from .backbones import MultiLabelNet
from .data import LabeledImageDataset, eval_transform


class ClassifierError(Exception):
    pass


class SplitLeakage(ClassifierError):
    pass


class EmptySet(ClassifierError):
    pass


class NonFiniteLoss(ClassifierError):
    pass


@dataclass
class TrainConfig:
    backbone: str = "resnet50d"
    input_size: int = 224
    batch_size: int = 32
    learning_rate: float = 1e-4
    max_epochs: int = 100
    early_stop_patience: int = 5
    seed: int = 0
    augmentation: str = "standard-v1"
    binarize_thresholds: tuple[float, ...] = (0.5,) * N_CATEGORIES
    num_workers: int = 0

    def __post_init__(self):
        if self.early_stop_patience < 1:
            raise ValueError("patience must be >= 1")
        if not all(0.0 < t < 1.0 for t in self.binarize_thresholds):
            raise ValueError("thresholds must lie in (0, 1)")
        if len(self.binarize_thresholds) != N_CATEGORIES:
            raise ValueError(f"need {N_CATEGORIES} thresholds")


@dataclass
class TrainingRun:
    train_losses: list[float]
    val_losses: list[float]
    selected_epoch: int  # 0-based index into the loss lists
    checkpoint_dir: str
    config: TrainConfig


@dataclass
class PredictionRecord:
    image_id: str
    probs: list[float] = field(default_factory=list)
    flags: list[bool] = field(default_factory=list)
    error: str | None = None

    def to_json_obj(self) -> dict:
        obj = {"image_id": self.image_id, "probs": self.probs, "flags": self.flags}
        if self.error is not None:
            obj["error"] = self.error
        return obj


def _pos_weights(labels: dict[str, ImpurityLabelSet], ids: list[str]) -> torch.Tensor:
    weights = []
    n = len(ids)
    for i in range(N_CATEGORIES):
        n_pos = sum(1 for image_id in ids if labels[image_id].flags[i])
        n_neg = n - n_pos
        weights.append(n_neg / n_pos if n_pos else 1.0)
    return torch.tensor(weights, dtype=torch.float32)


def _epoch_loss(model, loader, criterion, optimizer=None) -> float:
    training = optimizer is not None
    model.train(training)
    total, count = 0.0, 0
    with torch.set_grad_enabled(training):
        for x, y in loader:
            logits = model(x)
            loss = criterion(logits, y)
            if not math.isfinite(loss.item()):
                raise NonFiniteLoss(f"loss became {loss.item()} during {'training' if training else 'validation'}")
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            total += loss.item() * x.shape[0]
            count += x.shape[0]
    return total / count


def train(
    train_entries: list[ManifestEntry],
    val_entries: list[ManifestEntry],
    labels: dict[str, ImpurityLabelSet],
    config: TrainConfig,
    out_dir: str | Path,
) -> TrainingRun:
    if not train_entries or not val_entries:
        raise EmptySet("train and val sets must be non-empty")
    overlap = {e.image_id for e in train_entries} & {e.image_id for e in val_entries}
    if overlap:
        raise SplitLeakage(f"{len(overlap)} image_ids appear in both train and val, e.g. {sorted(overlap)[:3]}")

    torch.manual_seed(config.seed)
    model = MultiLabelNet(config.backbone, N_CATEGORIES)
    pos_weight = _pos_weights(labels, [e.image_id for e in train_entries])
    criterion = torch.nn.BCEWithLogitsLoss(pos_weight=pos_weight)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    train_ds = LabeledImageDataset(train_entries, labels, config.input_size, config.augmentation)
    val_ds = LabeledImageDataset(val_entries, labels, config.input_size, "none")
    loader_gen = torch.Generator().manual_seed(config.seed)
    train_loader = DataLoader(
        train_ds, batch_size=config.batch_size, shuffle=True,
        num_workers=config.num_workers, generator=loader_gen,
    )
    val_loader = DataLoader(val_ds, batch_size=config.batch_size, num_workers=config.num_workers)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    best_val = float("inf")
    best_epoch = -1
    train_losses: list[float] = []
    val_losses: list[float] = []
    for epoch in range(config.max_epochs):
        train_losses.append(_epoch_loss(model, train_loader, criterion, optimizer))
        val_loss = _epoch_loss(model, val_loader, criterion)
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            torch.save(model.state_dict(), out_dir / "weights.pt")
        if epoch - best_epoch >= config.early_stop_patience:
            break

    history = {"train_losses": train_losses, "val_losses": val_losses, "selected_epoch": best_epoch}
    with open(out_dir / "history.json", "w", encoding="utf-8") as f:
        json.dump(history, f, indent=2)
    with open(out_dir / "config.json", "w", encoding="utf-8") as f:
        json.dump(asdict(config), f, indent=2)
    return TrainingRun(train_losses, val_losses, best_epoch, str(out_dir), config)


def load_checkpoint(ckpt_dir: str | Path) -> tuple[MultiLabelNet, TrainConfig]:
    ckpt_dir = Path(ckpt_dir)
    with open(ckpt_dir / "config.json", encoding="utf-8") as f:
        cfg_obj = json.load(f)
    cfg_obj["binarize_thresholds"] = tuple(cfg_obj["binarize_thresholds"])
    config = TrainConfig(**cfg_obj)
    model = MultiLabelNet(config.backbone, N_CATEGORIES)
    model.load_state_dict(torch.load(ckpt_dir / "weights.pt", weights_only=True))
    model.eval()
    return model, config


def predict(
    model: MultiLabelNet,
    config: TrainConfig,
    entries: list[ManifestEntry],
    batch_size: int = 32,
) -> list[PredictionRecord]:
    """Score a batch of images; undecodable images get an error record and
    the batch continues."""
    model.eval()
    transform = eval_transform(config.input_size)
    records: list[PredictionRecord] = []
    batch_x: list[torch.Tensor] = []
    batch_ids: list[str] = []

    def flush():
        if not batch_x:
            return
        with torch.no_grad():
            probs = torch.sigmoid(model(torch.stack(batch_x)))
        for image_id, p in zip(batch_ids, probs):
            plist = [float(v) for v in p]
            flags = [v >= t for v, t in zip(plist, config.binarize_thresholds)]
            records.append(PredictionRecord(image_id=image_id, probs=plist, flags=flags))
        batch_x.clear()
        batch_ids.clear()

    for entry in entries:
        try:
            with Image.open(entry.image_path) as img:
                x = transform(img.convert("RGB"))
        except Exception as e:
            flush()  # keep output order aligned with input order
            records.append(PredictionRecord(image_id=entry.image_id, error=str(e)))
            continue
        batch_x.append(x)
        batch_ids.append(entry.image_id)
        if len(batch_x) >= batch_size:
            flush()
    flush()
    return records


def evaluate(
    predictions: list[PredictionRecord], labels: dict[str, ImpurityLabelSet]
) -> dict:
    """Metrics report: one row per category plus the "any" aggregate.

    The aggregate row uses OR-ed flags and the max probability as score.
    AUC is null for single-class categories rather than fabricated.
    """
    usable = [r for r in predictions if r.error is None and r.image_id in labels]
    if not usable:
        raise EmptySet("no usable predictions with matching labels")
    rows = []
    for i, name in enumerate(CATEGORY_NAMES):
        rows.append(
            {"category": name}
            | binary_report_row(
                [r.probs[i] for r in usable],
                [r.flags[i] for r in usable],
                [labels[r.image_id].flags[i] for r in usable],
            )
        )
    rows.append(
        {"category": "any"}
        | binary_report_row(
            [max(r.probs) for r in usable],
            [any(r.flags) for r in usable],
            [labels[r.image_id].any for r in usable],
        )
    )
    return {"rows": rows, "n_evaluated": len(usable), "n_skipped": len(predictions) - len(usable)}


def emit_predictions(records: list[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r.to_json_obj()) + "\n")


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                out.append(
                    PredictionRecord(
                        image_id=obj["image_id"],
                        probs=obj.get("probs", []),
                        flags=obj.get("flags", []),
                        error=obj.get("error"),
                    )
                )
    return out

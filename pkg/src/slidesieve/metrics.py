"""Evaluation math: confusion metrics, ROC-AUC, and (conditional) Fréchet distance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


class MetricsError(Exception):
    pass


class LengthMismatch(MetricsError):
    pass


class DimensionMismatch(MetricsError):
    pass


class NonPSDError(MetricsError):
    pass


class TooFewSamples(MetricsError):
    pass


class NoSharedConditions(MetricsError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(pred_flags: Sequence[bool], truth_flags: Sequence[bool]) -> ConfusionCounts:
    if len(pred_flags) != len(truth_flags):
        raise LengthMismatch(f"{len(pred_flags)} predictions vs {len(truth_flags)} truths")
    if len(pred_flags) == 0:
        raise LengthMismatch("empty input")
    tp = fp = tn = fn = 0
    for p, t in zip(pred_flags, truth_flags):
        if t:
            if p:
                tp += 1
            else:
                fn += 1
        else:
            if p:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(c: ConfusionCounts) -> float | None:
    return (c.tp + c.tn) / c.total if c.total else None


def recall(c: ConfusionCounts) -> float | None:
    denom = c.tp + c.fn
    return c.tp / denom if denom else None


def specificity(c: ConfusionCounts) -> float | None:
    denom = c.tn + c.fp
    return c.tn / denom if denom else None


def precision(c: ConfusionCounts) -> float | None:
    denom = c.tp + c.fp
    return c.tp / denom if denom else None


def roc_auc(scores: Sequence[float], truth: Sequence[bool]) -> float | None:
    """Mann-Whitney AUC with midrank tie handling.

    Equals P(score_pos > score_neg) + 0.5 * P(tie) over all pos/neg pairs.
    Returns None when the input contains a single class.
    """
    if len(scores) != len(truth):
        raise LengthMismatch(f"{len(scores)} scores vs {len(truth)} truths")
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)  # midranks, O(n log n)
    rank_sum_pos = float(ranks[truth].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise DimensionMismatch(f"mean dim {self.mean.size} vs cov shape {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise NonPSDError("covariance not symmetric within 1e-8")


def estimate_stats(features: np.ndarray) -> GaussianStats:
    """Sample mean and unbiased (1/(n-1)) covariance, symmetrized."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[0] < 2:
        raise TooFewSamples(f"need an n x d matrix with n >= 2, got shape {features.shape}")
    mean = features.mean(axis=0)
    cov = np.cov(features, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, n=features.shape[0])


def _psd_sqrt(mat: np.ndarray, clamp: float = 1e-10) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() < -1e-6 * max(1.0, abs(vals.max())):
        raise NonPSDError(f"matrix has eigenvalue {vals.min():.3g} beyond tolerance")
    vals = np.where(vals < clamp, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).

    The cross-term sqrt is computed through the symmetrized product
    A^{1/2} B A^{1/2}, which is stable for near-singular covariances.
    """
    if a.mean.size != b.mean.size:
        raise DimensionMismatch(f"dim {a.mean.size} vs {b.mean.size}")
    a_half = _psd_sqrt(a.cov)
    inner = a_half @ b.cov @ a_half
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigh(inner)[0]
    vals = np.where(vals < 1e-10, 0.0, vals)
    tr_sqrt = float(np.sqrt(vals).sum())
    diff = a.mean - b.mean
    fid = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt)
    if fid < -1e-6:
        raise NonPSDError(f"distance {fid:.3g} below -1e-6, inputs are not valid moments")
    return max(fid, 0.0)


def conditional_fid(
    generated: Mapping[str, np.ndarray], reference: Mapping[str, np.ndarray]
) -> dict:
    """FID per shared condition key plus the unweighted mean over shared keys.

    Keys present on only one side are reported as skipped, not errors.
    """
    shared = sorted(set(generated) & set(reference))
    if not shared:
        raise NoSharedConditions("generated and reference share no condition keys")
    per_condition = {}
    for key in shared:
        per_condition[key] = frechet_distance(
            estimate_stats(generated[key]), estimate_stats(reference[key])
        )
    skipped = sorted((set(generated) | set(reference)) - set(shared))
    return {
        "per_condition": per_condition,
        "mean": sum(per_condition.values()) / len(per_condition),
        "skipped_conditions": skipped,
    }


def binary_report_row(
    scores: Sequence[float], pred_flags: Sequence[bool], truth_flags: Sequence[bool]
) -> dict:
    """One metrics row: accuracy, precision, recall, specificity, AUC (nullable)."""
    c = confusion(pred_flags, truth_flags)
    return {
        "accuracy": accuracy(c),
        "precision": precision(c),
        "recall": recall(c),
        "specificity": specificity(c),
        "auc": roc_auc(scores, truth_flags),
        "n": c.total,
        "n_positive": c.tp + c.fn,
    }

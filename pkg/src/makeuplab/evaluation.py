"""Mask-quality scoring: pooled pixel ROC curves and AUC, plus a harness
comparing several extraction methods on a shared ground-truth set."""
from __future__ import annotations

import json
import os
import traceback
from dataclasses import dataclass

import numpy as np

from .imaging import as_mask


@dataclass
class ROCResult:
    """Pooled ROC curve. thresholds[i] is the score cutoff producing point
    (fpr[i], tpr[i]) under the rule score >= threshold; the leading +inf
    threshold gives (0, 0) and the curve always ends at (1, 1)."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float
    n_pos: int
    n_neg: int

    def validate(self):
        if not (len(self.thresholds) == len(self.tpr) == len(self.fpr)):
            raise ValueError("curve arrays out of step")
        if (np.diff(self.tpr) < -1e-12).any() or (np.diff(self.fpr) < -1e-12).any():
            raise ValueError("ROC curve must be monotone")
        for arr, v0, v1 in ((self.tpr, 0.0, 1.0), (self.fpr, 0.0, 1.0)):
            if abs(arr[0] - v0) > 1e-12 or abs(arr[-1] - v1) > 1e-12:
                raise ValueError("curve endpoints must be (0,0) and (1,1)")
        if not (0.0 <= self.auc <= 1.0):
            raise ValueError("AUC out of range")


def _pool(pred_masks, gt_masks):
    if len(pred_masks) != len(gt_masks):
        raise ValueError("prediction and ground-truth lists differ in length")
    if len(pred_masks) == 0:
        raise ValueError("empty mask lists")
    scores, labels = [], []
    for pred, gt in zip(pred_masks, gt_masks):
        pred = as_mask(pred)
        gt = as_mask(gt)
        if pred.shape != gt.shape:
            raise ValueError("prediction/ground-truth dims differ")
        scores.append(pred.ravel().astype(np.float64))
        labels.append((gt >= 0.5).ravel())
    return np.concatenate(scores), np.concatenate(labels)


def roc(pred_masks, gt_masks) -> ROCResult:
    """Pooled per-pixel ROC over all images, AUC by trapezoidal integration.

    Ties share a single curve point, so the trapezoid over a tie block
    contributes the half-credit a pairwise-comparison count would give.
    """
    scores, labels = _pool(pred_masks, gt_masks)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: pooled ground truth is single-class")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    # indices where a run of equal scores ends
    last_of_run = np.nonzero(np.append(np.diff(s) != 0, True))[0]
    tp = np.cumsum(l)[last_of_run]
    fp = np.cumsum(~l)[last_of_run]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], s[last_of_run]])
    auc = float(np.trapezoid(tpr, fpr))
    result = ROCResult(thresholds=thresholds, tpr=tpr, fpr=fpr, auc=auc, n_pos=n_pos, n_neg=n_neg)
    result.validate()
    return result


def pairwise_auc(pred_masks, gt_masks) -> float:
    """Brute-force AUC: the probability a random positive pixel outscores a
    random negative one, ties counting half. Quadratic; oracle use only."""
    scores, labels = _pool(pred_masks, gt_masks)
    pos = scores[labels]
    neg = scores[~labels]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC undefined: pooled ground truth is single-class")
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (pos.size * neg.size))


def macro_auc(pred_masks, gt_masks):
    """Mean of per-image AUCs; images with single-class ground truth are
    skipped. Returns (mean_or_None, n_scored)."""
    vals = []
    for pred, gt in zip(pred_masks, gt_masks):
        try:
            vals.append(roc([pred], [gt]).auc)
        except ValueError:
            continue
    return (float(np.mean(vals)) if vals else None), len(vals)


def _decimate(arr, max_points=512):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.size <= max_points:
        return arr.tolist()
    idx = np.unique(np.linspace(0, arr.size - 1, max_points).round().astype(int))
    return arr[idx].tolist()


def compare_methods(samples, gt_masks, methods, out_dir=None, report_name="extraction_report"):
    """Score mask-producing methods against shared ground truth.

    samples: list of per-image inputs, passed as-is to each method callable.
    methods: dict or (name, callable) pairs; duplicate names are an error.
    A method that throws on any image is recorded under failures and skipped.
    Returns (report dict, {name: ROCResult}); with out_dir set, writes the
    JSON report and an ROC curve plot.
    """
    if len(samples) != len(gt_masks):
        raise ValueError("samples and ground-truth lists differ in length")
    pairs = list(methods.items()) if isinstance(methods, dict) else list(methods)
    if len(pairs) == 0:
        raise ValueError("need at least one method")
    names = [n for n, _ in pairs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate method names: {sorted(n for n in set(names) if names.count(n) > 1)}")

    report = {"methods": {}, "ranking": [], "failures": {}, "n_images": len(samples)}
    rocs = {}
    for name, fn in pairs:
        preds = []
        try:
            for sample in samples:
                preds.append(as_mask(fn(sample)))
        except Exception as exc:
            report["failures"][name] = f"{type(exc).__name__}: {exc}"
            traceback.print_exc()
            continue
        result = roc(preds, gt_masks)
        m_auc, m_n = macro_auc(preds, gt_masks)
        rocs[name] = result
        report["methods"][name] = {
            "auc": result.auc,
            "auc_macro": m_auc,
            "macro_images": m_n,
            "n_pos": result.n_pos,
            "n_neg": result.n_neg,
            "curve": {
                "fpr": _decimate(result.fpr),
                "tpr": _decimate(result.tpr),
            },
        }
    report["ranking"] = sorted(rocs, key=lambda n: rocs[n].auc, reverse=True)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, report_name + ".json"), "w") as f:
            json.dump(report, f, indent=2)
        _plot_curves(rocs, os.path.join(out_dir, report_name + ".png"))
    return report, rocs


def _plot_curves(rocs, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    for name in sorted(rocs, key=lambda n: rocs[n].auc, reverse=True):
        r = rocs[name]
        ax.plot(r.fpr, r.tpr, label=f"{name} (AUC {r.auc:.3f})")
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.8, label="chance")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("mask extraction ROC (pooled pixels)")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def format_auc_table(report) -> str:
    lines = [f"{'method':<12} {'AUC':>8} {'macro':>8}"]
    for name in report["ranking"]:
        m = report["methods"][name]
        macro = f"{m['auc_macro']:.4f}" if m["auc_macro"] is not None else "-"
        lines.append(f"{name:<12} {m['auc']:>8.4f} {macro:>8}")
    for name, err in report.get("failures", {}).items():
        lines.append(f"{name:<12} FAILED: {err}")
    return "\n".join(lines)

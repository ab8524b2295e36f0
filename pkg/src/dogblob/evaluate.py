"""Precision/recall scoring and backend parity statistics.

Matching follows the PASCAL VOC 2012 convention: circles become axis-aligned
bounding boxes, predictions are visited in descending response order, and
each claims the unmatched truth with the highest box IoU when that IoU meets
the threshold. Box extents use the inclusive pixel convention (side length
2r + 1), which is what exhaustive pixel counting yields on integer grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .detector import BlobSet, DetectionParams, Detector

__all__ = ["EvalReport", "ParityStats", "box_iou", "match_voc", "parity",
           "write_report_json", "write_parity_csv"]


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    iou_threshold: float
    matches: tuple[tuple[int, int, float], ...]  # (pred index, truth index, iou)


@dataclass(frozen=True)
class ParityStats:
    precision_a: np.ndarray = field(repr=False)
    recall_a: np.ndarray = field(repr=False)
    precision_b: np.ndarray = field(repr=False)
    recall_b: np.ndarray = field(repr=False)
    dp: np.ndarray = field(repr=False)
    dr: np.ndarray = field(repr=False)
    mean_dp: float
    mean_dr: float
    std_dp: float
    std_dr: float


def box_iou(x1: float, y1: float, r1: float, x2: float, y2: float, r2: float) -> float:
    """IoU of the circles' bounding boxes, inclusive-pixel side lengths."""
    iw = min(x1 + r1, x2 + r2) - max(x1 - r1, x2 - r2) + 1.0
    ih = min(y1 + r1, y2 + r2) - max(y1 - r1, y2 - r2) + 1.0
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    a1 = (2.0 * r1 + 1.0) ** 2
    a2 = (2.0 * r2 + 1.0) ** 2
    return inter / (a1 + a2 - inter)


def match_voc(
    preds: BlobSet,
    truths,
    iou_threshold: float = 0.5,
) -> EvalReport:
    """Greedy one-to-one matching of predictions to ground-truth circles.

    Empty denominators score 1.0 (an empty prediction set has perfect
    precision; an empty truth set has perfect recall), which keeps parity
    statistics defined on blank images.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    truths = list(truths)
    # blobs are stored response-descending with (y, x) tie-breaking already
    order = sorted(
        range(len(preds.blobs)),
        key=lambda i: (-preds.blobs[i].response, preds.blobs[i].y, preds.blobs[i].x),
    )
    matched_truth = [False] * len(truths)
    matches = []
    tp = 0
    for pi in order:
        b = preds.blobs[pi]
        best_iou = 0.0
        best_ti = -1
        for ti, t in enumerate(truths):
            if matched_truth[ti]:
                continue
            iou = box_iou(b.x, b.y, b.radius, t.x, t.y, t.r)
            if iou > best_iou:
                best_iou = iou
                best_ti = ti
        if best_ti >= 0 and best_iou >= iou_threshold:
            matched_truth[best_ti] = True
            matches.append((pi, best_ti, best_iou))
            tp += 1
    fp = len(preds.blobs) - tp
    fn = len(truths) - tp
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        iou_threshold=iou_threshold,
        matches=tuple(matches),
    )


def parity(
    imgs,
    params_a: DetectionParams,
    params_b: DetectionParams,
    truths_per_image,
    iou_threshold: float = 0.5,
) -> ParityStats:
    """Per-image precision/recall differences between two detector configs.

    Both parameter sets must share the sigma ladder; only backend or numeric
    options may differ, otherwise the comparison is not apples to apples.
    """
    ladder_a = (params_a.min_sigma, params_a.max_sigma, params_a.n_bin)
    ladder_b = (params_b.min_sigma, params_b.max_sigma, params_b.n_bin)
    if ladder_a != ladder_b:
        raise ValueError(f"parity requires one ladder, got {ladder_a} vs {ladder_b}")
    det_a = Detector(params_a)
    det_b = Detector(params_b)
    pa, ra, pb, rb = [], [], [], []
    for img, truths in zip(imgs, truths_per_image):
        rep_a = match_voc(det_a.run(img).blobs, truths, iou_threshold)
        rep_b = match_voc(det_b.run(img).blobs, truths, iou_threshold)
        pa.append(rep_a.precision)
        ra.append(rep_a.recall)
        pb.append(rep_b.precision)
        rb.append(rep_b.recall)
    pa, ra, pb, rb = (np.array(v) for v in (pa, ra, pb, rb))
    dp = pa - pb
    dr = ra - rb
    return ParityStats(
        precision_a=pa,
        recall_a=ra,
        precision_b=pb,
        recall_b=rb,
        dp=dp,
        dr=dr,
        mean_dp=float(dp.mean()) if dp.size else 0.0,
        mean_dr=float(dr.mean()) if dr.size else 0.0,
        std_dp=float(dp.std()) if dp.size else 0.0,
        std_dr=float(dr.std()) if dr.size else 0.0,
    )


def write_report_json(path, report: EvalReport) -> None:
    doc = {
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
        "precision": report.precision,
        "recall": report.recall,
        "iou_threshold": report.iou_threshold,
        "matches": [[p, t, iou] for p, t, iou in report.matches],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def write_parity_csv(path, stats: ParityStats, names=None) -> None:
    n = stats.dp.size
    names = list(names) if names is not None else [f"scene_{i:03d}" for i in range(n)]
    with open(path, "w") as f:
        f.write("image,precision_a,recall_a,precision_b,recall_b,dp,dr\n")
        for i in range(n):
            f.write(
                f"{names[i]},{float(stats.precision_a[i])!r},{float(stats.recall_a[i])!r},"
                f"{float(stats.precision_b[i])!r},{float(stats.recall_b[i])!r},"
                f"{float(stats.dp[i])!r},{float(stats.dr[i])!r}\n"
            )
        f.write(f"# mean_dp={stats.mean_dp!r} std_dp={stats.std_dp!r}\n")
        f.write(f"# mean_dr={stats.mean_dr!r} std_dr={stats.std_dr!r}\n")

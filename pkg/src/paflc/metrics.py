"""Object keypoint similarity and COCO-style average precision."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import PersonAnnotation, SkeletonSpec
from .errors import DomainError

__all__ = ["EvalConfig", "EvalReport", "compute_oks", "gt_scale_sq", "evaluate", "OKS_THRESHOLDS"]

OKS_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
BBOX_AREA_FACTOR = 0.53


@dataclass(frozen=True)
class EvalConfig:
    thresholds: tuple[float, ...] = OKS_THRESHOLDS
    medium_range: tuple[float, float] = (32.0**2, 96.0**2)
    max_dets: int = 20


@dataclass(frozen=True)
class EvalReport:
    """AP summary; values are NaN when no ground truth falls in the category."""

    ap: float
    ap50: float
    ap75: float
    ap_m: float
    ap_l: float
    per_threshold: tuple[float, ...] = field(default=())
    thresholds: tuple[float, ...] = OKS_THRESHOLDS

    def to_dict(self) -> dict:
        def clean(v):
            return None if math.isnan(v) else v

        return {
            "AP": clean(self.ap),
            "AP50": clean(self.ap50),
            "AP75": clean(self.ap75),
            "AP_M": clean(self.ap_m),
            "AP_L": clean(self.ap_l),
            "per_threshold": {f"{t:.2f}": clean(p) for t, p in zip(self.thresholds, self.per_threshold)},
        }

    def lines(self) -> list[str]:
        def fmt(v):
            return "nan" if math.isnan(v) else f"{v:.4f}"

        out = [f"{name:<6}{fmt(v)}" for name, v in
               (("AP", self.ap), ("AP50", self.ap50), ("AP75", self.ap75),
                ("AP_M", self.ap_m), ("AP_L", self.ap_l))]
        out += [f"AP@{t:.2f} {fmt(p)}" for t, p in zip(self.thresholds, self.per_threshold)]
        return out


def gt_scale_sq(gt: PersonAnnotation) -> float:
    """Squared object scale: the annotated area, else 0.53 x the labeled-keypoint bbox area."""
    if gt.area is not None:
        return gt.area
    pts = gt.xy[gt.labeled]
    if len(pts) == 0:
        return 0.0
    span = pts.max(axis=0) - pts.min(axis=0)
    return BBOX_AREA_FACTOR * float(span[0] * span[1])


def compute_oks(pred, gt: PersonAnnotation, skeleton: SkeletonSpec) -> float:
    labeled = gt.labeled
    if not labeled.any():
        raise DomainError("ground truth has no labeled keypoints")
    s2 = gt_scale_sq(gt)
    if not s2 > 0:
        raise DomainError("ground truth scale is zero")
    total = 0.0
    for i in np.flatnonzero(labeled):
        p = pred.parts[i]
        if p is None:
            continue
        dx = p[0] - gt.xy[i, 0]
        dy = p[1] - gt.xy[i, 1]
        k = skeleton.oks_kappas[i]
        total += math.exp(-(dx * dx + dy * dy) / (2.0 * s2 * k * k))
    return total / int(labeled.sum())


def _pred_area(pred) -> float:
    pts = [p[:2] for p in pred.parts if p is not None]
    if not pts:
        return 0.0
    a = np.asarray(pts)
    span = a.max(axis=0) - a.min(axis=0)
    return float(span[0] * span[1])


def _evaluate_image(preds, gts, skeleton, area_rng, thresholds, max_dets):
    """Match one image; returns (scores, matched[T, D], ignored[T, D], n_counted_gt)."""
    gts = [g for g in gts if g.labeled.any()]
    areas = [gt_scale_sq(g) for g in gts]
    lo, hi = area_rng
    g_ignore = [not (lo < a <= hi) for a in areas]
    g_order = sorted(range(len(gts)), key=lambda k: g_ignore[k])  # stable: counted first
    gts = [gts[k] for k in g_order]
    g_ignore = [g_ignore[k] for k in g_order]

    d_order = sorted(range(len(preds)), key=lambda k: -preds[k].score)[:max_dets]
    dts = [preds[k] for k in d_order]
    oks = np.zeros((len(dts), len(gts)))
    for d, p in enumerate(dts):
        for g, gt in enumerate(gts):
            oks[d, g] = compute_oks(p, gt, skeleton)

    T, D = len(thresholds), len(dts)
    matched = np.zeros((T, D), dtype=bool)
    ignored = np.zeros((T, D), dtype=bool)
    for t, thr in enumerate(thresholds):
        g_taken = [False] * len(gts)
        for d in range(D):
            best, m = min(thr, 1 - 1e-10), -1
            for g in range(len(gts)):
                if g_taken[g]:
                    continue
                if m > -1 and not g_ignore[m] and g_ignore[g]:
                    break
                if oks[d, g] < best:
                    continue
                best, m = oks[d, g], g
            if m == -1:
                continue
            g_taken[m] = True
            matched[t, d] = True
            ignored[t, d] = g_ignore[m]
    out_of_range = np.array([not (lo < _pred_area(p) <= hi) for p in dts], dtype=bool)
    ignored |= ~matched & out_of_range[None, :]
    return [p.score for p in dts], matched, ignored, int(sum(not i for i in g_ignore))


def _average_precision(scores, matched, ignored, n_gt):
    """101-point interpolated AP per threshold; NaN when there is no counted ground truth."""
    T = matched.shape[0]
    if n_gt == 0:
        return np.full(T, np.nan)
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="mergesort")
    ap = np.zeros(T)
    for t in range(T):
        m = matched[t, order]
        ig = ignored[t, order]
        tp = np.cumsum(m & ~ig, dtype=np.float64)
        fp = np.cumsum(~m & ~ig, dtype=np.float64)
        if len(tp) == 0:
            continue
        recall = tp / n_gt
        precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
        precision = np.maximum.accumulate(precision[::-1])[::-1]
        idx = np.searchsorted(recall, RECALL_POINTS, side="left")
        q = np.zeros(len(RECALL_POINTS))
        ok = idx < len(precision)
        q[ok] = precision[idx[ok]]
        ap[t] = q.mean()
    return ap


def evaluate(preds, gts, skeleton: SkeletonSpec, cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Evaluate predictions against annotations, both keyed by image id.

    ``preds`` maps image id -> list of :class:`~paflc.parser.PoseResult`,
    ``gts`` maps image id -> list of :class:`PersonAnnotation`.  Ground truth
    without labeled keypoints is skipped.
    """
    if set(preds) != set(gts):
        missing = sorted(set(gts) ^ set(preds), key=str)
        raise DomainError(f"prediction and ground-truth image ids differ: {missing[:10]}")
    ranges = {
        "all": (-math.inf, math.inf),
        "medium": cfg.medium_range,
        "large": (cfg.medium_range[1], math.inf),
    }
    per_range = {}
    for name, rng in ranges.items():
        scores, matched, ignored, n_gt = [], [], [], 0
        for image_id in sorted(gts, key=str):
            s, m, ig, n = _evaluate_image(preds[image_id], gts[image_id], skeleton, rng, cfg.thresholds, cfg.max_dets)
            scores.extend(s)
            matched.append(m)
            ignored.append(ig)
            n_gt += n
        T = len(cfg.thresholds)
        matched = np.concatenate(matched, axis=1) if matched else np.zeros((T, 0), bool)
        ignored = np.concatenate(ignored, axis=1) if ignored else np.zeros((T, 0), bool)
        per_range[name] = _average_precision(scores, matched, ignored, n_gt)

    per_t = per_range["all"]
    th = list(cfg.thresholds)

    def at(v):
        return float(per_t[th.index(v)]) if v in th else math.nan

    return EvalReport(
        ap=float(np.mean(per_t)),
        ap50=at(0.5),
        ap75=at(0.75),
        ap_m=float(np.mean(per_range["medium"])),
        ap_l=float(np.mean(per_range["large"])),
        per_threshold=tuple(float(v) for v in per_t),
        thresholds=tuple(cfg.thresholds),
    )

"""Shared builders for the test suite."""
import math
from pathlib import Path

import numpy as np

from paflc import GridSpec, LabelSet, PersonAnnotation, SkeletonSpec

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

# two parts, one limb: small enough for hand-computed oracles
PAIR = SkeletonSpec(("a", "b"), ((0, 1),), (), (0.1, 0.1))


def random_labelset(rng, num_parts=3, num_limbs=2, height=6, width=7, stride=8.0, ties=False, masked=True):
    """Random float32 labels; with ``ties`` values come from a tiny set so equal norms occur."""
    grid = GridSpec(width, height, stride)
    if ties:
        levels = np.array([0.0, 0.25, 0.5, 1.0], dtype=np.float32)
        maps = levels[rng.integers(0, 4, (num_parts, height, width))]
        comps = np.array([-1.0, -0.6, 0.0, 0.6, 0.8, 1.0], dtype=np.float32)
        pafs = comps[rng.integers(0, 6, (num_limbs, 2, height, width))]
    else:
        maps = rng.random((num_parts, height, width), dtype=np.float32)
        pafs = rng.uniform(-1, 1, (num_limbs, 2, height, width)).astype(np.float32)
    mask = rng.integers(0, 2, (height, width), dtype=np.uint8) if masked else None
    return LabelSet(grid, maps, pafs, mask)


def pair_person(a, b, state=(2, 2)):
    return PersonAnnotation(np.array([a, b], dtype=float), np.array(state))


def brute_force_ap(preds, gts, skeleton, thresholds, max_dets=20):
    """Per-threshold AP by direct enumeration, written independently of the evaluator."""
    from paflc.metrics import compute_oks

    out = []
    for t in thresholds:
        records, n_gt = [], 0
        for image_id in sorted(gts, key=str):
            g_list = [g for g in gts[image_id] if g.labeled.any()]
            n_gt += len(g_list)
            dets = sorted(preds[image_id], key=lambda p: -p.score)[:max_dets]
            taken = set()
            for d in dets:
                cands = [(compute_oks(d, g, skeleton), k) for k, g in enumerate(g_list) if k not in taken]
                cands = [c for c in cands if c[0] >= t]
                if cands:
                    best = max(cands)
                    taken.add(best[1])
                records.append((d.score, bool(cands)))
        if n_gt == 0:
            out.append(float("nan"))
            continue
        records.sort(key=lambda r: -r[0])
        tp = 0
        prec, rec = [], []
        for k, (_, hit) in enumerate(records, start=1):
            tp += hit
            prec.append(tp / k)
            rec.append(tp / n_gt)
        total = 0.0
        for r in np.linspace(0, 1, 101):
            reach = [p for p, q in zip(prec, rec) if q >= r]
            total += max(reach) if reach else 0.0
        out.append(total / 101)
    return out


def brute_greedy(scores, min_score):
    """Reference: repeatedly take the best free pair (lowest a, then b on ties)."""
    scores = np.asarray(scores, dtype=float)
    free_a, free_b = set(range(scores.shape[0])), set(range(scores.shape[1]))
    out = []
    while True:
        best = None
        for a in sorted(free_a):
            for b in sorted(free_b):
                s = scores[a, b]
                if math.isnan(s) or s < min_score:
                    continue
                if best is None or s > best[2]:
                    best = (a, b, s)
        if best is None:
            return out
        out.append(best)
        free_a.discard(best[0])
        free_b.discard(best[1])

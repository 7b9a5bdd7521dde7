"""Decode confidence maps and PAFs into per-person skeletons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import GridSpec, LabelSet, SkeletonSpec
from .errors import DomainError

__all__ = [
    "ParserConfig",
    "PartCandidate",
    "PoseResult",
    "find_peaks",
    "limb_score",
    "greedy_match",
    "parse_poses",
]


@dataclass(frozen=True)
class ParserConfig:
    peak_threshold: float = 0.1
    n_samples: int = 10
    min_limb_score: float = 0.05
    # fraction of line-integral samples whose projection must be positive
    min_positive_fraction: float = 0.8
    min_parts: int = 1
    refine: bool = True

    def __post_init__(self):
        if not 0.0 <= self.peak_threshold <= 1.0:
            raise DomainError("peak_threshold must lie in [0, 1]")
        if self.n_samples < 2:
            raise DomainError("n_samples must be at least 2")
        if self.min_parts < 1:
            raise DomainError("min_parts must be at least 1")


@dataclass(frozen=True)
class PartCandidate:
    """Detected part location in continuous grid coordinates."""

    part: int
    x: float
    y: float
    score: float

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class PoseResult:
    """One decoded person.

    ``parts[j]`` is ``(x, y, score)`` in image pixels or ``None``.  The
    instance score is the mean part score plus the mean accepted limb score.
    """

    parts: tuple[Optional[tuple[float, float, float]], ...]
    score: float
    candidate_ids: tuple[int, ...] = ()
    limb_scores: tuple[float, ...] = ()

    @property
    def num_parts(self) -> int:
        return sum(p is not None for p in self.parts)

    @classmethod
    def from_annotation(cls, person, score=1.0) -> "PoseResult":
        """Prediction that reproduces an annotation exactly (labeled parts only)."""
        parts = tuple(
            (float(x), float(y), 1.0) if v > 0 else None
            for (x, y), v in zip(person.xy, person.state)
        )
        return cls(parts, float(score))

    def to_json(self) -> dict:
        return {
            "parts": [None if p is None else [p[0], p[1], p[2]] for p in self.parts],
            "score": self.score,
        }

    @classmethod
    def from_json(cls, obj) -> "PoseResult":
        parts = tuple(None if p is None else (float(p[0]), float(p[1]), float(p[2])) for p in obj["parts"])
        return cls(parts, float(obj["score"]))


def _refine(values, row, col):
    h, w = values.shape
    c = values[row, col]
    dx = dy = 0.0
    if 0 < col < w - 1:
        dx = _vertex(values[row, col - 1], c, values[row, col + 1])
    if 0 < row < h - 1:
        dy = _vertex(values[row - 1, col], c, values[row + 1, col])
    return col + dx, row + dy


def _vertex(left, center, right):
    denom = left - 2.0 * center + right
    if denom >= 0:
        return 0.0
    return float(min(0.5, max(-0.5, 0.5 * (left - right) / denom)))


def find_peaks(field, threshold: float, part: int = 0, refine: bool = True) -> list[PartCandidate]:
    """Local maxima of a confidence map at or above ``threshold``.

    A cell is a peak when it beats its 8 neighbours; on an exact plateau only
    the first cell in row-major order is kept.  Positions are refined with a
    per-axis quadratic fit through the 3x3 neighbourhood.  Output is ordered
    by descending score, then row-major position.
    """
    if not 0.0 <= threshold <= 1.0:
        raise DomainError(f"threshold must lie in [0, 1], got {threshold}")
    values = np.asarray(getattr(field, "values", field), dtype=np.float64)
    rows, cols = _kernels.find_local_peaks(values, threshold)
    out = []
    for r, c in zip(rows.tolist(), cols.tolist()):
        x, y = _refine(values, r, c) if refine else (float(c), float(r))
        out.append((-values[r, c], r, c, PartCandidate(part, float(x), float(y), float(values[r, c]))))
    out.sort(key=lambda t: t[:3])
    return [t[3] for t in out]


def limb_score(paf, a: PartCandidate, b: PartCandidate, n_samples: int = 10) -> float:
    """Mean of the field projected on the unit direction a->b at ``n_samples`` points."""
    values = np.asarray(getattr(paf, "values", paf))
    scores, _ = _kernels.limb_scores(values, [a.pos], [b.pos], n_samples)
    return float(scores[0, 0])


def greedy_match(cands_a, cands_b, scores, min_score: float) -> list[tuple[int, int, float]]:
    """Accept pairs in descending score order while both endpoints are free.

    Ties break on the lower ``index_a`` then the lower ``index_b``; NaN
    scores never match.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(len(cands_a), len(cands_b))
    order = sorted(
        (-s, i, j)
        for (i, j), s in np.ndenumerate(scores)
        if not math.isnan(s) and s >= min_score
    )
    used_a, used_b, out = set(), set(), []
    for neg, i, j in order:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out.append((i, j, -neg))
    return out


class _Clusters:
    def __init__(self, n):
        self.parent = list(range(n))
        self.parts = [dict() for _ in range(n)]
        self.limbs = [[] for _ in range(n)]

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def add_edge(self, a, b, score):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            self.limbs[ra].append(score)
            return True
        if self.parts[ra].keys() & self.parts[rb].keys():
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.parts[ra].update(self.parts[rb])
        self.limbs[ra].extend(self.limbs[rb])
        self.limbs[ra].append(score)
        self.parts[rb], self.limbs[rb] = {}, []
        return True


def parse_poses(labels, skeleton: SkeletonSpec, cfg: ParserConfig = ParserConfig(), grid: GridSpec | None = None):
    """Group part candidates into people.

    Candidates come from :func:`find_peaks`, every candidate pair of each limb
    type is scored by :func:`limb_score` (pairs with too few positive samples
    are discarded) and matched by :func:`greedy_match`.  Accepted connections
    are then merged into people in descending score order; a connection that
    would give a person two candidates of the same part is dropped, so the
    stronger limb wins.  Returns :class:`PoseResult` objects in image pixels,
    ordered by descending instance score.
    """
    if isinstance(labels, LabelSet):
        maps, pafs, grid = labels.maps, labels.pafs, labels.grid
    else:
        maps, pafs = labels
        maps, pafs = np.asarray(maps), np.asarray(pafs)
        grid = grid or GridSpec(maps.shape[2], maps.shape[1], 1.0)
    if maps.shape[0] != skeleton.num_parts or pafs.shape[0] != skeleton.num_limbs:
        raise DomainError(
            f"labels have J={maps.shape[0]}, C={pafs.shape[0]}; skeleton expects "
            f"J={skeleton.num_parts}, C={skeleton.num_limbs}"
        )

    cands: list[PartCandidate] = []
    by_part: list[list[int]] = []
    for j in range(skeleton.num_parts):
        found = find_peaks(maps[j], cfg.peak_threshold, part=j, refine=cfg.refine)
        by_part.append(list(range(len(cands), len(cands) + len(found))))
        cands.extend(found)

    edges = []
    for c, (j1, j2) in enumerate(skeleton.limbs):
        ia, ib = by_part[j1], by_part[j2]
        if not ia or not ib:
            continue
        pa = [cands[i].pos for i in ia]
        pb = [cands[i].pos for i in ib]
        scores, fracs = _kernels.limb_scores(pafs[c], pa, pb, cfg.n_samples)
        scores = np.where(fracs >= cfg.min_positive_fraction, scores, np.nan)
        for a, b, s in greedy_match(ia, ib, scores, cfg.min_limb_score):
            edges.append((-s, c, ia[a], ib[b]))
    edges.sort()

    clusters = _Clusters(len(cands))
    for k, cand in enumerate(cands):
        clusters.parts[k][cand.part] = k
    for neg, _, a, b in edges:
        clusters.add_edge(a, b, -neg)

    results = []
    for root in range(len(cands)):
        if clusters.find(root) != root or len(clusters.parts[root]) < cfg.min_parts:
            continue
        members = clusters.parts[root]
        parts, ids = [], []
        for j in range(skeleton.num_parts):
            k = members.get(j)
            if k is None:
                parts.append(None)
                ids.append(-1)
                continue
            x, y = grid.to_image(cands[k].x, cands[k].y)
            parts.append((float(x), float(y), cands[k].score))
            ids.append(k)
        limb = clusters.limbs[root]
        part_scores = [cands[k].score for k in members.values()]
        score = float(np.mean(part_scores)) + (float(np.mean(limb)) if limb else 0.0)
        results.append((-score, min(members.values()), PoseResult(tuple(parts), score, tuple(ids), tuple(limb))))
    results.sort(key=lambda t: t[:2])
    return [t[2] for t in results]

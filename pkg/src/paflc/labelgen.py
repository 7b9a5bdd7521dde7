"""Ground-truth label generation: Gaussian confidence maps, PAFs and the ignore mask."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import GridSpec, LabelSet, PersonAnnotation, SkeletonSpec
from .errors import DomainError

__all__ = [
    "LabelGenConfig",
    "LabelDiagnostics",
    "gen_confidence_maps",
    "gen_pafs",
    "gen_ignore_mask",
    "paf_accumulators",
    "paf_coverage",
    "generate_labels",
]

DEFAULT_STRIDE = 8.0
DEFAULT_SIGMA_PX = 7.0
GAUSSIAN_TRUNCATE = 3.0
DEGENERATE_LIMB_EPS = 1e-9


@dataclass(frozen=True)
class LabelGenConfig:
    """Label grid plus Gaussian spread and PAF half-width, both in grid cells.

    ``sigma`` defaults to 7 image pixels expressed in cells (``7 / stride``).
    """

    grid: GridSpec
    sigma: float | None = None
    limb_width: float = 1.0

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", DEFAULT_SIGMA_PX / self.grid.stride)
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.limb_width > 0:
            raise DomainError(f"limb_width must be positive, got {self.limb_width}")

    @classmethod
    def for_image(cls, width, height, stride=DEFAULT_STRIDE, sigma=None, limb_width=1.0):
        return cls(GridSpec.for_image(width, height, stride), sigma, limb_width)


@dataclass
class LabelDiagnostics:
    """Tally of limb instances that produced no PAF."""

    missing_endpoint: int = 0
    degenerate: int = 0
    per_limb_missing: dict = field(default_factory=dict)

    def merge(self, other: "LabelDiagnostics"):
        self.missing_endpoint += other.missing_endpoint
        self.degenerate += other.degenerate
        for c, n in other.per_limb_missing.items():
            self.per_limb_missing[c] = self.per_limb_missing.get(c, 0) + n


def _check_parts(persons, skeleton):
    for p in persons:
        if p.num_parts != skeleton.num_parts:
            raise DomainError(
                f"annotation has {p.num_parts} keypoints, skeleton expects {skeleton.num_parts}"
            )


def gen_confidence_maps(
    persons: list[PersonAnnotation], skeleton: SkeletonSpec, cfg: LabelGenConfig
) -> np.ndarray:
    """Per-part maps ``(J, H, W)`` float32: max over persons of unit-peak Gaussians."""
    _check_parts(persons, skeleton)
    grid = cfg.grid
    out = np.zeros((skeleton.num_parts, grid.height, grid.width), dtype=np.float32)
    parts, centers = [], []
    for p in persons:
        idx = np.flatnonzero(p.labeled)
        gx, gy = grid.to_grid(p.xy[idx, 0], p.xy[idx, 1])
        parts.append(idx)
        centers.append(np.stack([gx, gy], axis=1))
    if parts:
        _kernels.gaussian_maps(
            out, np.concatenate(parts), np.concatenate(centers), cfg.sigma, GAUSSIAN_TRUNCATE
        )
    return out


def _limb_segments(persons, skeleton, grid, diagnostics):
    ids, segs = [], []
    for p in persons:
        for c, (j1, j2) in enumerate(skeleton.limbs):
            if not (p.labeled[j1] and p.labeled[j2]):
                if diagnostics is not None and (p.labeled[j1] or p.labeled[j2]):
                    diagnostics.missing_endpoint += 1
                    diagnostics.per_limb_missing[c] = diagnostics.per_limb_missing.get(c, 0) + 1
                continue
            (x1, y1), (x2, y2) = p.xy[j1], p.xy[j2]
            g1 = grid.to_grid(x1, y1)
            g2 = grid.to_grid(x2, y2)
            if np.hypot(g2[0] - g1[0], g2[1] - g1[1]) <= DEGENERATE_LIMB_EPS:
                if diagnostics is not None:
                    diagnostics.degenerate += 1
                continue
            ids.append(c)
            segs.append((g1[0], g1[1], g2[0], g2[1]))
    return np.asarray(ids, dtype=np.int64), np.asarray(segs, dtype=np.float64).reshape(-1, 4)


def paf_accumulators(persons, skeleton, cfg, diagnostics=None):
    """Unnormalized vector sums ``(C, 2, H, W)`` and per-cell instance counts ``(C, H, W)``."""
    _check_parts(persons, skeleton)
    grid = cfg.grid
    sums = np.zeros((skeleton.num_limbs, 2, grid.height, grid.width), dtype=np.float64)
    counts = np.zeros((skeleton.num_limbs, grid.height, grid.width), dtype=np.int32)
    ids, segs = _limb_segments(persons, skeleton, grid, diagnostics)
    if len(ids):
        _kernels.paf_accumulate(sums, counts, ids, segs, cfg.limb_width)
    return sums, counts


def gen_pafs(
    persons: list[PersonAnnotation],
    skeleton: SkeletonSpec,
    cfg: LabelGenConfig,
    diagnostics: LabelDiagnostics | None = None,
) -> np.ndarray:
    """Per-limb fields ``(C, 2, H, W)`` float32.

    Cells inside a limb's rectangle hold the unit vector from its first to
    its second part; where several instances of one limb type overlap the
    vectors are averaged.  Limbs with an unannotated endpoint generate
    nothing; those with exactly one annotated endpoint, and degenerate
    zero-length limbs, are tallied in ``diagnostics``.
    """
    sums, counts = paf_accumulators(persons, skeleton, cfg, diagnostics)
    covered = counts > 0
    out = np.zeros(sums.shape, dtype=np.float64)
    for ch in (0, 1):
        np.divide(sums[:, ch], counts, out=out[:, ch], where=covered)
    return out.astype(np.float32)


def paf_coverage(persons, skeleton, cfg) -> np.ndarray:
    """Number of limb instances covering each cell, per limb type ``(C, H, W)``."""
    return paf_accumulators(persons, skeleton, cfg)[1]


def gen_ignore_mask(ignore_regions, grid: GridSpec) -> np.ndarray:
    """``(H, W)`` uint8 mask: 0 where a cell center lies inside any region, else 1."""
    mask = np.ones(grid.shape, dtype=np.uint8)
    if not ignore_regions:
        return mask
    xs, ys = grid.to_image(np.arange(grid.width), np.arange(grid.height))
    px, py = np.meshgrid(xs, ys)
    for region in ignore_regions:
        mask[region.contains(px, py)] = 0
    return mask


def generate_labels(
    persons, ignore_regions, skeleton: SkeletonSpec, cfg: LabelGenConfig,
    diagnostics: LabelDiagnostics | None = None,
) -> LabelSet:
    return LabelSet(
        cfg.grid,
        gen_confidence_maps(persons, skeleton, cfg),
        gen_pafs(persons, skeleton, cfg, diagnostics),
        gen_ignore_mask(ignore_regions, cfg.grid),
    )

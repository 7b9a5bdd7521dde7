"""Ignore regions: polygons and uncompressed run-length masks in image pixels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["Polygon", "RleMask", "region_contains", "transform_region"]


@dataclass(frozen=True, eq=False)
class Polygon:
    """Closed polygon in image pixels; self-intersections follow the even-odd rule."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) < 3:
            raise DomainError(f"polygon needs at least 3 vertices, got {len(v)}")
        if not np.isfinite(v).all():
            raise DomainError("polygon vertices must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def contains(self, px, py) -> np.ndarray:
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
        v = self.vertices
        for (xi, yi), (xj, yj) in zip(v, np.roll(v, 1, axis=0)):
            crosses = (yi > py) != (yj > py)
            if not crosses.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                x_hit = xi + (py - yi) * (xj - xi) / (yj - yi)
            inside ^= crosses & (px < x_hit)
        return inside

    def __eq__(self, other):
        if not isinstance(other, Polygon):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RleMask:
    """Uncompressed COCO run-length mask.

    ``counts`` alternate background/foreground runs over the column-major
    (Fortran order) flattening of a ``height x width`` pixel mask, starting
    with background.  ``to_source`` maps current image coordinates back into
    the mask's own pixel frame, so geometric augmentation composes without
    resampling the mask.
    """

    height: int
    width: int
    counts: tuple[int, ...]
    to_source: np.ndarray = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DomainError("RLE counts must be non-negative")
        if sum(counts) != self.height * self.width:
            raise DomainError(
                f"RLE counts sum to {sum(counts)}, expected {self.height * self.width}"
            )
        object.__setattr__(self, "counts", counts)
        m = np.eye(3) if self.to_source is None else np.asarray(self.to_source, dtype=np.float64)
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "to_source", m)

    def decode(self) -> np.ndarray:
        flat = np.zeros(self.height * self.width, dtype=bool)
        pos = 0
        for k, run in enumerate(self.counts):
            if k % 2:
                flat[pos:pos + run] = True
            pos += run
        return flat.reshape((self.height, self.width), order="F")

    def contains(self, px, py) -> np.ndarray:
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        m = self.to_source
        sx = m[0, 0] * px + m[0, 1] * py + m[0, 2]
        sy = m[1, 0] * px + m[1, 1] * py + m[1, 2]
        col = np.floor(sx).astype(np.int64)
        row = np.floor(sy).astype(np.int64)
        ok = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        out = np.zeros(ok.shape, dtype=bool)
        out[ok] = self.decode()[row[ok], col[ok]]
        return out

    def __eq__(self, other):
        if not isinstance(other, RleMask):
            return NotImplemented
        return (
            (self.height, self.width, self.counts) == (other.height, other.width, other.counts)
            and np.array_equal(self.to_source, other.to_source)
        )

    __hash__ = None


def region_contains(region, px, py) -> np.ndarray:
    return region.contains(px, py)


def transform_region(region, matrix):
    """Apply the 3x3 affine ``matrix`` (old image -> new image coordinates)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if isinstance(region, Polygon):
        v = region.vertices
        out = v @ matrix[:2, :2].T + matrix[:2, 2]
        return Polygon(out)
    if isinstance(region, RleMask):
        return RleMask(
            region.height, region.width, region.counts, region.to_source @ np.linalg.inv(matrix)
        )
    raise TypeError(f"unsupported region type {type(region).__name__}")

"""Shared geometric types, label containers and the bilinear sampler.

Coordinate conventions
----------------------
Image coordinates are continuous pixels with the origin at the top-left
corner of the image, x to the right and y down.  Grid cell ``(i, j)``
(column ``i``, row ``j``) represents the image point
``((i + 0.5) * stride, (j + 0.5) * stride)``, i.e. grid coordinates index
cell centers.  All label arrays are stored row-major as ``[..., row, col]``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeMismatchError

__all__ = [
    "GridSpec",
    "Visibility",
    "SkeletonSpec",
    "PersonAnnotation",
    "ScalarField",
    "VectorField",
    "BinaryMask",
    "LabelSet",
    "sample_bilinear",
    "coco17_skeleton",
    "default_skeleton",
    "COCO_PART_NAMES",
    "Scene",
]


@dataclass(frozen=True)
class GridSpec:
    """Label grid geometry: ``width`` x ``height`` cells of ``stride`` image pixels."""

    width: int
    height: int
    stride: float = 8.0

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise DomainError("grid width and height must be integers")
        if self.width < 1 or self.height < 1:
            raise DomainError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not (self.stride > 0 and math.isfinite(self.stride)):
            raise DomainError(f"stride must be positive and finite, got {self.stride}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "stride", float(self.stride))

    @classmethod
    def for_image(cls, image_width, image_height, stride=8.0) -> "GridSpec":
        """Smallest grid whose cells cover an image of the given size."""
        return cls(
            max(1, math.ceil(image_width / stride)),
            max(1, math.ceil(image_height / stride)),
            stride,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def to_image(self, gx, gy):
        s = self.stride
        return (np.asarray(gx) + 0.5) * s, (np.asarray(gy) + 0.5) * s

    def to_grid(self, x, y):
        s = self.stride
        return np.asarray(x) / s - 0.5, np.asarray(y) / s - 0.5

    def cell_of(self, x, y) -> tuple[int, int]:
        """Index ``(col, row)`` of the cell containing image point ``(x, y)``."""
        return int(math.floor(x / self.stride)), int(math.floor(y / self.stride))


class Visibility(enum.IntEnum):
    """Keypoint annotation state; values match the COCO ``v`` flag."""

    ABSENT = 0
    OCCLUDED = 1
    VISIBLE = 2


COCO_PART_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)
# COCO per-keypoint sigmas; the OKS falloff constant used here is 2 * sigma.
_COCO_SIGMAS = (
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
    0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089,
)
_COCO_FLIP_PAIRS = ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16))


@dataclass(frozen=True)
class SkeletonSpec:
    """Part list, directed limb list, left/right flip pairs and OKS constants."""

    part_names: tuple[str, ...]
    limbs: tuple[tuple[int, int], ...]
    flip_pairs: tuple[tuple[int, int], ...] = ()
    oks_kappas: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "part_names", tuple(self.part_names))
        object.__setattr__(self, "limbs", tuple((int(a), int(b)) for a, b in self.limbs))
        object.__setattr__(self, "flip_pairs", tuple((int(a), int(b)) for a, b in self.flip_pairs))
        kappas = tuple(float(k) for k in self.oks_kappas) or (0.1,) * len(self.part_names)
        object.__setattr__(self, "oks_kappas", kappas)

        n = len(self.part_names)
        if n == 0:
            raise DomainError("skeleton needs at least one part")
        if len(set(self.part_names)) != n:
            raise DomainError("duplicate part names")
        for a, b in self.limbs:
            if not (0 <= a < n and 0 <= b < n):
                raise DomainError(f"limb ({a}, {b}) references a part outside [0, {n})")
            if a == b:
                raise DomainError(f"limb ({a}, {b}) connects a part to itself")
        if len(set(self.limbs)) != len(self.limbs):
            raise DomainError("duplicate limbs")
        seen = set()
        for a, b in self.flip_pairs:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise DomainError(f"invalid flip pair ({a}, {b})")
            if a in seen or b in seen:
                raise DomainError("flip pairs must be disjoint")
            seen.update((a, b))
        if len(self.oks_kappas) != n:
            raise DomainError(f"need {n} OKS constants, got {len(self.oks_kappas)}")
        if any(not (k > 0) for k in self.oks_kappas):
            raise DomainError("OKS constants must be positive")

    @property
    def num_parts(self) -> int:
        return len(self.part_names)

    @property
    def num_limbs(self) -> int:
        return len(self.limbs)

    def index(self, name: str) -> int:
        return self.part_names.index(name)

    def flip_permutation(self) -> np.ndarray:
        """Index array ``perm`` such that flipped part ``j`` takes the data of ``perm[j]``."""
        perm = np.arange(self.num_parts)
        for a, b in self.flip_pairs:
            perm[a], perm[b] = b, a
        return perm


def coco17_skeleton() -> SkeletonSpec:
    """Plain 17-part COCO skeleton with the 19 COCO limbs oriented trunk-outward."""
    limbs = (
        (5, 6), (5, 7), (7, 9), (6, 8), (8, 10), (5, 11), (6, 12), (11, 12),
        (11, 13), (13, 15), (12, 14), (14, 16), (0, 1), (0, 2), (1, 3), (2, 4),
        (3, 5), (4, 6), (1, 2),
    )
    return SkeletonSpec(
        COCO_PART_NAMES, limbs, _COCO_FLIP_PAIRS, tuple(2 * s for s in _COCO_SIGMAS)
    )


def default_skeleton() -> SkeletonSpec:
    """18 parts (COCO order plus a synthesized neck at index 17) and 19 limbs.

    The limb list follows the usual bottom-up convention: a tree rooted at
    the neck plus two redundant shoulder-to-ear connections.
    """
    NECK = 17
    limbs = (
        (NECK, 12), (12, 14), (14, 16),
        (NECK, 11), (11, 13), (13, 15),
        (NECK, 6), (6, 8), (8, 10), (6, 4),
        (NECK, 5), (5, 7), (7, 9), (5, 3),
        (NECK, 0), (0, 2), (0, 1), (2, 4), (1, 3),
    )
    kappas = tuple(2 * s for s in _COCO_SIGMAS) + (2 * 0.079,)
    return SkeletonSpec(COCO_PART_NAMES + ("neck",), limbs, _COCO_FLIP_PAIRS, kappas)


def _frozen(a) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PersonAnnotation:
    """One person's keypoints in image pixels with a per-keypoint :class:`Visibility`.

    Coordinates of absent keypoints are meaningless and conventionally 0.
    """

    xy: np.ndarray
    state: np.ndarray
    area: float | None = None

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        state = np.asarray(self.state, dtype=np.int8).reshape(-1)
        if len(xy) != len(state):
            raise DomainError(f"{len(xy)} coordinates but {len(state)} states")
        if not np.isin(state, (0, 1, 2)).all():
            raise DomainError("keypoint states must be 0, 1 or 2")
        if not np.isfinite(xy[state > 0]).all():
            raise DomainError("labeled keypoints must have finite coordinates")
        if self.area is not None and not (self.area >= 0 and math.isfinite(self.area)):
            raise DomainError(f"area must be finite and non-negative, got {self.area}")
        object.__setattr__(self, "xy", _frozen(xy))
        object.__setattr__(self, "state", _frozen(state))
        if self.area is not None:
            object.__setattr__(self, "area", float(self.area))

    @classmethod
    def from_triplets(cls, triplets: Iterable[Sequence[float]], area=None) -> "PersonAnnotation":
        t = np.asarray(list(triplets), dtype=np.float64).reshape(-1, 3)
        return cls(t[:, :2], t[:, 2].astype(np.int8), area)

    @classmethod
    def visible(cls, xy, area=None) -> "PersonAnnotation":
        """All keypoints labeled visible."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        return cls(xy, np.full(len(xy), Visibility.VISIBLE, dtype=np.int8), area)

    @property
    def num_parts(self) -> int:
        return len(self.state)

    @property
    def labeled(self) -> np.ndarray:
        """Boolean mask of annotated keypoints (occluded or visible)."""
        return self.state > 0

    def replace(self, xy=None, state=None, area=...) -> "PersonAnnotation":
        return PersonAnnotation(
            self.xy if xy is None else xy,
            self.state if state is None else state,
            self.area if area is ... else area,
        )

    def translated(self, dx, dy) -> "PersonAnnotation":
        xy = self.xy.copy()
        xy[self.labeled] += (dx, dy)
        return self.replace(xy=xy)

    def to_triplets(self) -> list[list[float]]:
        return [[float(x), float(y), int(v)] for (x, y), v in zip(self.xy, self.state)]

    def __eq__(self, other):
        if not isinstance(other, PersonAnnotation):
            return NotImplemented
        return (
            np.array_equal(self.state, other.state)
            and np.array_equal(self.xy, other.xy, equal_nan=True)
            and self.area == other.area
        )

    __hash__ = None


def _check_grid(grid: GridSpec, values: np.ndarray, lead: tuple, what: str):
    want = lead + grid.shape
    if values.shape != want:
        raise ShapeMismatchError(f"{what} has shape {values.shape}, grid expects {want}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        _check_grid(self.grid, np.asarray(self.values), (), "scalar field")


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    values: np.ndarray  # (2, H, W)

    def __post_init__(self):
        _check_grid(self.grid, np.asarray(self.values), (2,), "vector field")


@dataclass(frozen=True, eq=False)
class BinaryMask:
    grid: GridSpec
    values: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        v = np.asarray(self.values)
        _check_grid(self.grid, v, (), "mask")
        if not np.isin(v, (0, 1)).all():
            raise DomainError("mask values must be exactly 0 or 1")

    @classmethod
    def ones(cls, grid: GridSpec) -> "BinaryMask":
        return cls(grid, np.ones(grid.shape, dtype=np.uint8))


@dataclass(eq=False)
class LabelSet:
    """Confidence maps ``(J, H, W)``, PAFs ``(C, 2, H, W)`` and ignore mask ``(H, W)``.

    Teacher predictions use the same container with an all-ones mask.  Arrays
    keep their floating dtype; generated labels are float32.
    """

    grid: GridSpec
    maps: np.ndarray
    pafs: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.maps = np.asarray(self.maps)
        self.pafs = np.asarray(self.pafs)
        if self.mask is None:
            self.mask = np.ones(self.grid.shape, dtype=np.uint8)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.maps.ndim != 3:
            raise ShapeMismatchError(f"maps must be (J, H, W), got {self.maps.shape}")
        if self.pafs.ndim != 4:
            raise ShapeMismatchError(f"pafs must be (C, 2, H, W), got {self.pafs.shape}")
        _check_grid(self.grid, self.maps, (self.maps.shape[0],), "maps")
        _check_grid(self.grid, self.pafs, (self.pafs.shape[0], 2), "pafs")
        _check_grid(self.grid, self.mask, (), "mask")

    @classmethod
    def zeros(cls, grid: GridSpec, num_parts: int, num_limbs: int, dtype=np.float32) -> "LabelSet":
        h, w = grid.shape
        return cls(
            grid,
            np.zeros((num_parts, h, w), dtype),
            np.zeros((num_limbs, 2, h, w), dtype),
            np.ones((h, w), np.uint8),
        )

    @property
    def num_parts(self) -> int:
        return self.maps.shape[0]

    @property
    def num_limbs(self) -> int:
        return self.pafs.shape[0]

    def map_field(self, j: int) -> ScalarField:
        return ScalarField(self.grid, self.maps[j])

    def paf_field(self, c: int) -> VectorField:
        return VectorField(self.grid, self.pafs[c])

    def mask_field(self) -> BinaryMask:
        return BinaryMask(self.grid, self.mask)

    def copy(self) -> "LabelSet":
        return LabelSet(self.grid, self.maps.copy(), self.pafs.copy(), self.mask.copy())

    def with_mask(self, mask) -> "LabelSet":
        return LabelSet(self.grid, self.maps, self.pafs, mask)

    def check_compatible(self, other: "LabelSet"):
        if self.grid != other.grid:
            raise ShapeMismatchError(f"grids differ: {self.grid} vs {other.grid}")
        if self.maps.shape != other.maps.shape or self.pafs.shape != other.pafs.shape:
            raise ShapeMismatchError(
                f"channel counts differ: J={self.num_parts}/{other.num_parts}, "
                f"C={self.num_limbs}/{other.num_limbs}"
            )

    def identical(self, other: "LabelSet") -> bool:
        """Bit-exact equality of grid, dtypes and every stored value."""
        return (
            self.grid == other.grid
            and self.maps.dtype == other.maps.dtype
            and self.pafs.dtype == other.pafs.dtype
            and self.maps.tobytes() == other.maps.tobytes()
            and self.pafs.tobytes() == other.pafs.tobytes()
            and self.mask.tobytes() == other.mask.tobytes()
        )


def sample_bilinear(field, point) -> np.ndarray:
    """Bilinearly interpolate a 2-channel field at continuous grid coordinates.

    ``field`` is a :class:`VectorField` or an array of shape ``(2, H, W)``;
    ``point`` is ``(x, y)`` and must lie in ``[0, W-1] x [0, H-1]``.
    """
    values = np.asarray(getattr(field, "values", field))
    if values.ndim != 3 or values.shape[0] != 2:
        raise ShapeMismatchError(f"expected a (2, H, W) field, got {values.shape}")
    _, h, w = values.shape
    x, y = float(point[0]), float(point[1])
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise DomainError(f"point ({x}, {y}) outside [0, {w - 1}] x [0, {h - 1}]")
    x0 = min(int(x), max(w - 2, 0))
    y0 = min(int(y), max(h - 2, 0))
    fx, fy = x - x0, y - y0
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    v = values.astype(np.float64, copy=False)
    return (
        (1 - fx) * (1 - fy) * v[:, y0, x0]
        + fx * (1 - fy) * v[:, y0, x1]
        + (1 - fx) * fy * v[:, y1, x0]
        + fx * fy * v[:, y1, x1]
    )


@dataclass(frozen=True, eq=False)
class Scene:
    """One image's annotations: persons, ignore regions and pixel dimensions."""

    image_id: int | str
    width: int
    height: int
    persons: tuple = ()
    ignore_regions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "ignore_regions", tuple(self.ignore_regions))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    def replace(self, **kw) -> "Scene":
        fields = dict(
            image_id=self.image_id, width=self.width, height=self.height,
            persons=self.persons, ignore_regions=self.ignore_regions,
        )
        fields.update(kw)
        return Scene(**fields)

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            (self.image_id, self.width, self.height) == (other.image_id, other.width, other.height)
            and len(self.persons) == len(other.persons)
            and all(a == b for a, b in zip(self.persons, other.persons))
            and len(self.ignore_regions) == len(other.ignore_regions)
            and all(a == b for a, b in zip(self.ignore_regions, other.ignore_regions))
        )

    __hash__ = None

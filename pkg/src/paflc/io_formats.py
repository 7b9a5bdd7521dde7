"""Annotation JSON ingestion and the ``PLF1`` tensor file format.

Tensor file layout (all little-endian)::

    b"PLF1" | rank: u32 | dims: u32 x rank | payload: f32 x prod(dims)

A file may hold several tensors back to back.  A label file holds two: a
rank-1 header ``[J, C, stride]`` and a ``(J + 2C + 1, H, W)`` block with the
confidence maps, then the PAFs (x and y channel per limb), then the mask.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import GridSpec, LabelSet, PersonAnnotation, Scene, SkeletonSpec, default_skeleton
from .errors import (
    AnnotationParseError, AnnotationValidationError, DomainError, ShapeMismatchError,
    TensorFormatError, UnsupportedEncodingError,
)
from .regions import Polygon, RleMask

__all__ = [
    "MAGIC",
    "atomic_write",
    "write_tensors",
    "read_tensors",
    "write_tensor",
    "read_tensor",
    "write_labelset",
    "read_labelset",
    "read_annotations",
    "write_annotations",
    "scene_to_records",
]

MAGIC = b"PLF1"
_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")
_MAX_RANK = 16
_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write(path, data: bytes):
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- tensor files -------------------------------------------------------------

def _encode(array) -> bytes:
    a = np.asarray(array)
    if not np.issubdtype(a.dtype, np.number) and a.dtype != bool:
        raise DomainError(f"cannot store dtype {a.dtype}")
    if a.ndim > _MAX_RANK:
        raise DomainError(f"rank {a.ndim} exceeds {_MAX_RANK}")
    head = MAGIC + np.array([a.ndim, *a.shape], dtype=_U32).tobytes()
    return head + np.ascontiguousarray(a, dtype=_F32).tobytes()


def write_tensors(path, arrays, atomic: bool = True):
    """Store arrays as float32; values not representable in float32 are rounded."""
    data = b"".join(_encode(a) for a in arrays)
    if atomic:
        atomic_write(path, data)
    else:
        Path(path).write_bytes(data)


def write_tensor(path, array, atomic: bool = True):
    write_tensors(path, [array], atomic)


def _decode_all(path, buf: bytes) -> list[np.ndarray]:
    out, pos = [], 0
    while pos < len(buf):
        if len(buf) - pos < 8:
            raise TensorFormatError(path, "truncated header", pos)
        if buf[pos:pos + 4] != MAGIC:
            raise TensorFormatError(path, f"bad magic {buf[pos:pos + 4]!r}", pos)
        rank = int(np.frombuffer(buf, _U32, 1, pos + 4)[0])
        if rank > _MAX_RANK:
            raise TensorFormatError(path, f"rank {rank} exceeds {_MAX_RANK}", pos + 4)
        dims_at = pos + 8
        if len(buf) < dims_at + 4 * rank:
            raise TensorFormatError(path, "truncated dimension list", dims_at)
        dims = tuple(int(d) for d in np.frombuffer(buf, _U32, rank, dims_at))
        data_at = dims_at + 4 * rank
        nbytes = 4 * math.prod(dims)
        if len(buf) < data_at + nbytes:
            raise TensorFormatError(
                path, f"payload truncated: need {nbytes} bytes, have {len(buf) - data_at}", data_at
            )
        arr = np.frombuffer(buf, _F32, math.prod(dims), data_at).reshape(dims)
        out.append(arr.astype(np.float32))  # native byte order, writable copy
        pos = data_at + nbytes
    return out


def read_tensors(path) -> list[np.ndarray]:
    path = Path(path)
    return _decode_all(path, path.read_bytes())


def read_tensor(path) -> np.ndarray:
    tensors = read_tensors(path)
    if len(tensors) != 1:
        raise TensorFormatError(path, f"expected 1 tensor, found {len(tensors)}")
    return tensors[0]


def write_labelset(path, labels: LabelSet, atomic: bool = True):
    """Write a :class:`LabelSet` as float32 (maps and PAFs are cast if needed)."""
    j, c = labels.num_parts, labels.num_limbs
    h, w = labels.grid.shape
    block = np.empty((j + 2 * c + 1, h, w), dtype=np.float32)
    block[:j] = labels.maps
    block[j:j + 2 * c] = labels.pafs.reshape(2 * c, h, w)
    block[-1] = labels.mask
    header = np.array([j, c, labels.grid.stride], dtype=np.float32)
    if header[2] != labels.grid.stride:
        raise DomainError(f"stride {labels.grid.stride} is not representable in float32")
    write_tensors(path, [header, block], atomic)


def read_labelset(path, skeleton: SkeletonSpec | None = None) -> LabelSet:
    """Read a label file; with ``skeleton`` given, J and C must match it."""
    path = Path(path)
    tensors = read_tensors(path)
    if len(tensors) != 2 or tensors[0].shape != (3,) or tensors[1].ndim != 3:
        raise TensorFormatError(path, "not a label file (expected a 3-value header and a rank-3 block)")
    header, block = tensors
    j, c, stride = int(header[0]), int(header[1]), float(header[2])
    if j < 0 or c < 0 or j != header[0] or c != header[1]:
        raise TensorFormatError(path, f"bad channel counts in header: {header.tolist()}")
    if block.shape[0] != j + 2 * c + 1:
        raise TensorFormatError(
            path, f"block has {block.shape[0]} channels, header implies {j + 2 * c + 1}"
        )
    if skeleton is not None and (j, c) != (skeleton.num_parts, skeleton.num_limbs):
        raise ShapeMismatchError(
            f"{path}: file has J={j}, C={c}; skeleton expects "
            f"J={skeleton.num_parts}, C={skeleton.num_limbs}"
        )
    mask = block[-1]
    if not np.isin(mask, (0.0, 1.0)).all():
        raise TensorFormatError(path, "mask channel holds values other than 0 and 1")
    h, w = block.shape[1:]
    try:
        grid = GridSpec(w, h, stride)
    except DomainError as exc:
        raise TensorFormatError(path, str(exc)) from None
    return LabelSet(grid, block[:j].copy(), block[j:j + 2 * c].reshape(c, 2, h, w).copy(), mask.astype(np.uint8))


# -- annotation JSON ----------------------------------------------------------

_NECK_FROM = (5, 6)  # COCO left/right shoulder


def _load_json(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(path, exc.pos, exc.msg) from None


def _region_from(seg, ann_id, image):
    if isinstance(seg, list):
        return [Polygon(np.asarray(poly, dtype=np.float64).reshape(-1, 2)) for poly in seg]
    if isinstance(seg, dict):
        counts = seg.get("counts")
        if isinstance(counts, (str, bytes)):
            raise UnsupportedEncodingError(
                f"annotation {ann_id}: compressed RLE segmentations are not supported"
            )
        h, w = seg.get("size", (image["height"], image["width"]))
        return [RleMask(int(h), int(w), counts)]
    raise AnnotationValidationError("unrecognized segmentation", [ann_id])


def _adapt(trip: np.ndarray, num_parts: int):
    """Append a neck at the shoulder midpoint to 17-keypoint records."""
    if len(trip) == num_parts:
        return trip
    if len(trip) == 17 and num_parts == 18:
        a, b = trip[_NECK_FROM[0]], trip[_NECK_FROM[1]]
        if a[2] > 0 and b[2] > 0:
            neck = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, min(a[2], b[2])]
        else:
            neck = [0.0, 0.0, 0.0]
        return np.vstack([trip, neck])
    return None


def read_annotations(path, skeleton: SkeletonSpec | None = None) -> dict:
    """Read a COCO-style keypoint file into ``{image_id: Scene}``.

    Every non-crowd annotation becomes one person (possibly with no labeled
    keypoints).  Crowd annotations become ignore regions, and also a person
    when they carry labeled keypoints.  Scenes keep the order of ``images``.
    """
    skeleton = skeleton or default_skeleton()
    doc = _load_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise AnnotationValidationError(f"{path}: top level must be an object with an 'images' list")
    anns = doc.get("annotations", [])
    if not isinstance(anns, list):
        raise AnnotationValidationError(f"{path}: 'annotations' must be a list")

    images = {}
    for img in doc["images"]:
        try:
            images[img["id"]] = {"width": int(img["width"]), "height": int(img["height"])}
        except (KeyError, TypeError, ValueError):
            raise AnnotationValidationError(f"{path}: image record {img!r} lacks id/width/height") from None
    persons = {k: [] for k in images}
    regions = {k: [] for k in images}

    bad_v, bad_len, bad_image, bad_other = [], [], [], []
    for pos, ann in enumerate(anns):
        ann_id = ann.get("id", f"#{pos}") if isinstance(ann, dict) else f"#{pos}"
        if not isinstance(ann, dict):
            bad_other.append(ann_id)
            continue
        image_id = ann.get("image_id")
        if image_id not in images:
            bad_image.append(ann_id)
            continue
        crowd = bool(ann.get("iscrowd", 0))
        flat = ann.get("keypoints")
        if flat is None:
            flat = [] if crowd else None
        if flat is None or len(flat) % 3:
            bad_len.append(ann_id)
            continue
        trip = np.asarray(flat, dtype=np.float64).reshape(-1, 3)
        if not np.isin(trip[:, 2], (0, 1, 2)).all():
            bad_v.append(ann_id)
            continue
        if crowd:
            if "segmentation" in ann:
                try:
                    regions[image_id].extend(_region_from(ann["segmentation"], ann_id, images[image_id]))
                except (ValueError, TypeError) as exc:
                    raise AnnotationValidationError(f"bad crowd segmentation: {exc}", [ann_id]) from None
            if len(trip) == 0 or not (trip[:, 2] > 0).any():
                continue
        trip = _adapt(trip, skeleton.num_parts)
        if trip is None:
            bad_len.append(ann_id)
            continue
        area = ann.get("area")
        persons[image_id].append(PersonAnnotation.from_triplets(trip, None if area is None else float(area)))

    for ids, what in (
        (bad_v, "keypoint visibility outside {0, 1, 2}"),
        (bad_len, f"keypoint list is not 3 x {skeleton.num_parts} (or 3 x 17) values"),
        (bad_image, "unknown image_id"),
        (bad_other, "annotation is not an object"),
    ):
        if ids:
            raise AnnotationValidationError(f"{path}: {what}", ids)
    return {
        k: Scene(k, v["width"], v["height"], persons[k], regions[k]) for k, v in images.items()
    }


def _region_record(region):
    if isinstance(region, Polygon):
        return [region.vertices.ravel().tolist()]
    if isinstance(region, RleMask):
        if not np.array_equal(region.to_source, np.eye(3)):
            raise DomainError("a transformed RLE region has no annotation encoding")
        return {"size": [region.height, region.width], "counts": list(region.counts)}
    raise DomainError(f"unknown region type {type(region).__name__}")


def scene_to_records(scene: Scene, first_id: int = 1) -> tuple[dict, list[dict]]:
    """Image record and annotation records for one scene; ids count up from ``first_id``."""
    image = {"id": scene.image_id, "width": scene.width, "height": scene.height}
    anns = []
    for person in scene.persons:
        labeled = person.labeled
        rec = {
            "id": first_id + len(anns),
            "image_id": scene.image_id,
            "category_id": 1,
            "iscrowd": 0,
            "num_keypoints": int(labeled.sum()),
            "keypoints": [v for trip in person.to_triplets() for v in trip],
        }
        if person.area is not None:
            rec["area"] = float(person.area)
        anns.append(rec)
    for region in scene.ignore_regions:
        anns.append({
            "id": first_id + len(anns),
            "image_id": scene.image_id,
            "category_id": 1,
            "iscrowd": 1,
            "num_keypoints": 0,
            "segmentation": _region_record(region),
        })
    return image, anns


def write_annotations(path, scenes, skeleton: SkeletonSpec | None = None):
    """Write scenes as a keypoint JSON file that :func:`read_annotations` reads back."""
    skeleton = skeleton or default_skeleton()
    images, anns = [], []
    for scene in scenes:
        img, recs = scene_to_records(scene, len(anns) + 1)
        images.append(img)
        anns.extend(recs)
    doc = {
        "images": images,
        "annotations": anns,
        "categories": [{
            "id": 1,
            "name": "person",
            "keypoints": list(skeleton.part_names),
            "skeleton": [[a + 1, b + 1] for a, b in skeleton.limbs],
        }],
    }
    atomic_write(path, (json.dumps(doc, indent=1) + "\n").encode("utf-8"))

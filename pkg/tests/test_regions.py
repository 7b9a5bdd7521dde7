import numpy as np
import pytest

from paflc.errors import DomainError
from paflc.regions import Polygon, RleMask, transform_region


def test_polygon_contains_square():
    sq = Polygon([[0, 0], [10, 0], [10, 10], [0, 10]])
    assert sq.contains([5, 11, -1], [5, 5, 5]).tolist() == [True, False, False]


def test_polygon_even_odd_hole():
    # bow-tie style self-overlap: a square traced twice is a hole under even-odd
    twice = Polygon([[0, 0], [4, 0], [4, 4], [0, 4], [0, 0], [4, 0], [4, 4], [0, 4]])
    assert not twice.contains(2, 2)


def test_polygon_needs_three_vertices():
    with pytest.raises(DomainError):
        Polygon([[0, 0], [1, 1]])


def test_rle_decode_column_major():
    # 2x3 mask, column-major runs: bg 1, fg 2, bg 3
    m = RleMask(2, 3, (1, 2, 3))
    assert m.decode().astype(int).tolist() == [[0, 1, 0], [1, 0, 0]]
    assert m.contains([1.5, 0.2], [0.5, 1.9]).tolist() == [True, True]


def test_rle_counts_must_cover_mask():
    with pytest.raises(DomainError):
        RleMask(2, 2, (1, 2))


def test_transform_commutes_with_contains():
    rng = np.random.default_rng(1)
    poly = Polygon([[10, 10], [40, 12], [30, 35]])
    rle = RleMask(4, 4, (5, 6, 5))
    m = np.array([[0.0, -1.0, 50.0], [1.0, 0.0, 3.0], [0, 0, 1]])
    pts = rng.uniform(-5, 60, (200, 2))
    moved = pts @ m[:2, :2].T + m[:2, 2]
    for region in (poly, rle):
        t = transform_region(region, m)
        assert np.array_equal(t.contains(moved[:, 0], moved[:, 1]), region.contains(pts[:, 0], pts[:, 1]))

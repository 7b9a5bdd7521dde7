import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paflc import GridSpec, LabelSet
from paflc.errors import DomainError, ShapeMismatchError
from paflc.correction import correct_labels
from paflc.losses import loss_kd, loss_kd_lc, loss_lc, masked_l2, masked_l2_grad

from _helpers import random_labelset


def test_trivial_values():
    g = GridSpec(3, 2)
    a = LabelSet.zeros(g, 2, 1)
    assert masked_l2(a, a.copy()).total == 0.0
    b = a.copy()
    b.maps[1, 1, 2] = 0.5
    assert masked_l2(b, a).total == 0.25
    assert masked_l2(b, a, np.zeros((2, 3))).total == 0.0
    assert masked_l2(b, a).unmasked_cells == 6


def test_brute_force_per_cell(rng):
    p, t = random_labelset(rng), random_labelset(rng)
    total = 0.0
    for y in range(p.grid.height):
        for x in range(p.grid.width):
            if not t.mask[y, x]:
                continue
            for j in range(p.num_parts):
                total += (float(p.maps[j, y, x]) - float(t.maps[j, y, x])) ** 2
            for c in range(p.num_limbs):
                for k in range(2):
                    total += (float(p.pafs[c, k, y, x]) - float(t.pafs[c, k, y, x])) ** 2
    res = masked_l2(p, t)
    assert res.total == pytest.approx(total, rel=1e-12)
    assert res.total == pytest.approx(res.map_term + res.paf_term, rel=1e-12)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        masked_l2(LabelSet.zeros(GridSpec(3, 2), 2, 1), LabelSet.zeros(GridSpec(3, 2), 1, 1))
    with pytest.raises(DomainError):
        masked_l2(LabelSet.zeros(GridSpec(3, 2), 1, 1), LabelSet.zeros(GridSpec(3, 2), 1, 1), np.ones((3, 3)))


def test_lambda_domain(rng):
    a = random_labelset(rng)
    for lam in (-0.1, 1.1, float("nan")):
        with pytest.raises(DomainError):
            loss_kd(a, a, a, lam)
        with pytest.raises(DomainError):
            loss_kd_lc(a, a, a, lam)


def test_kd_endpoints_and_half(rng):
    pred, gt, t = (random_labelset(rng) for _ in range(3))
    t = t.with_mask(np.ones(t.grid.shape))
    assert loss_kd(pred, gt, t, 0.0).total == masked_l2(pred, gt).total
    assert loss_kd(pred, gt, t, 1.0).total == masked_l2(pred, t, gt.mask).total
    half = loss_kd(gt, gt, t, 0.5).total
    assert half == pytest.approx(0.5 * masked_l2(gt, t, gt.mask).total, rel=1e-12)
    vals = [loss_kd(pred, gt, t, lam).total for lam in (0.0, 0.25, 0.5, 1.0)]
    slope = vals[3] - vals[0]
    for lam, v in zip((0.25, 0.5), vals[1:3]):
        assert v == pytest.approx(vals[0] + lam * slope, rel=1e-12)


def test_kd_lc(rng):
    pred, gt, t = (random_labelset(rng) for _ in range(3))
    corrected = correct_labels(gt, t)
    assert loss_kd_lc(pred, corrected, t, 0.0).total == loss_lc(pred, corrected).total
    other = correct_labels(random_labelset(rng).with_mask(corrected.mask), t)
    assert loss_kd_lc(pred, corrected, t, 1.0).total == loss_kd_lc(pred, other, t, 1.0).total
    mix = 0.5 * loss_lc(pred, corrected).total + 0.5 * masked_l2(pred, t, corrected.mask).total
    assert loss_kd_lc(pred, corrected, t, 0.5).total == pytest.approx(mix, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_masked_perturbations_do_not_change_losses(seed):
    rng = np.random.default_rng(seed)
    pred, gt, t = (random_labelset(rng) for _ in range(3))
    moved = pred.copy()
    hole = gt.mask == 0
    moved.maps[:, hole] += rng.normal(size=(pred.num_parts, int(hole.sum()))).astype(np.float32)
    moved.pafs[:, :, hole] -= 3.0
    corrected = correct_labels(gt, t)
    for f in (lambda p: masked_l2(p, gt), lambda p: loss_lc(p, corrected),
              lambda p: loss_kd(p, gt, t, 0.3), lambda p: loss_kd_lc(p, corrected, t, 0.7)):
        assert f(moved).total == f(pred).total


def test_finite_difference_gradient(rng):
    pred = random_labelset(rng, height=4, width=5).copy()
    target = random_labelset(rng, height=4, width=5)
    pred = LabelSet(pred.grid, pred.maps.astype(np.float64), pred.pafs.astype(np.float64), pred.mask)
    gm, gp = masked_l2_grad(pred, target)
    h = 1e-6
    for arr, grad in ((pred.maps, gm), (pred.pafs, gp)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = masked_l2(pred, target).total
            arr[idx] = old - h
            down = masked_l2(pred, target).total
            arr[idx] = old
            assert (up - down) / (2 * h) == pytest.approx(grad[idx], abs=1e-4)

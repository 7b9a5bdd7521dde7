"""Pure numpy implementations of the inner loops.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same floating-point expression order, so both backends agree to the
last bit except where a libm ``exp`` differs by an ulp.
"""
import math

import numpy as np


def gaussian_maps(out, parts, centers, sigma, truncate):
    """Max-accumulate truncated Gaussians into ``out[part]`` (float32, in place)."""
    _, h, w = out.shape
    r = truncate * sigma
    r2 = r * r
    two_s2 = 2.0 * sigma * sigma
    for k in range(len(parts)):
        j = parts[k]
        gx, gy = centers[k, 0], centers[k, 1]
        x0 = max(int(math.ceil(gx - r)), 0)
        x1 = min(int(math.floor(gx + r)), w - 1)
        y0 = max(int(math.ceil(gy - r)), 0)
        y1 = min(int(math.floor(gy + r)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        dx = np.arange(x0, x1 + 1, dtype=np.float64) - gx
        dy = np.arange(y0, y1 + 1, dtype=np.float64) - gy
        d2 = dx[None, :] * dx[None, :] + dy[:, None] * dy[:, None]
        val = np.exp(-d2 / two_s2).astype(np.float32)
        val[d2 > r2] = 0.0
        region = out[j, y0:y1 + 1, x0:x1 + 1]
        np.maximum(region, val, out=region)


def paf_accumulate(sums, counts, limb_ids, segs, width):
    """Add unit vectors over each limb rectangle into ``sums`` and bump ``counts``."""
    _, _, h, w = sums.shape
    for k in range(len(limb_ids)):
        c = limb_ids[k]
        x1, y1, x2, y2 = segs[k, 0], segs[k, 1], segs[k, 2], segs[k, 3]
        dx = x2 - x1
        dy = y2 - y1
        n = math.sqrt(dx * dx + dy * dy)
        vx = dx / n
        vy = dy / n
        i0 = max(int(math.floor(min(x1, x2) - width)), 0)
        i1 = min(int(math.ceil(max(x1, x2) + width)), w - 1)
        j0 = max(int(math.floor(min(y1, y2) - width)), 0)
        j1 = min(int(math.ceil(max(y1, y2) + width)), h - 1)
        if i0 > i1 or j0 > j1:
            continue
        px = np.arange(i0, i1 + 1, dtype=np.float64)[None, :] - x1
        py = np.arange(j0, j1 + 1, dtype=np.float64)[:, None] - y1
        along = vx * px + vy * py
        perp = vx * py - vy * px
        hit = (along >= 0.0) & (along <= n) & (np.abs(perp) <= width)
        sums[c, 0, j0:j1 + 1, i0:i1 + 1][hit] += vx
        sums[c, 1, j0:j1 + 1, i0:i1 + 1][hit] += vy
        counts[c, j0:j1 + 1, i0:i1 + 1][hit] += 1


def find_local_peaks(values, threshold):
    """Row-major ``(rows, cols)`` of plateau-broken 8-neighbour maxima >= threshold.

    A cell qualifies when it is strictly greater than the neighbours that
    precede it in row-major order and not smaller than those that follow, so
    an exact two-cell tie yields only its first cell.
    """
    h, w = values.shape
    padded = np.full((h + 2, w + 2), -np.inf)
    padded[1:-1, 1:-1] = values
    ok = values >= threshold
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nb = padded[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx]
            if dy < 0 or (dy == 0 and dx < 0):
                ok &= values > nb
            else:
                ok &= values >= nb
    rows, cols = np.nonzero(ok)
    return rows.astype(np.int64), cols.astype(np.int64)


def limb_scores(paf, a, b, n_samples):
    """Mean projected field and positive-sample fraction for every (a, b) pair."""
    _, h, w = paf.shape
    na, nb = len(a), len(b)
    scores = np.zeros((na, nb))
    fracs = np.zeros((na, nb))
    if na == 0 or nb == 0:
        return scores, fracs
    d = b[None, :, :] - a[:, None, :]
    n = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])
    valid = n > 0
    safe = np.where(valid, n, 1.0)
    ux = d[..., 0] / safe
    uy = d[..., 1] / safe
    u = np.arange(n_samples, dtype=np.float64) / (n_samples - 1)
    px = a[:, None, 0, None] + u * d[..., 0, None]
    py = a[:, None, 1, None] + u * d[..., 1, None]
    px = np.clip(px, 0.0, w - 1)
    py = np.clip(py, 0.0, h - 1)
    x0 = np.minimum(px.astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(py.astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = px - x0
    fy = py - y0
    dots = np.zeros(px.shape)
    for ch, unit in ((0, ux), (1, uy)):
        f = paf[ch]
        val = (
            (1 - fx) * (1 - fy) * f[y0, x0]
            + fx * (1 - fy) * f[y0, x1]
            + (1 - fx) * fy * f[y1, x0]
            + fx * fy * f[y1, x1]
        )
        dots = dots + val * unit[..., None]
    total = np.zeros((na, nb))
    pos = np.zeros((na, nb))
    for k in range(n_samples):
        total = total + dots[..., k]
        pos = pos + (dots[..., k] > 0.0)
    scores = np.where(valid, total / n_samples, 0.0)
    fracs = np.where(valid, pos / n_samples, 0.0)
    return scores, fracs

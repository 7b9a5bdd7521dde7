# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_pykernels``; same signatures, same arithmetic order."""
import numpy as np

from libc.math cimport exp, sqrt, floor, ceil, fabs


def gaussian_maps(float[:, :, ::1] out, const long[::1] parts, const double[:, ::1] centers,
                  double sigma, double truncate):
    cdef Py_ssize_t h = out.shape[1], w = out.shape[2]
    cdef double r = truncate * sigma
    cdef double r2 = r * r
    cdef double two_s2 = 2.0 * sigma * sigma
    cdef Py_ssize_t k, i, j, x0, x1, y0, y1
    cdef long p
    cdef double gx, gy, dx, dy, d2
    cdef float v
    with nogil:
        for k in range(parts.shape[0]):
            p = parts[k]
            gx = centers[k, 0]
            gy = centers[k, 1]
            x0 = <Py_ssize_t>ceil(gx - r)
            x1 = <Py_ssize_t>floor(gx + r)
            y0 = <Py_ssize_t>ceil(gy - r)
            y1 = <Py_ssize_t>floor(gy + r)
            if x0 < 0:
                x0 = 0
            if y0 < 0:
                y0 = 0
            if x1 > w - 1:
                x1 = w - 1
            if y1 > h - 1:
                y1 = h - 1
            for j in range(y0, y1 + 1):
                dy = <double>j - gy
                for i in range(x0, x1 + 1):
                    dx = <double>i - gx
                    d2 = dx * dx + dy * dy
                    if d2 > r2:
                        continue
                    v = <float>exp(-d2 / two_s2)
                    if v > out[p, j, i]:
                        out[p, j, i] = v


def paf_accumulate(double[:, :, :, ::1] sums, int[:, :, ::1] counts, const long[::1] limb_ids,
                   const double[:, ::1] segs, double width):
    cdef Py_ssize_t h = sums.shape[2], w = sums.shape[3]
    cdef Py_ssize_t k, i, j, i0, i1, j0, j1
    cdef long c
    cdef double x1, y1, x2, y2, dx, dy, n, vx, vy, px, py, along, perp
    with nogil:
        for k in range(limb_ids.shape[0]):
            c = limb_ids[k]
            x1 = segs[k, 0]
            y1 = segs[k, 1]
            x2 = segs[k, 2]
            y2 = segs[k, 3]
            dx = x2 - x1
            dy = y2 - y1
            n = sqrt(dx * dx + dy * dy)
            vx = dx / n
            vy = dy / n
            i0 = <Py_ssize_t>floor((x1 if x1 < x2 else x2) - width)
            i1 = <Py_ssize_t>ceil((x1 if x1 > x2 else x2) + width)
            j0 = <Py_ssize_t>floor((y1 if y1 < y2 else y2) - width)
            j1 = <Py_ssize_t>ceil((y1 if y1 > y2 else y2) + width)
            if i0 < 0:
                i0 = 0
            if j0 < 0:
                j0 = 0
            if i1 > w - 1:
                i1 = w - 1
            if j1 > h - 1:
                j1 = h - 1
            for j in range(j0, j1 + 1):
                py = <double>j - y1
                for i in range(i0, i1 + 1):
                    px = <double>i - x1
                    along = vx * px + vy * py
                    perp = vx * py - vy * px
                    if along >= 0.0 and along <= n and fabs(perp) <= width:
                        sums[c, 0, j, i] += vx
                        sums[c, 1, j, i] += vy
                        counts[c, j, i] += 1


def find_local_peaks(const double[:, ::1] values, double threshold):
    cdef Py_ssize_t h = values.shape[0], w = values.shape[1]
    cdef Py_ssize_t i, j, di, dj, ni, nj, n = 0
    cdef double v, nb
    cdef bint ok
    rows = np.empty(h * w, dtype=np.int64)
    cols = np.empty(h * w, dtype=np.int64)
    cdef long long[::1] rv = rows
    cdef long long[::1] cv = cols
    with nogil:
        for j in range(h):
            for i in range(w):
                v = values[j, i]
                if not (v >= threshold):
                    continue
                ok = True
                for dj in range(-1, 2):
                    nj = j + dj
                    if nj < 0 or nj >= h:
                        continue
                    for di in range(-1, 2):
                        ni = i + di
                        if (di == 0 and dj == 0) or ni < 0 or ni >= w:
                            continue
                        nb = values[nj, ni]
                        if dj < 0 or (dj == 0 and di < 0):
                            if not (v > nb):
                                ok = False
                        elif not (v >= nb):
                            ok = False
                if ok:
                    rv[n] = j
                    cv[n] = i
                    n += 1
    return rows[:n].copy(), cols[:n].copy()


def limb_scores(const double[:, :, ::1] paf, const double[:, ::1] a, const double[:, ::1] b,
                long n_samples):
    cdef Py_ssize_t h = paf.shape[1], w = paf.shape[2]
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    scores_arr = np.zeros((na, nb))
    fracs_arr = np.zeros((na, nb))
    cdef double[:, ::1] scores = scores_arr
    cdef double[:, ::1] fracs = fracs_arr
    cdef Py_ssize_t ia, ib, k, x0, y0, x1, y1
    cdef Py_ssize_t xmax = w - 2 if w >= 2 else 0
    cdef Py_ssize_t ymax = h - 2 if h >= 2 else 0
    cdef double dx, dy, n, ux, uy, u, px, py, fx, fy, v0, v1, dot, total, pos
    with nogil:
        for ia in range(na):
            for ib in range(nb):
                dx = b[ib, 0] - a[ia, 0]
                dy = b[ib, 1] - a[ia, 1]
                n = sqrt(dx * dx + dy * dy)
                if not (n > 0):
                    continue
                ux = dx / n
                uy = dy / n
                total = 0.0
                pos = 0.0
                for k in range(n_samples):
                    u = <double>k / <double>(n_samples - 1)
                    px = a[ia, 0] + u * dx
                    py = a[ia, 1] + u * dy
                    if px < 0.0:
                        px = 0.0
                    if px > w - 1:
                        px = w - 1
                    if py < 0.0:
                        py = 0.0
                    if py > h - 1:
                        py = h - 1
                    x0 = <Py_ssize_t>px
                    y0 = <Py_ssize_t>py
                    if x0 > xmax:
                        x0 = xmax
                    if y0 > ymax:
                        y0 = ymax
                    x1 = x0 + 1 if x0 + 1 < w else w - 1
                    y1 = y0 + 1 if y0 + 1 < h else h - 1
                    fx = px - x0
                    fy = py - y0
                    v0 = ((1 - fx) * (1 - fy) * paf[0, y0, x0]
                          + fx * (1 - fy) * paf[0, y0, x1]
                          + (1 - fx) * fy * paf[0, y1, x0]
                          + fx * fy * paf[0, y1, x1])
                    v1 = ((1 - fx) * (1 - fy) * paf[1, y0, x0]
                          + fx * (1 - fy) * paf[1, y0, x1]
                          + (1 - fx) * fy * paf[1, y1, x0]
                          + fx * fy * paf[1, y1, x1])
                    dot = v0 * ux + v1 * uy
                    total = total + dot
                    if dot > 0.0:
                        pos = pos + 1.0
                scores[ia, ib] = total / n_samples
                fracs[ia, ib] = pos / n_samples
    return scores_arr, fracs_arr

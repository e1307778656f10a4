# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: Matern type-II hard-core thinning.

Retention rule (per segment): point i survives iff no point j of the same
segment lies strictly within the hard-core distance while carrying a smaller
mark (ties broken by index, so results are deterministic under a fixed seed).
Neighbour search uses a uniform grid with cell size equal to the hard-core
distance, so only the 3x3 cell block around a point has to be scanned.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def thin_hardcore(double[::1] x, double[::1] y, double[::1] marks,
                  long long[::1] seg_starts, double xi):
    """Return a uint8 keep-mask for batched hard-core thinning.

    ``seg_starts`` holds segment offsets (length n_segments + 1); points of
    different segments never interact.
    """
    cdef Py_ssize_t n = x.shape[0]
    out = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] keep = out
    if n == 0 or xi <= 0.0:
        return out

    cdef double xi2 = xi * xi
    cdef Py_ssize_t nseg = seg_starts.shape[0] - 1

    # scratch arrays sized for the largest segment
    cdef Py_ssize_t max_len = 0, s
    for s in range(nseg):
        if seg_starts[s + 1] - seg_starts[s] > max_len:
            max_len = seg_starts[s + 1] - seg_starts[s]
    if max_len == 0:
        return out

    cdef long long[::1] cell = np.empty(max_len, dtype=np.int64)
    cdef long long[::1] order = np.empty(max_len, dtype=np.int64)

    cdef Py_ssize_t lo, hi, m, i, j, k, gi, gj
    cdef long long cx, cy, ncx, ncy, cx0, cy0, dcx, dcy, target
    cdef double xmin, ymin, xmax, ymax, dx, dy
    cdef long long a, b, mid

    for s in range(nseg):
        lo = seg_starts[s]
        hi = seg_starts[s + 1]
        m = hi - lo
        if m <= 1:
            continue

        xmin = x[lo]; xmax = x[lo]; ymin = y[lo]; ymax = y[lo]
        for i in range(lo + 1, hi):
            if x[i] < xmin: xmin = x[i]
            if x[i] > xmax: xmax = x[i]
            if y[i] < ymin: ymin = y[i]
            if y[i] > ymax: ymax = y[i]
        ncx = <long long> floor((xmax - xmin) / xi) + 1
        ncy = <long long> floor((ymax - ymin) / xi) + 1

        for i in range(m):
            cx = <long long> floor((x[lo + i] - xmin) / xi)
            cy = <long long> floor((y[lo + i] - ymin) / xi)
            cell[i] = cx * ncy + cy
            order[i] = i
        # insertion sort by cell id keeps this allocation-free; segments are
        # small (tens of points) in the batched Monte Carlo use
        for i in range(1, m):
            a = order[i]
            j = i - 1
            while j >= 0 and cell[order[j]] > cell[a]:
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = a

        for i in range(m):
            gi = lo + i
            cx0 = <long long> floor((x[gi] - xmin) / xi)
            cy0 = <long long> floor((y[gi] - ymin) / xi)
            for dcx in range(-1, 2):
                cx = cx0 + dcx
                if cx < 0 or cx >= ncx:
                    continue
                for dcy in range(-1, 2):
                    cy = cy0 + dcy
                    if cy < 0 or cy >= ncy:
                        continue
                    target = cx * ncy + cy
                    # binary search for first occurrence of target
                    a = 0
                    b = m
                    while a < b:
                        mid = (a + b) >> 1
                        if cell[order[mid]] < target:
                            a = mid + 1
                        else:
                            b = mid
                    k = a
                    while k < m and cell[order[k]] == target:
                        j = order[k]
                        gj = lo + j
                        k += 1
                        if gj == gi:
                            continue
                        dx = x[gj] - x[gi]
                        dy = y[gj] - y[gi]
                        if dx * dx + dy * dy >= xi2:
                            continue
                        if marks[gj] < marks[gi] or (marks[gj] == marks[gi] and gj < gi):
                            keep[gi] = 0
                            break
                    if not keep[gi]:
                        break
                if not keep[gi]:
                    break
    return out

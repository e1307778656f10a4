"""Pure-numpy fallback for the compiled kernels.

Implements the identical retention predicate as ``_kernels.pyx`` so both
backends return bit-identical masks; only the speed differs.
"""
import numpy as np

# cap on the pairwise block size so huge segments stay within memory
_BLOCK = 512


def thin_hardcore(x, y, marks, seg_starts, xi):
    n = x.shape[0]
    keep = np.ones(n, dtype=np.uint8)
    if n == 0 or xi <= 0.0:
        return keep
    xi2 = xi * xi
    for s in range(seg_starts.shape[0] - 1):
        lo, hi = int(seg_starts[s]), int(seg_starts[s + 1])
        m = hi - lo
        if m <= 1:
            continue
        xs, ys, ms = x[lo:hi], y[lo:hi], marks[lo:hi]
        idx = np.arange(m)
        for b0 in range(0, m, _BLOCK):
            b1 = min(b0 + _BLOCK, m)
            dx = xs[b0:b1, None] - xs[None, :]
            dy = ys[b0:b1, None] - ys[None, :]
            close = (dx * dx + dy * dy) < xi2
            beats = (ms[None, :] < ms[b0:b1, None]) | (
                (ms[None, :] == ms[b0:b1, None]) & (idx[None, :] < idx[b0:b1, None])
            )
            removed = np.any(close & beats, axis=1)
            keep[lo + b0:lo + b1] = np.where(removed, 0, keep[lo + b0:lo + b1])
    return keep

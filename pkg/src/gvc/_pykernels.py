"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the extension is tested against.
"""
import numpy as np


def dijkstra_all_pairs(length):
    """All-pairs shortest path lengths on a dense nonnegative length matrix.

    ``length[i, j]`` is the length of arc i -> j, ``inf`` where there is no
    arc. Returns the (n, n) distance matrix with ``inf`` for unreachable pairs.
    """
    length = np.ascontiguousarray(length, dtype=np.float64)
    n = length.shape[0]
    dist = np.full((n, n), np.inf)
    for s in range(n):
        d = dist[s]
        d[s] = 0.0
        done = np.zeros(n, dtype=bool)
        for _ in range(n):
            cand = np.where(done, np.inf, d)
            u = int(np.argmin(cand))
            if not np.isfinite(cand[u]):
                break
            done[u] = True
            relax = d[u] + length[u]
            np.minimum(d, np.where(done, np.inf, relax), out=d)
    return dist


def demean(X, codes, n_groups, tol=1e-10, max_sweeps=100):
    """Alternating within-group demeaning of the columns of ``X``.

    ``codes`` holds one integer group-code array per fixed-effect dimension.
    Returns ``(Xd, sweeps, max_change)`` where ``max_change`` is the largest
    absolute adjustment made in the final sweep.
    """
    X = np.array(X, dtype=np.float64, order="F", copy=True)
    if X.ndim == 1:
        X = X[:, None]
    counts = [np.bincount(c, minlength=g).astype(np.float64) for c, g in zip(codes, n_groups)]
    counts = [np.where(c > 0, c, 1.0) for c in counts]
    sweeps = 0
    change = 0.0
    if not codes:
        return X, 0, 0.0
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        for c, g, cnt in zip(codes, n_groups, counts):
            for k in range(X.shape[1]):
                means = np.bincount(c, weights=X[:, k], minlength=g) / cnt
                X[:, k] -= means[c]
                change = max(change, float(np.max(np.abs(means))) if g else 0.0)
        if len(codes) == 1 or change <= tol:
            break
    return X, sweeps, change

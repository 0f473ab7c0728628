"""Brute-force references, independent of the DP kernels."""
import math


def enumerate_paths(m, n):
    """Yield every warping path on an m x n grid as a list of (i, j)."""
    path = [(0, 0)]

    def rec(i, j):
        if (i, j) == (m - 1, n - 1):
            yield list(path)
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni < m and nj < n:
                path.append((ni, nj))
                yield from rec(ni, nj)
                path.pop()

    yield from rec(0, 0)


def slope_ok(path, a, b):
    """Runs of non-diagonal steps: one direction, length <= a, >= b diagonals between runs."""
    run_dir, run_len, diag = None, 0, b
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        step = (i1 - i0, j1 - j0)
        if step == (1, 1):
            run_dir, run_len = None, 0
            diag += 1
            continue
        if run_dir is None:
            if diag < b:
                return False
            run_dir, run_len, diag = step, 1, 0
        elif step == run_dir and run_len < a:
            run_len += 1
        else:
            return False
    return True


def brute_dtw(x, y, band=None, slope=None):
    m, n = len(x), len(y)
    best = math.inf
    for p in enumerate_paths(m, n):
        if band is not None and any(abs(i - j) > band for i, j in p):
            continue
        if slope is not None and not slope_ok(p, *slope):
            continue
        best = min(best, sum(abs(x[i] - y[j]) for i, j in p))
    return best

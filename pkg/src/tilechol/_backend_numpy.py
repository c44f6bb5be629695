"""Pure-numpy fallback for the hot loops.

Same contracts as the numba backend, an order of magnitude slower on the
small-tile task streams; useful where numba is unavailable and as an
independent reference in tests.
"""

import numpy as np
from scipy.linalg import solve_triangular

POTRF, SYRK, TRSM, GEMM, GEADD, ZERO = 1, 2, 3, 4, 5, 6


def potrf_tile(a):
    try:
        a[:, :] = np.linalg.cholesky(a)  # reads the lower triangle only
        return -1
    except np.linalg.LinAlgError:
        pass
    # slow path only to report which pivot failed
    lower = np.tril(a)
    nt = a.shape[0]
    for j in range(nt):
        d = lower[j, j]
        if d <= 0.0:
            return j
        d = np.sqrt(d)
        lower[j, j] = d
        lower[j + 1:, j] /= d
        lower[j + 1:, j + 1:] -= np.outer(lower[j + 1:, j], lower[j + 1:, j])
    return nt - 1


def trsm_tile(l, x):
    dz = np.flatnonzero(np.diagonal(l) == 0.0)
    if dz.size:
        return int(dz[0])
    # X L^T = B  <=>  X^T = L^{-1} B^T
    x[:, :] = solve_triangular(l, x.T, lower=True).T
    return -1


def syrk_tile(a, c):
    c -= a @ a.T


def gemm_tile(a, b, c):
    c -= b @ a.T


def geadd_tile(t, c):
    c += t


def _tile(storage, scratch, s):
    n = storage.shape[0]
    return storage[s].T if s < n else scratch[s - n].T


def run_ops(storage, scratch, op_type, dst, src1, src2, start, stop):
    for p in range(start, stop):
        t = op_type[p]
        d = _tile(storage, scratch, dst[p])
        if t == GEMM:
            gemm_tile(_tile(storage, scratch, src1[p]), _tile(storage, scratch, src2[p]), d)
        elif t == SYRK:
            syrk_tile(_tile(storage, scratch, src1[p]), d)
        elif t == TRSM:
            info = trsm_tile(_tile(storage, scratch, src1[p]), d)
            if info >= 0:
                return p, info
        elif t == POTRF:
            info = potrf_tile(d)
            if info >= 0:
                return p, info
        elif t == GEADD:
            geadd_tile(_tile(storage, scratch, src1[p]), d)
        else:
            d[:, :] = 0.0
    return stop, -1


def replay_residual(storage, template, op_type, dst, src1, src2, diag_slot):
    nt = storage.shape[1]
    n_ops = op_type.shape[0]
    acc = np.zeros((nt, nt))
    err2 = 0.0
    cur = -1

    def flush(slot):
        tt = template[slot].T
        diff = acc - tt
        if diag_slot[slot]:
            lower2 = np.tril(diff, -1) ** 2
            return float(2.0 * lower2.sum() + (np.diagonal(diff) ** 2).sum())
        return float(2.0 * (diff ** 2).sum())

    for p in range(n_ops):
        d = dst[p]
        if d != cur:
            if cur >= 0:
                err2 += flush(cur)
            acc[:, :] = 0.0
            cur = d
        t = op_type[p]
        if t == POTRF:
            acc += np.dot(storage[d].T, storage[d])
        elif t == SYRK:
            acc += np.dot(storage[src1[p]].T, storage[src1[p]])
        elif t == TRSM:
            acc += np.dot(storage[d].T, storage[src1[p]])
        else:
            acc += np.dot(storage[src2[p]].T, storage[src1[p]])
    if cur >= 0:
        err2 += flush(cur)
    return err2


def etree_fill_count(n, row_ptr, row_cols):
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(row_ptr[i], row_ptr[i + 1]):
            r = row_cols[p]
            while ancestor[r] != -1 and ancestor[r] != i:
                nxt = ancestor[r]
                ancestor[r] = i
                r = nxt
            if ancestor[r] == -1:
                ancestor[r] = i
                parent[r] = i
    mark = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        mark[i] = i
        for p in range(row_ptr[i], row_ptr[i + 1]):
            r = row_cols[p]
            while mark[r] != i:
                mark[r] = i
                count += 1
                r = parent[r]
    return count

"""Numba implementations of the tile kernels and the task-stream executor.

Tiles are nt x nt float64 arrays; inside matrix storage they are kept
column-major (accessed as transposed views of C-order slots), so inner loops
below run down contiguous columns. Kernels mutate their target in place.
Everything here is nopython and nogil so worker threads overlap.
"""

import numpy as np
from numba import njit

# task type codes shared with the scheduler
POTRF, SYRK, TRSM, GEMM, GEADD, ZERO = 1, 2, 3, 4, 5, 6


@njit(cache=True, nogil=True)
def potrf_tile(a):
    """In-place lower Cholesky of the tile; strictly-upper entries are
    zeroed. Returns -1, or the local index of the first non-positive pivot."""
    nt = a.shape[0]
    for j in range(nt):
        d = a[j, j]
        if d <= 0.0:
            return j
        d = np.sqrt(d)
        a[j, j] = d
        inv = 1.0 / d
        for i in range(j + 1, nt):
            a[i, j] *= inv
        for c in range(j + 1, nt):
            l = a[c, j]
            if l != 0.0:
                for i in range(c, nt):
                    a[i, c] -= a[i, j] * l
    for c in range(1, nt):
        for r in range(c):
            a[r, c] = 0.0
    return -1


@njit(cache=True, nogil=True)
def trsm_tile(l, x):
    """Solve X * L^T = B in place (B arrives in x, X replaces it), with l the
    already-factored diagonal tile. Returns -1, or the local index of a zero
    diagonal."""
    nt = l.shape[0]
    for k in range(nt):
        piv = l[k, k]
        if piv == 0.0:
            return k
        inv = 1.0 / piv
        for i in range(nt):
            x[i, k] *= inv
        for j in range(k + 1, nt):
            c = l[j, k]
            if c != 0.0:
                for i in range(nt):
                    x[i, j] -= x[i, k] * c
    return -1


@njit(cache=True, nogil=True)
def syrk_tile(a, c):
    """c -= a @ a.T (full tile update; the lower part is the meaningful one)."""
    nt = a.shape[0]
    tmp = np.dot(a, a.T)
    for j in range(nt):
        for i in range(nt):
            c[i, j] -= tmp[j, i]


@njit(cache=True, nogil=True)
def gemm_tile(a, b, c):
    """c -= b @ a.T."""
    nt = a.shape[0]
    tmp = np.dot(a, b.T)  # tmp[j, i] == (b @ a.T)[i, j]
    for j in range(nt):
        for i in range(nt):
            c[i, j] -= tmp[j, i]


@njit(cache=True, nogil=True)
def geadd_tile(t, c):
    """c += t."""
    nt = t.shape[0]
    for j in range(nt):
        for i in range(nt):
            c[i, j] += t[i, j]


@njit(cache=True, nogil=True, inline="always")
def _tile(storage, scratch, s):
    if s < storage.shape[0]:
        return storage[s].T
    return scratch[s - storage.shape[0]].T


@njit(cache=True, nogil=True)
def run_ops(storage, scratch, op_type, dst, src1, src2, start, stop):
    """Execute ops [start, stop) of a compiled schedule.

    Returns (stop, -1) on success, or (p, local_index) when op p hit a
    non-positive POTRF pivot / zero TRSM diagonal.
    """
    for p in range(start, stop):
        t = op_type[p]
        d = dst[p]
        if t == GEMM:
            gemm_tile(_tile(storage, scratch, src1[p]),
                      _tile(storage, scratch, src2[p]),
                      _tile(storage, scratch, d))
        elif t == SYRK:
            syrk_tile(_tile(storage, scratch, src1[p]),
                      _tile(storage, scratch, d))
        elif t == TRSM:
            info = trsm_tile(_tile(storage, scratch, src1[p]),
                             _tile(storage, scratch, d))
            if info >= 0:
                return p, info
        elif t == POTRF:
            info = potrf_tile(_tile(storage, scratch, d))
            if info >= 0:
                return p, info
        elif t == GEADD:
            geadd_tile(_tile(storage, scratch, src1[p]),
                       _tile(storage, scratch, d))
        else:
            tt = _tile(storage, scratch, d)
            nt = tt.shape[0]
            for j in range(nt):
                for i in range(nt):
                    tt[i, j] = 0.0
    return stop, -1


@njit(cache=True, nogil=True)
def replay_residual(storage, template, op_type, dst, src1, src2, diag_slot):
    """Squared Frobenius error of L @ L.T against the packed original.

    Walks the sequential schedule, accumulating each target tile's
    reconstruction, and compares it with the template tile on flush. Strictly
    lower entries of diagonal tiles and whole off-diagonal tiles count twice
    (symmetric matrix); padded positions cancel exactly and cost nothing.
    """
    nt = storage.shape[1]
    n_ops = op_type.shape[0]
    acc = np.zeros((nt, nt))  # acc[i, j] = reconstructed element (i, j)
    err2 = 0.0
    cur = -1
    for p in range(n_ops + 1):
        d = dst[p] if p < n_ops else -2
        if d != cur:
            if cur >= 0:
                tt = template[cur].T
                if diag_slot[cur]:
                    for j in range(nt):
                        e = acc[j, j] - tt[j, j]
                        err2 += e * e
                        for i in range(j + 1, nt):
                            e = acc[i, j] - tt[i, j]
                            err2 += 2.0 * e * e
                else:
                    for j in range(nt):
                        for i in range(nt):
                            e = acc[i, j] - tt[i, j]
                            err2 += 2.0 * e * e
            if p == n_ops:
                break
            for j in range(nt):
                for i in range(nt):
                    acc[i, j] = 0.0
            cur = d
        t = op_type[p]
        if t == POTRF:
            tmp = np.dot(storage[d].T, storage[d])
        elif t == SYRK:
            tmp = np.dot(storage[src1[p]].T, storage[src1[p]])
        elif t == TRSM:
            tmp = np.dot(storage[d].T, storage[src1[p]])
        else:
            tmp = np.dot(storage[src2[p]].T, storage[src1[p]])
        for j in range(nt):
            for i in range(nt):
                acc[i, j] += tmp[i, j]
    return err2


@njit(cache=True, nogil=True)
def etree_fill_count(n, row_ptr, row_cols):
    """Stored strict-lower entry count of the Cholesky factor of a symmetric
    pattern given by its strict-lower rows, via elimination-tree row
    subtrees."""
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

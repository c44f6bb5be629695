"""Fill-reducing orderings for arrowhead matrices and exact symbolic fill
counting.

All orderings are deterministic: ties break on the smallest original index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .matcore import SymmetricCsc, StructureStats, permute_symmetric
from . import backend


@dataclass(eq=False)
class Permutation:
    """A bijection on {0..n-1} stored as mutually inverse index maps.

    forward maps old index -> new index; inverse maps new -> old.
    """

    forward: np.ndarray
    inverse: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        idx = np.arange(n, dtype=np.int64)
        return cls(idx, idx.copy())

    @classmethod
    def from_forward(cls, forward) -> "Permutation":
        forward = np.asarray(forward, dtype=np.int64)
        n = forward.size
        inverse = np.empty(n, dtype=np.int64)
        seen = np.zeros(n, dtype=bool)
        if forward.min(initial=0) < 0 or forward.max(initial=-1) >= n:
            raise ValueError("forward map has out-of-range entries")
        seen[forward] = True
        if not seen.all():
            raise ValueError("forward map is not a bijection")
        inverse[forward] = np.arange(n, dtype=np.int64)
        return cls(forward, inverse)

    @property
    def n(self) -> int:
        return self.forward.size

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.forward, np.arange(self.n)))

    def compose(self, other: "Permutation") -> "Permutation":
        """Return self o other: apply ``other`` first, then ``self``."""
        return Permutation.from_forward(self.forward[other.forward])

    def to_text(self) -> str:
        return " ".join(str(int(x)) for x in self.forward)

    @classmethod
    def from_text(cls, text: str) -> "Permutation":
        return cls.from_forward([int(tok) for tok in text.split()])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.forward, other.forward)


@dataclass(frozen=True)
class FillReport:
    """Stored-entry counts before/after symbolic elimination (lower triangle)."""

    nnz_original: int
    nnz_factor: int

    @property
    def fill_in(self) -> int:
        return self.nnz_factor - self.nnz_original


def _adjacency(m: SymmetricCsc, limit: int) -> list[np.ndarray]:
    """Symmetric adjacency lists (no self loops) of the subgraph on
    vertices 0..limit-1."""
    cols = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.col_ptr))
    rows = m.row_idx.astype(np.int64)
    keep = (rows != cols) & (rows < limit)  # rows >= cols, so cols < limit too
    r, c = rows[keep], cols[keep]
    src = np.concatenate([r, c])
    dst = np.concatenate([c, r])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    ptr = np.zeros(limit + 1, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    np.cumsum(ptr, out=ptr)
    return [dst[ptr[v]:ptr[v + 1]] for v in range(limit)]


def _bfs_levels(adj, root, component_mask):
    """BFS level structure restricted to one component; returns list of levels."""
    seen = {root}
    levels = [[root]]
    while True:
        nxt = []
        for v in levels[-1]:
            for w in adj[v]:
                w = int(w)
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            return levels
        nxt.sort()
        levels.append(nxt)


def _pseudo_peripheral(adj, start, degree):
    """George-Liu double-BFS heuristic for a good RCM start vertex."""
    root = start
    levels = _bfs_levels(adj, root, None)
    while True:
        last = levels[-1]
        cand = min(last, key=lambda v: (degree[v], v))
        if cand == root:
            return root
        new_levels = _bfs_levels(adj, cand, None)
        if len(new_levels) > len(levels):
            root, levels = cand, new_levels
        else:
            return cand


def rcm(m: SymmetricCsc, pinned_tail: int = 0) -> Permutation:
    """Reverse Cuthill-McKee on the leading n - pinned_tail vertices.

    The subgraph induced by the head vertices is traversed per connected
    component from a pseudo-peripheral start, children visited by ascending
    degree, and the visit order reversed. The pinned tail keeps its original
    positions at the end; pinned_tail=0 is plain full RCM.
    """
    n = m.n
    if not (0 <= pinned_tail <= n):
        raise ValueError(f"pinned_tail must be in [0, {n}]")
    nh = n - pinned_tail
    adj = _adjacency(m, nh)
    degree = np.array([len(a) for a in adj], dtype=np.int64)
    visited = np.zeros(nh, dtype=bool)
    cm: list[int] = []
    for start in range(nh):
        if visited[start]:
            continue
        root = _pseudo_peripheral(adj, start, degree)
        visited[root] = True
        queue = [root]
        qi = 0
        while qi < len(queue):
            v = queue[qi]
            qi += 1
            cm.append(v)
            nbrs = [int(w) for w in adj[v] if not visited[w]]
            nbrs.sort(key=lambda w: (degree[w], w))
            for w in nbrs:
                visited[w] = True
                queue.append(w)
    forward = np.empty(n, dtype=np.int64)
    for pos, v in enumerate(reversed(cm)):
        forward[v] = pos
    forward[nh:] = np.arange(nh, n)
    return Permutation.from_forward(forward)


def min_degree(m: SymmetricCsc) -> Permutation:
    """Exact greedy minimum-degree elimination ordering.

    Eliminating a vertex turns its neighborhood into a clique (quotient-graph
    semantics made explicit). This is the exact variant of the usual
    approximate minimum degree heuristic; suitable for moderate orders.
    """
    n = m.n
    adj = [set(int(w) for w in a) for a in _adjacency(m, n)]
    alive = np.ones(n, dtype=bool)
    heap = [(len(adj[v]), v) for v in range(n)]
    heapq.heapify(heap)
    forward = np.empty(n, dtype=np.int64)
    for step in range(n):
        while True:
            d, v = heapq.heappop(heap)
            if alive[v] and d == len(adj[v]):
                break
        alive[v] = False
        forward[v] = step
        nbrs = adj[v]
        for w in nbrs:
            adj[w].discard(v)
        nbrs = sorted(nbrs)
        for a_i, a_v in enumerate(nbrs):
            sa = adj[a_v]
            for b_v in nbrs[a_i + 1:]:
                if b_v not in sa:
                    sa.add(b_v)
                    adj[b_v].add(a_v)
        for w in nbrs:
            heapq.heappush(heap, (len(adj[w]), w))
        adj[v] = set()
    return Permutation.from_forward(forward)


def adaptable_nd(m: SymmetricCsc, stats: StructureStats, max_levels: int = 8) -> Permutation:
    """Arrowhead-aware nested dissection.

    The leading block is split at its midpoint with a separator of width
    equal to the detected bandwidth; the separator is moved to the end of the
    block (just before the arrowhead tail), and the rule recurses inside the
    two halves while levels remain and a half is larger than 4x the
    bandwidth. Original relative order is preserved inside every group.
    """
    n, b, t = m.n, stats.bandwidth, stats.thickness
    order: list[np.ndarray] = []

    def rec(lo: int, hi: int, level: int) -> None:
        size = hi - lo
        if b == 0 or level >= max_levels or size <= 4 * b:
            order.append(np.arange(lo, hi, dtype=np.int64))
            return
        mid = lo + size // 2
        rec(lo, mid, level + 1)
        rec(mid + b, hi, level + 1)
        order.append(np.arange(mid, mid + b, dtype=np.int64))

    rec(0, n - t, 0)
    order.append(np.arange(n - t, n, dtype=np.int64))
    old_of_new = np.concatenate(order)
    forward = np.empty(n, dtype=np.int64)
    forward[old_of_new] = np.arange(n, dtype=np.int64)
    return Permutation.from_forward(forward)


def _lower_rows_csr(m: SymmetricCsc, p: Permutation):
    """Strict-lower pattern of the permuted matrix, grouped by row."""
    cols = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.col_ptr))
    rows = m.row_idx.astype(np.int64)
    keep = rows != cols
    pi = p.forward[rows[keep]]
    pj = p.forward[cols[keep]]
    a = np.maximum(pi, pj)
    b = np.minimum(pi, pj)
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    ptr = np.zeros(m.n + 1, dtype=np.int64)
    np.add.at(ptr, a + 1, 1)
    np.cumsum(ptr, out=ptr)
    return ptr, b.astype(np.int64)


def symbolic_fill_count(m: SymmetricCsc, p: Permutation | None = None) -> FillReport:
    """Exact stored-entry count of the Cholesky factor of the permuted
    pattern, via the elimination tree and row-subtree traversal."""
    if p is None:
        p = Permutation.identity(m.n)
    ptr, cols = _lower_rows_csr(m, p)
    lower_strict = backend.impl.etree_fill_count(m.n, ptr, cols)
    return FillReport(nnz_original=m.nnz, nnz_factor=int(lower_strict) + m.n)


def select_ordering(m: SymmetricCsc, candidates: list[Permutation]) -> Permutation:
    """Pick the candidate with the smallest factor size; the identity (always
    implicitly included) wins ties, earlier candidates win later ones."""
    best = Permutation.identity(m.n)
    best_count = symbolic_fill_count(m, best).nnz_factor
    for cand in candidates:
        c = symbolic_fill_count(m, cand).nnz_factor
        if c < best_count:
            best, best_count = cand, c
    return best
